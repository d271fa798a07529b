#!/usr/bin/env python3
"""
Test script for the installation checker

Usage:
python tests/test_installation.py
"""

import os
import sys

import pytest

# Add project root to Python path for src module imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.config import Settings, get_env_variable, load_settings
from utils.verify_installation import check_adjoint_pair, check_python_packages


def test_required_packages_present():
    assert check_python_packages() == []


def test_adjoint_smoke_check_passes():
    assert check_adjoint_pair()


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("CSI_ORACLE_MAX_COLUMNS", "128")
    monkeypatch.setenv("CSI_WORKERS", "0")
    monkeypatch.setenv("CSI_LOG_LEVEL", "debug")
    settings = load_settings()
    assert settings == Settings(log_level="DEBUG", oracle_max_columns=128, workers=1,
                                default_seed=settings.default_seed)
    assert get_env_variable("CSI_SURELY_UNSET_KEY", "fallback") == "fallback"


def main():
    """Run all tests"""
    print("Installation - Test Suite")
    print("=" * 50)
    return pytest.main([__file__, "-v"])


if __name__ == "__main__":
    sys.exit(main())
