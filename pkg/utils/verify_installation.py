#!/usr/bin/env python3
"""
Installation Verification Script for the CSI reconstruction toolkit

This script verifies that all required dependencies are properly installed
and that the sensing operator and its adjoint agree on a tiny problem.
"""

import sys
import os

# Add project root to Python path for src module imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

REQUIRED_PACKAGES = {
    "numpy": "numpy",
    "scipy": "scipy",
    "scikit-image": "skimage",
    "pandas": "pandas",
    "Pillow": "PIL",
    "python-dotenv": "dotenv",
}

def check_python_packages():
    """Check if required Python packages are installed"""
    print("🐍 Checking Python packages...")

    missing_packages = []

    for package_name, import_name in REQUIRED_PACKAGES.items():
        try:
            __import__(import_name)
            print(f"  ✅ {package_name}")
        except ImportError:
            print(f"  ❌ {package_name} - MISSING")
            missing_packages.append(package_name)

    return missing_packages

def check_environment_variables():
    """Show the effective settings (all keys are optional)"""
    print("\n🔐 Checking environment variables...")

    try:
        from src.config import load_settings

        settings = load_settings()
        print(f"  ✅ CSI_LOG_LEVEL={settings.log_level}")
        print(f"  ✅ CSI_ORACLE_MAX_COLUMNS={settings.oracle_max_columns}")
        print(f"  ✅ CSI_WORKERS={settings.workers}")
        print(f"  ✅ CSI_DEFAULT_SEED={settings.default_seed}")
        return True
    except Exception as e:
        print(f"  ❌ Invalid settings: {e}")
        return False

def check_adjoint_pair(dims=(6, 5, 4), shots=2):
    """Check <Hx, y> == <x, H^T y> on a random problem"""
    print("\n🔬 Testing sensing operator adjoint...")

    try:
        import numpy as np
        from src.sensing.cassi_model import BINARY, MeasurementSet, adjoint, forward, generate_aperture
        from src.tensors.tensor_core import Tensor3

        M, N, L = dims
        rng = np.random.default_rng(0)
        aperture = generate_aperture(BINARY, M, N, L, shots, 0.5, seed=1)
        x = Tensor3(rng.standard_normal(dims))
        hx = forward(x, aperture)
        y = MeasurementSet(rng.standard_normal(hx.images.shape))
        lhs = float(np.dot(hx.y, y.y))
        rhs = float(np.sum(x.values * adjoint(y, aperture, dims).values))
        error = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))
        if error > 1e-9:
            print(f"  ❌ Adjoint mismatch: relative error {error:.2e}")
            return False
        print(f"  ✅ Adjoint pair agrees (relative error {error:.2e})")
        return True
    except Exception as e:
        print(f"  ❌ Adjoint smoke test failed: {e}")
        return False

def main():
    """Run all verification checks"""
    print("🔍 CSI Reconstruction Installation Verification")
    print("=" * 50)

    all_good = True

    missing_packages = check_python_packages()
    if missing_packages:
        print(f"\n❌ Missing packages: {', '.join(missing_packages)}")
        print("Install with: pip install -r requirements.txt")
        all_good = False
    else:
        if not check_environment_variables():
            all_good = False
        if not check_adjoint_pair():
            all_good = False

    print("\n" + "=" * 50)
    if all_good:
        print("🎉 ALL CHECKS PASSED! Your installation is ready.")
        print("\n📚 Next steps:")
        print("  1. Run: python3 csi_recon.py phantom --dims 32x32x8 --out scene.scb")
        print("  2. Run: python3 csi_recon.py simulate --scene scene.scb --out y.sme --ca-out y.ca")
        print("  3. Run: python3 csi_recon.py reconstruct --meas y.sme --ca y.ca --out rec.scb")
    else:
        print("⚠️  SOME ISSUES FOUND - Please fix the issues above")
        print("\n📖 Installation guide: docs/PROTOCOLS_GUIDE.md")

    return 0 if all_good else 1

if __name__ == "__main__":
    sys.exit(main())
