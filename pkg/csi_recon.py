#!/usr/bin/env python3
"""
Launcher script for the compressive spectral imaging CLI

This script provides a convenient way to run the CLI from the root directory
without needing to remember the src/ folder structure.
"""

import subprocess
import sys
from pathlib import Path

def main():
    # Path to the actual CLI script
    cli_script = Path(__file__).resolve().parent / "src" / "cli" / "csi_cli.py"

    if not cli_script.exists():
        print("❌ Error: CLI script not found at src/cli/csi_cli.py")
        print("Make sure the src/ folder sits next to this launcher.")
        return 1

    # Pass all command line arguments to the actual CLI
    cmd = [sys.executable, str(cli_script)] + sys.argv[1:]

    try:
        result = subprocess.run(cmd)
        return result.returncode
    except KeyboardInterrupt:
        print("\n⌨️ Run interrupted by user")
        return 130
    except Exception as e:
        print(f"❌ Error running CLI: {e}")
        return 1

if __name__ == "__main__":
    sys.exit(main())
