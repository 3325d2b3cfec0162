#!/usr/bin/env python3
"""
halfspace-kernels Development Setup Script

Creates the virtual environment, installs runtime and development packages,
checks the committed inputs and prepares the output tree. Pass --smoke to
finish with a short CLI run on the Laplacian.
"""

import argparse
import platform
import subprocess
import sys
from pathlib import Path

MIN_PYTHON = (3, 9)
VENV = Path("venv")
REQUIRED_INPUTS = ["envelopes.json", "configs/reference.json", "systems/laplacian2.json"]
OUTPUT_DIRS = ["output", "output/fields", "output/plots"]

GITIGNORE_ENTRIES = [
    "__pycache__/",
    "*.py[cod]",
    "venv/",
    ".pytest_cache/",
    ".coverage",
    "htmlcov/",
    ".mypy_cache/",
    ".ruff_cache/",
    "output/",
    ".vscode/",
    ".idea/",
    ".DS_Store",
]


def venv_bin(name: str) -> Path:
    """Path of an executable inside the virtual environment."""
    if platform.system() == "Windows":
        return VENV / "Scripts" / f"{name}.exe"
    return VENV / "bin" / name


def check_python_version() -> None:
    if sys.version_info < MIN_PYTHON:
        sys.exit(f"ERROR: Python {MIN_PYTHON[0]}.{MIN_PYTHON[1]}+ required, found {platform.python_version()}")
    print(f"OK: Python {platform.python_version()}")


def ensure_venv() -> None:
    if VENV.exists():
        print("OK: venv/ already exists")
        return
    subprocess.run([sys.executable, "-m", "venv", str(VENV)], check=True)
    print("OK: venv/ created")


def install_requirements(dev: bool) -> None:
    files = ["requirements.txt"] + (["requirements-dev.txt"] if dev else [])
    for req in files:
        print(f"Installing {req}...")
        subprocess.run([str(venv_bin("pip")), "install", "-r", req], check=True)
    # scipy and numpy must import cleanly before anything else is worth running
    subprocess.run([str(venv_bin("python")), "-c", "import numpy, scipy, matplotlib"], check=True)
    print("OK: packages installed")


def check_inputs() -> None:
    missing = [name for name in REQUIRED_INPUTS if not Path(name).is_file()]
    if missing:
        sys.exit(f"ERROR: missing committed inputs: {', '.join(missing)}")
    print(f"OK: {len(REQUIRED_INPUTS)} committed inputs present")


def prepare_output() -> None:
    for name in OUTPUT_DIRS:
        Path(name).mkdir(parents=True, exist_ok=True)
    print("OK: output/ ready")


def update_gitignore() -> None:
    path = Path(".gitignore")
    present = set(path.read_text().splitlines()) if path.exists() else set()
    added = [entry for entry in GITIGNORE_ENTRIES if entry not in present]
    if added:
        with path.open("a") as fh:
            fh.write("\n".join(added) + "\n")
    print(f"OK: .gitignore ({len(added)} entries added)")


def smoke_run() -> None:
    """Build the explicit Laplacian kernel on a small grid through the CLI."""
    cmd = [
        str(venv_bin("python")), "main.py", "kernel",
        "--system", "systems/laplacian2.json",
        "--R", "16", "--N", "512",
        "--method", "explicit",
        "--output", "output/smoke",
    ]
    result = subprocess.run(cmd)
    if result.returncode != 0:
        sys.exit(f"ERROR: smoke run exited with {result.returncode}")
    print("OK: smoke run passed")


def main() -> None:
    parser = argparse.ArgumentParser(description="Set up a halfspace-kernels development environment")
    parser.add_argument("--no-dev", action="store_true", help="skip test and lint packages")
    parser.add_argument("--smoke", action="store_true", help="finish with a short kernel build")
    args = parser.parse_args()

    print("halfspace-kernels Development Setup")
    print("=" * 50)

    check_python_version()
    ensure_venv()
    install_requirements(dev=not args.no_dev)
    check_inputs()
    prepare_output()
    update_gitignore()
    if args.smoke:
        smoke_run()

    print("=" * 50)
    print("Next: source activate.sh, then pytest or")
    print("      python main.py verify --config configs/reference.json")


if __name__ == "__main__":
    main()
