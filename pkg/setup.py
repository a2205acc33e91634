#!/usr/bin/env python3
"""
Setup script for balens
"""
import subprocess
import sys
import os

def install_requirements():
    """Install required packages"""
    print("Installing Python requirements...")
    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
        print("✅ Requirements installed successfully!")
    except subprocess.CalledProcessError as e:
        print(f"❌ Error installing requirements: {e}")
        return False
    return True

def check_env_file():
    """.env.local is optional; report which BALENS_* defaults apply"""
    if not os.path.exists(".env.local"):
        print("ℹ️  No .env.local file found, built-in defaults will be used.")
        print("To change them, create a .env.local file such as:")
        print("""
# Example .env.local file:
BALENS_SEED=7            # seed when --seed is not given
BALENS_THREADS=4         # worker count for evaluate (default: all cores)
BALENS_LOG_LEVEL=INFO
BALENS_OUT=balens_out    # default output directory
        """)
        return False
    print("✅ .env.local file found!")
    return True

def main():
    print("🌲 balens setup")
    print("=" * 40)

    if not install_requirements():
        return 1

    check_env_file()

    print("\n🎉 Setup complete! You can now run:")
    print("  python -m src.cli synth --n 2000 --positive-rate 0.05 --seed 7 --out data")
    print("  python -m src.cli evaluate --data data/cohort.csv --seed 7 --out run")
    print("  python -m src.cli report --out run")
    print("  python -m pytest tests -m \"not slow\"")
    return 0

def build_package():
    """Package metadata for pip/setuptools builds"""
    from setuptools import find_packages, setup

    with open("requirements.txt") as f:
        requirements = [
            line.strip() for line in f
            if line.strip() and not line.startswith("#") and not line.startswith("pytest")
        ]
    setup(
        name="balens",
        version="0.1.0",
        packages=find_packages(include=["src", "src.*"]),
        install_requires=requirements,
        extras_require={"test": ["pytest>=7.0.0"]},
        python_requires=">=3.9",
    )

if __name__ == "__main__":
    if len(sys.argv) > 1:
        # Invoked by pip/setuptools with a build command
        build_package()
    else:
        sys.exit(main())
