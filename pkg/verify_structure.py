#!/usr/bin/env python3
"""
Verify the project layout before a run
"""
import os
import sys

REQUIRED_FILES = [
    "requirements.txt",
    "runtime.txt",
    "pytest.ini",
    "app/__init__.py",
    "app/main.py",
    "app/config.py",
    "app/exceptions.py",
    "app/corpus.py",
    "app/subword.py",
    "app/models.py",
    "app/training.py",
    "app/decode.py",
    "app/evaluation.py",
    "app/backtrans.py",
    "app/pipeline.py",
    "app/routers/__init__.py",
    "app/routers/data.py",
    "app/routers/training.py",
    "app/routers/translation.py",
    "app/routers/experiments.py",
    ".env.example",
    "setup.sh",
    "run.sh",
]

REQUIRED_DIRS = [
    "app",
    "app/routers",
    "app/schemas",
    "app/utils",
]

CRITICAL_PACKAGES = ["torch", "sacrebleu", "sacremoses", "pydantic"]


def check_file_exists(path):
    if os.path.exists(path):
        return True, f"✅ {path}"
    return False, f"❌ {path} (missing)"


def check_directory_exists(path):
    if os.path.isdir(path):
        return True, f"✅ {path}/"
    return False, f"❌ {path}/ (missing)"


def main():
    print("🔍 Verifying toolkit structure...")
    print("=" * 60)

    all_passed = True

    print("\n📁 Directory Structure:")
    for directory in REQUIRED_DIRS:
        passed, message = check_directory_exists(directory)
        print(f"  {message}")
        all_passed = all_passed and passed

    print("\n📄 Required Files:")
    for file in REQUIRED_FILES:
        passed, message = check_file_exists(file)
        print(f"  {message}")
        all_passed = all_passed and passed

    print("\n📦 requirements.txt check:")
    if os.path.exists("requirements.txt"):
        with open("requirements.txt", "r") as f:
            lines = [line.strip().lower() for line in f if line.strip() and not line.startswith("#")]
        print(f"  Found {len(lines)} dependencies")
        for package in CRITICAL_PACKAGES:
            if any(line.startswith(package) for line in lines):
                print(f"  ✅ {package} in requirements.txt")
            else:
                print(f"  ❌ {package} missing from requirements.txt")
                all_passed = False
    else:
        print("  ❌ requirements.txt not found")
        all_passed = False

    print("\n" + "=" * 60)
    if all_passed:
        print("🎉 Structure verification complete! All checks passed.")
        print("\n  ./setup.sh           # Install dependencies")
        print("  pytest -m 'not slow'  # Fast tests")
        print("  ./run.sh              # Synthetic five-system comparison")
    else:
        print("⚠️ Structure verification failed. Missing required files/directories.")
        sys.exit(1)


if __name__ == "__main__":
    main()
