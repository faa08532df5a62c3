#!/usr/bin/env python3
"""
Check that every runtime dependency imports and reports a version
"""
import importlib
import sys
from importlib.metadata import PackageNotFoundError, version

import pytest

# (distribution, import name)
PACKAGES = [
    ("torch", "torch"),
    ("numpy", "numpy"),
    ("sacrebleu", "sacrebleu"),
    ("sacremoses", "sacremoses"),
    ("pydantic", "pydantic"),
    ("pydantic-settings", "pydantic_settings"),
    ("python-dotenv", "dotenv"),
    ("reportlab", "reportlab"),
]


def check_import(package_name, import_name):
    try:
        importlib.import_module(import_name)
        return True, f"✅ {package_name}"
    except ImportError as e:
        return False, f"❌ {package_name}: {str(e)}"


def check_package_version(package_name):
    try:
        return True, f"✅ {package_name}=={version(package_name)}"
    except PackageNotFoundError:
        return False, f"❌ {package_name} not installed"


@pytest.mark.parametrize("package_name, import_name", PACKAGES)
def test_dependency_available(package_name, import_name):
    passed, message = check_import(package_name, import_name)
    assert passed, message
    passed, message = check_package_version(package_name)
    assert passed, message


def test_application_imports():
    for module in ("app.main", "app.pipeline", "app.backtrans", "app.utils.reports"):
        importlib.import_module(module)


def main():
    print("🔍 Checking toolkit dependencies...")
    print("=" * 60)
    print(f"Python version: {sys.version.split()[0]}")

    all_passed = True
    for package, import_name in PACKAGES:
        for passed, message in (check_package_version(package), check_import(package, import_name)):
            print(f"  {message}")
            all_passed = all_passed and passed

    print("=" * 60)
    if all_passed:
        print("🎉 All dependency checks passed.")
    else:
        print("⚠️ Some checks failed. Run ./setup.sh first.")
        sys.exit(1)


if __name__ == "__main__":
    main()
