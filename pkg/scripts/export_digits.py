#!/usr/bin/env python3
"""
Digits Corpus Export Script
Writes the scikit-learn 8x8 digits corpus as ACIL feature/label files together
with a ready-to-run experiment config.

Usage:
    ./scripts/export_digits.py data/digits
    acil run -c data/digits/experiment.yaml
"""
import os
import sys

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.experiment.digits import export_digits
from src.utils.helpers import configure_logging


def main():
    """Export the corpus into the directory given on the command line."""
    directory = sys.argv[1] if len(sys.argv) > 1 else os.path.join('data', 'digits')
    configure_logging()
    config_path = export_digits(directory)
    print(f"Config written to {config_path}")
    print(f"Run it with: acil run -c {config_path}")
    return True


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
