"""Spatio-temporal interpolation - Entry Point.

Runs one pipeline stage (or all of them) against the configured
observations, e.g.:

    python main.py all --config config/synthetic.yaml --seed 42 --threads 1
"""

import sys

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
