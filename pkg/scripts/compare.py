#!/usr/bin/env python3
"""Reduction metrics between two saved runs (``edtsc compare`` wrapper)."""

import sys

from edtsc.cli import main

if __name__ == "__main__":
    sys.exit(main(["compare", *sys.argv[1:]]))
