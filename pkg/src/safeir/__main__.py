#!/usr/bin/env python3
"""Entry point for ``python -m safeir``."""

import sys

from safeir.cli import main

if __name__ == "__main__":
    sys.exit(main())
