"""Allow running the toolkit with `python -m dlczsim`."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
