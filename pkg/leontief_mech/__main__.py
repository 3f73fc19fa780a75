"""Entry point for python -m leontief_mech."""

import sys

from leontief_mech.main import main

if __name__ == "__main__":
    sys.exit(main())
