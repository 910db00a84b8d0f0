import sys

from uregion.cli import main

if __name__ == "__main__":
    sys.exit(main())
