"""Allow ``python -m remnet``"""

import sys

from remnet.main import main

if __name__ == "__main__":
    sys.exit(main())
