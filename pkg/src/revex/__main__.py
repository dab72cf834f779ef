import sys

from revex.cli import main

sys.exit(main())
