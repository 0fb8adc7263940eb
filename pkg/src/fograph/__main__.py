import sys

from fograph.cli import main

sys.exit(main())
