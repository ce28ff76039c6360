import sys

from rfshake.cli import main

sys.exit(main())
