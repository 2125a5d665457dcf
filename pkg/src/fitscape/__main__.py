import sys

from fitscape.cli import main

sys.exit(main())
