import sys

from pacl.cli import main

sys.exit(main())
