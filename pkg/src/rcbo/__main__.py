import sys

from rcbo.cli import main

sys.exit(main())
