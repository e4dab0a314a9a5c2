import sys

from ulab.cli.main import main

sys.exit(main())
