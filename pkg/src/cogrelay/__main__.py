import sys

from cogrelay.cli import main

sys.exit(main())
