import sys

from multisem.cli import main

sys.exit(main())
