import sys

from msnp.cli import main

sys.exit(main())
