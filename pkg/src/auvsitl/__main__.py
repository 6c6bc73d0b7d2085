import sys

from auvsitl.cli import main

sys.exit(main())
