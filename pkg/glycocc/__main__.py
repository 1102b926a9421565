import sys

from glycocc.cli import main

sys.exit(main())
