import sys

from isac_ident.cli import main

sys.exit(main())
