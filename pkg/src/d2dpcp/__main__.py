import sys

from d2dpcp.cli import main

sys.exit(main())
