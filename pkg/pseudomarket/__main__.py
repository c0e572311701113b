import sys

from pseudomarket.cli import main

sys.exit(main())
