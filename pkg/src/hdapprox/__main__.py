import sys

from hdapprox.cli import main

sys.exit(main())
