import sys

from bbglm.cli import main

sys.exit(main())
