import sys

from ensembleq.cli import main

sys.exit(main())
