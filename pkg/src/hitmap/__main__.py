import sys

from hitmap.bench.cli import main

sys.exit(main())
