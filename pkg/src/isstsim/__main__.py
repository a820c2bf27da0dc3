import sys

from isstsim.cli import main

sys.exit(main())
