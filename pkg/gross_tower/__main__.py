import sys

from gross_tower.cli import main

sys.exit(main())
