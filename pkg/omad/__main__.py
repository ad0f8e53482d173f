import sys

from omad.harness.cli import main

sys.exit(main())
