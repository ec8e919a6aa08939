import sys

from neumannlab.harness.cli import main

sys.exit(main())
