import sys

from dasa.cli import main

sys.exit(main())
