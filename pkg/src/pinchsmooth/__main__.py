import sys

from pinchsmooth.cli import main

sys.exit(main())
