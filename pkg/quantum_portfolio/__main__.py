import sys

from quantum_portfolio.cli import main

sys.exit(main())
