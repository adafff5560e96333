"""
Main entry point for the simulator command line.
Allows running: python -m src.circuit_collectives.tools <subcommand>
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
