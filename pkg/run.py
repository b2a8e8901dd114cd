"""
Prethermal - Entry Point
    python run.py run --config config/experiments/prethermal_plateau.json
    python run.py validate --oracle N=1000 M=50
    python run.py list-experiments
"""

import sys

from src.cli.runner import main

if __name__ == "__main__":
    sys.exit(main())
