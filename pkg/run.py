#!/usr/bin/env python3
"""
Startup script for the quantum-walk toolkit.
"""
import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from qwalk.main import cli  # noqa: E402


def main():
    """Run the command-line interface."""
    cli(prog_name="qwalk")


if __name__ == "__main__":
    main()
