"""
Main entry point for halfspace-kernels.

Configures logging (stderr, so stdout carries only JSON results) and hands
the command line to integration.cli.

Usage:
    python main.py kernel --system systems/laplacian2.json --method explicit
    python main.py verify --config configs/reference.json --jobs 4
"""

import logging
import sys
from typing import Optional, Sequence

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

from integration.cli import main as cli_main  # noqa: E402


def main(argv: Optional[Sequence[str]] = None) -> int:
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
