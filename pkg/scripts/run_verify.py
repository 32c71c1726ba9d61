#!/usr/bin/env python3
"""Run the full theory-check battery and print a JSON summary.

Thin wrapper over ``cscbench verify``; accepts the same flags.
"""

import sys

from cscbench.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify", *sys.argv[1:]]))
