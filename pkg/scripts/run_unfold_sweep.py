#!/usr/bin/env python3
"""Run the unfolding sweep (objective + accuracy per unfolding depth).

Thin wrapper over ``cscbench unfold-sweep``; accepts the same flags.
"""

import sys

from cscbench.cli import main

if __name__ == "__main__":
    sys.exit(main(["unfold-sweep", *sys.argv[1:]]))
