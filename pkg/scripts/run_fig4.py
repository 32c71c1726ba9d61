#!/usr/bin/env python3
"""Run the dense-vs-plain reconstruction experiment and write fig4.csv.

Thin wrapper over ``cscbench fig4``; accepts the same flags.
"""

import sys

from cscbench.cli import main

if __name__ == "__main__":
    argv = sys.argv[1:]
    if not any(arg.startswith("--out") for arg in argv):
        argv += ["--out", "out"]
    sys.exit(main(["fig4", *argv]))
