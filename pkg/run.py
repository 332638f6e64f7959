#!/usr/bin/env python3
"""
Script to run dqpt-lab from a checkout.
"""
import os
import sys


def main():
    """
    Run the CLI with the repository root on the import path.
    """
    # Get the directory of this script
    script_dir = os.path.dirname(os.path.abspath(__file__))
    if script_dir not in sys.path:
        sys.path.insert(0, script_dir)

    from app import main as app_main

    sys.exit(app_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
