"""Run every acceptance check and write a JSON report; exit status 2 on any failure."""
import sys

from chronocollapse.cli import main

if __name__ == "__main__":
    sys.exit(main(["validate", "all", *sys.argv[1:]]))
