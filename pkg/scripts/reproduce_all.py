"""Run every built-in scenario and print the report.

Usage: python3 scripts/reproduce_all.py [--machine]
"""

import sys

from isred import serialization as ser
from isred.harness import reproduce_all


def main(argv):
    report = reproduce_all()
    if "--machine" in argv:
        sys.stdout.write(ser.dumps(report.machine()))
    else:
        print(report.text())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
