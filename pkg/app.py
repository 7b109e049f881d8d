"""
rigidflow - Command-Line Entry Point
Run: python app.py <command> [options]    (python app.py --help for the list)
"""
import sys

from rigidflow.app import main

if __name__ == '__main__':
    sys.exit(main())
