#!/usr/bin/env python3
"""
Convenience script to run Spline-Diff.
Usage: python run.py [estimate|simulate|bench] ...   or   python run.py --test [pytest args]
"""
import sys
import os

# Add the backend directory to the path so imports work correctly
backend_path = os.path.join(os.path.dirname(__file__), 'app', 'backend')
sys.path.insert(0, backend_path)

if __name__ == "__main__":
    import subprocess

    if len(sys.argv) > 1 and sys.argv[1] == "--test":
        print("Running test suite...")
        # Use the current python interpreter to run pytest
        result = subprocess.call([sys.executable, "-m", "pytest"] + sys.argv[2:])
        sys.exit(result)

    from main import main
    sys.exit(main(sys.argv[1:]))
