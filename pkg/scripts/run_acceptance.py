"""Run the acceptance criteria and print one PASS/FAIL line each."""
import runpy
import sys
from pathlib import Path

if __name__ == "__main__":
    path = Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py"
    sys.path.insert(0, str(path.parent))
    runpy.run_path(str(path), run_name="__main__")
