import sys
from pathlib import Path

# Make tests/reference.py and tests/echo_bridge.py importable as plain modules.
sys.path.insert(0, str(Path(__file__).resolve().parent))
