import sys
from pathlib import Path

# Allow `from helpers import ...` regardless of how pytest was invoked.
sys.path.insert(0, str(Path(__file__).parent))
