import sys
from pathlib import Path

# let tests import the shared util module regardless of invocation directory
sys.path.insert(0, str(Path(__file__).resolve().parent))
