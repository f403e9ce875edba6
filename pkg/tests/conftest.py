import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flatlog import testmode


@pytest.fixture
def instrumented():
    """Enable trace collection and invariant checks for one test."""
    previous = testmode.enabled
    testmode.enabled = True
    testmode.reset()
    try:
        yield testmode
    finally:
        testmode.enabled = previous
        testmode.reset()
