import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def l1_corpus():
    from corpus import dominated_cocycles

    return dominated_cocycles(100)
