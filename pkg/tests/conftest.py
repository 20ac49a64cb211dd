import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gridrestore import builtin_feeder


@pytest.fixture(scope="session")
def ieee13():
    return builtin_feeder("ieee13")


@pytest.fixture(scope="session")
def ieee123():
    return builtin_feeder("ieee123")
