import pytest

from pmusched.core import make_instance


@pytest.fixture
def trace_inst():
    # p=(1,2,3), w=(3,2,1), job 3 before job 1 (0-based: 2 before 0)
    return make_instance([1, 2, 3], [3, 2, 1], [(2, 0)])
