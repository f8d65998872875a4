import pytest

from fracsemilinear import regression


@pytest.mark.parametrize("golden", regression.GOLDEN, ids=lambda g: g.name)
def test_golden_value(golden):
    row = regression.run([golden.name])[0]
    assert row["passed"], row


def test_golden_names_unique():
    names = [g.name for g in regression.GOLDEN]
    assert len(names) == len(set(names))
