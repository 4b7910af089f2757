import numpy as np
import pytest

# Lines recorded by tests/test_acceptance.py, echoed after the run so they
# land in the plain pytest log.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_bandlimited(rng, shape, period, kmin, kmax, components=1, real=True):
    """Random field with coefficients on kmin < |xi| < kmax."""
    from besovlab.fields import SpectralField

    f = SpectralField.zeros(shape, period, components=components)
    k = f.kmag()
    m = (k > kmin) & (k < kmax)
    c = rng.normal(size=(components, m.sum())) + 1j * rng.normal(size=(components, m.sum()))
    f.coeffs[:, m] = c
    if real:
        vals = f.to_physical().real
        return SpectralField.from_physical(vals, period, real=True)
    return f
