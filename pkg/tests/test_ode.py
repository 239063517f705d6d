import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fcmono.ode import CEXT, EXT, IntegrationFailure, StepStats, integrate


@given(st.floats(-3, 3), st.floats(-8, 8))
def test_scalar_exponential(re, im):
    lam = CEXT(complex(re, im))
    y = integrate(lambda t, y: lam * y, np.array([1.0 + 0j]), 1e-13, 1e-13)
    assert y.dtype == CEXT
    assert abs(complex(y[0]) - np.exp(complex(re, im))) < 1e-11 * max(1, abs(np.exp(complex(re, im))))


def test_rotation_in_extended_precision():
    """Full turn of a 2x2 rotation returns to the identity far below double rounding."""
    w = EXT(2) * np.arccos(EXT(-1))
    A = np.array([[0, -w], [w, 0]], dtype=CEXT)
    stats = StepStats()
    Y = integrate(lambda t, Y: A @ Y, np.eye(2), 1e-16, 1e-16, stats)
    assert np.max(np.abs(Y - np.eye(2))) < 1e-14
    assert stats.steps > 0 and stats.nfev >= 12 * stats.steps


def test_time_dependent_rhs():
    y = integrate(lambda t, y: 3 * t**2 * y, np.array([1.0 + 0j]), 1e-12, 1e-12)
    assert abs(complex(y[0]) - np.e) < 1e-10


def test_blow_up_is_reported():
    with pytest.raises(IntegrationFailure):
        integrate(lambda t, y: y**2 / (EXT(0.5) - t) ** 2, np.array([1.0 + 0j]), 1e-10, 1e-10)
