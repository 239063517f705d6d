import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcmono.connection import (
    DegreeBoundExceeded,
    FrameDimensionError,
    NearSingularElimination,
    connection_at,
    connection_fast,
    default_degree_bound,
    integrability_residual,
    relation_system,
)
from fcmono.params import ToleranceProfile, generic_params, index_maps
from fcmono.series import theta_derivatives

GRID = [(2, 1), (3, 1), (2, 2), (3, 2), (2, 3)]
POINT = np.array([0.02 + 0.01j, 0.015 - 0.005j, 0.01 + 0.004j])


def _theta_oracle_gap(P, x, cs):
    """Compare C_k applied to the frame with independently summed theta_k theta^alpha Phi_J."""
    p, m = P.p, P.m
    Js, alphas = index_maps(p, m)
    worst = 0.0
    for J in Js:
        W = theta_derivatives(P, x, J, alphas)
        for k in range(m):
            shifted = [tuple(a[j] + (j == k) for j in range(m)) for a in alphas]
            want = theta_derivatives(P, x, J, shifted)
            worst = max(worst, float(np.max(np.abs(cs.C[k] @ W - want)) / np.max(np.abs(want))))
    return worst


@pytest.mark.parametrize("p,m", GRID)
def test_connection_matches_series_oracle(p, m):
    P = generic_params(p, m, 1)
    x = POINT[:m]
    assert _theta_oracle_gap(P, x, connection_at(P, x)) < 1e-9


@settings(max_examples=15)
@given(st.floats(0.005, 0.03), st.floats(-np.pi, np.pi), st.floats(0.005, 0.03), st.floats(-np.pi, np.pi))
def test_connection_oracle_at_random_points(r1, a1, r2, a2):
    P = generic_params(2, 2, 3)
    x = np.array([r1 * np.exp(1j * a1), r2 * np.exp(1j * a2)])
    assert _theta_oracle_gap(P, x, connection_at(P, x)) < 1e-9


@pytest.mark.parametrize("p,m", [(2, 2), (3, 2), (2, 3)])
def test_flatness(p, m):
    P = generic_params(p, m)
    cs = connection_at(P, POINT[:m])
    assert integrability_residual(cs) < 1e-6


def test_one_variable_is_companion_form():
    """For m = 1 the connection is the companion matrix of the Gauss-type operator."""
    P = generic_params(3, 1, 0)
    C = connection_at(P, [0.1 + 0.02j]).C[0]
    assert np.allclose(C[:-1, 1:], np.eye(2)) and np.allclose(C[:-1, 0], 0)


def test_fast_path_agrees():
    P = generic_params(3, 2)
    x = POINT[:2]
    rs = relation_system(P, default_degree_bound(3, 2))
    C_ext = connection_fast(rs, x, ToleranceProfile(), extended=True)
    assert C_ext.dtype == np.clongdouble
    assert np.allclose(connection_fast(rs, x, ToleranceProfile()), connection_at(P, x).C, rtol=0, atol=1e-12)


def test_singular_point_is_refused():
    P = generic_params(2, 2)
    t = 0.25  # R(t, t) = 1 - 4t for (p, m) = (2, 2)
    with pytest.raises((NearSingularElimination, FrameDimensionError, DegreeBoundExceeded)):
        connection_at(P, [t, t])
