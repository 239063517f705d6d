import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import hyp2f1

from fcmono.connection import connection_at
from fcmono.params import Params, generic_params, index_maps
from fcmono.series import (
    IllConditioned,
    base_point,
    equilibrate,
    eval_series,
    frame_matrix,
    pochhammer,
    series_coefficients,
    theta_derivatives,
)

small = st.complex_numbers(max_magnitude=0.15, allow_nan=False, allow_infinity=False)


@given(st.floats(-5, 5), st.integers(0, 12))
def test_pochhammer_recurrence(c, n):
    assert pochhammer(c, n + 1) == pytest.approx(pochhammer(c, n) * (c + n), rel=1e-12, abs=1e-300)


@given(small)
def test_gauss_case_matches_scipy(x):
    P = Params.from_arrays([0.31, 0.57], [[0.83], [1.0]])
    want = hyp2f1(0.31, 0.57, 0.83, x)
    sv = eval_series(P, [x])
    assert abs(sv.value - want) <= max(10 * sv.truncation_estimate, 1e-14)
    assert abs(eval_series(P, [x], N=80).value - want) < 1e-14


def test_three_parameter_case_matches_mpmath():
    P = Params.from_arrays([0.2, 0.45, 0.7], [[0.6], [1.3], [1.0]])
    x = 0.3 - 0.2j
    want = complex(mpmath.hyp3f2(0.2, 0.45, 0.7, 0.6, 1.3, x))
    assert abs(eval_series(P, [x]).value - want) < 1e-12


def test_two_variable_case_matches_appell_f4():
    P = Params.from_arrays([0.3, 0.55], [[0.8, 1.2], [1.0, 1.0]])
    x, y = 0.04 + 0.01j, 0.03 - 0.02j
    want = complex(mpmath.appellf4(0.3, 0.55, 0.8, 1.2, x, y))
    assert abs(eval_series(P, [x, y]).value - want) < 1e-13


def test_frobenius_solution_of_gauss_equation():
    """Phi for the non-trivial exponent is x^(1-c) 2F1(a+1-c, b+1-c; 2-c; x)."""
    a, b, c = 0.31, 0.57, 0.83
    P = Params.from_arrays([a, b], [[c], [1.0]])
    x = 0.1 + 0.05j
    got = theta_derivatives(P, [x], (1,), [(0,)])[0]
    want = x ** (1 - c) * hyp2f1(a + 1 - c, b + 1 - c, 2 - c, x)
    assert abs(got - want) < 1e-13


def test_coefficients_ratio():
    a, B = [0.3, 0.5], [[0.7, 1.1], [1.0, 1.0]]
    c = series_coefficients(a, B, 6)
    n = (2, 3)
    ratio = c[3, 3] / c[2, 3]
    expected = (0.3 + 5) * (0.5 + 5) / ((0.7 + 2) * (1 + 2))
    assert ratio == pytest.approx(expected, rel=1e-14)
    assert c[n] != 0 and c[6, 1] == 0  # beyond total degree 6


def test_region_check():
    P = generic_params(2, 2)
    with pytest.raises(ValueError):
        eval_series(P, [0.3, 0.3])


def test_divergence_warning_near_boundary():
    # terms grow like n^(a1 + a2 - c - 1) near x = 1
    P = Params.from_arrays([2.3, 2.5], [[0.83], [1.0]])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        eval_series(P, [0.999], N=12)
    assert rec


@pytest.mark.parametrize("p,m", [(2, 1), (3, 1), (2, 2), (3, 2), (2, 3)])
def test_frame_rows_match_theta_oracle(p, m):
    P = generic_params(p, m, 1)
    x = np.array([0.02 + 0.01j, 0.015 - 0.005j, 0.01 + 0.004j][:m])
    Js, alphas = index_maps(p, m)
    W = frame_matrix(P, x).W
    for i, J in enumerate(Js):
        t = theta_derivatives(P, x, J, alphas)
        assert np.max(np.abs(t - W[i])) < 1e-13 * np.max(np.abs(W[i]))


@given(st.integers(0, 2**31 - 1))
def test_equilibrate_reconstructs(seed):
    rng = np.random.default_rng(seed)
    V = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) * np.exp(rng.uniform(-8, 8, 4))[:, None]
    r, c, U = equilibrate(V)
    assert np.allclose(r[:, None] * U * c[None, :], V, rtol=1e-13, atol=0)
    assert np.allclose(np.linalg.norm(U, axis=0), 1)


def test_frame_is_invertible_at_base_point():
    for p, m in [(2, 2), (3, 2), (2, 3)]:
        P = generic_params(p, m)
        fr = frame_matrix(P, base_point(p, m))
        assert fr.cond_scaled < 1e6
        assert fr.truncation < 1e-15


def test_ill_conditioned_frame_is_reported():
    P = Params.from_arrays([0.3, 0.5], [[1.0 + 1e-9], [1.0]])
    with pytest.raises(IllConditioned):
        frame_matrix(P, [0.01])
