import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fcmono.params import (
    INDEX_CAP,
    Params,
    ParamsError,
    ToleranceProfile,
    dist_to_integers,
    generic_params,
    index_maps,
    position,
    validate_params,
)

pm = st.tuples(st.integers(2, 5), st.integers(1, 3))


@given(pm)
def test_index_positions_round_trip(pm):
    p, m = pm
    Js, alphas = index_maps(p, m)
    assert len(Js) == len(alphas) == p**m
    assert [position(J, p, offset=1) for J in Js] == list(range(p**m))
    assert [position(a, p) for a in alphas] == list(range(p**m))
    assert Js == tuple(sorted(Js))


def test_index_cap():
    with pytest.raises(OverflowError):
        index_maps(2, 13)
    assert len(index_maps(2, 12)[0]) == INDEX_CAP


@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_tau_monotone(t1, t2):
    """A failure at a small threshold persists at every larger threshold."""
    lo, hi = sorted((t1, t2))
    if lo == 0:
        return
    P = Params.from_arrays([0.3, 0.45], [[1.07], [1.0]])
    small = {f["check"] for f in validate_params(P, ToleranceProfile(tau_gen=lo)).failures}
    large = {f["check"] for f in validate_params(P, ToleranceProfile(tau_gen=hi)).failures}
    assert small <= large


def test_validation_examples():
    assert validate_params(generic_params(2, 2)).ok
    rep = validate_params(Params.from_arrays([0.3, 0.4], [[2.0], [1.0]]))
    assert not rep.ok and rep.failures[0]["check"] == "b_not_integer"
    rep = validate_params(Params.from_arrays([0.3, 0.4, 0.5], [[0.5], [1.52], [1.0]]))
    assert any(f["check"] == "column_exponents_distinct" for f in rep.failures)


def test_last_row_must_be_one():
    with pytest.raises(ParamsError):
        Params.from_arrays([0.3, 0.4], [[0.5], [0.9]])


@given(st.integers(0, 1000), pm.filter(lambda t: t[0] ** t[1] <= 64))
def test_generic_params_are_standard(seed, pm):
    p, m = pm
    P = generic_params(p, m, seed)
    assert validate_params(P).ok
    B = P.B_array
    for k in range(m):
        col = B[:-1, k].real
        assert np.all((0.6 <= col) & (col <= 1.4))
        for i in range(p - 1):
            assert 0.1 <= dist_to_integers(col[i]) <= 0.5
            for j in range(i):
                assert dist_to_integers(col[i] - col[j]) >= 0.1


def test_json_round_trip(tmp_path):
    P = generic_params(3, 2, 5, complex_a=True)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(P.to_json()))
    assert Params.load(path) == P


def test_tolerance_profile_rejects_bad_values():
    with pytest.raises(ValueError):
        ToleranceProfile(ode_tol=-1)
    with pytest.raises(ValueError):
        ToleranceProfile(ode_tol=1e-5, residual_tol=1e-6)
