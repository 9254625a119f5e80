import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import embed
from quditlab.core import CapacityError, StateVector, ValidationError
from quditlab.decoherence import (
    TRANSMON,
    NoiseParams,
    RateSet,
    decay_csv,
    derive_rates,
    evolve_fidelity,
    fidelity_slope,
    local_operators,
    numerical_slope,
    trace_deviation,
)
from quditlab.decomposer import build_encoder
from quditlab.simulator import run


def encoded(topology):
    return run(StateVector.uniform_plus((3,) * 4), build_encoder(topology, 4).circuit)


def test_derive_rates_total_and_pure():
    total = derive_rates(TRANSMON, "total")
    assert total.relax == {1: 0.1, 2: pytest.approx(1 / 3.7)}
    assert total.dephase[(0, 1)] == pytest.approx(1 / 3.7)
    pure = derive_rates(TRANSMON, "pure")
    assert 1 / pure.dephase[(0, 1)] == pytest.approx(1 / (1 / 3.7 - 1 / 20))
    assert pure.derived["T_phi_01"] == pytest.approx(1 / (1 / 3.7 - 1 / 20))


def test_relaxation_limited_coherence_has_no_pure_dephasing():
    params = NoiseParams(kappa01=0.1, kappa12=0.2, T2_01=20.0, T2star_12=10.0)
    assert derive_rates(params, "pure").dephase == {(0, 1): 0.0, (1, 2): 0.0}


def test_inconsistent_parameters_rejected():
    with pytest.raises(ValidationError):
        derive_rates(NoiseParams(0.1, 0.2, 30.0, 1.0), "pure")
    with pytest.raises(ValidationError):
        NoiseParams(0.0, 0.2, 3.0, 1.0)
    with pytest.raises(ValidationError):
        derive_rates(TRANSMON, "partial")
    with pytest.raises(ValidationError):
        RateSet({0: 0.1}, {})


def test_params_json_round_trip():
    assert NoiseParams.from_json(TRANSMON.to_json()) == TRANSMON
    text = '{"kappa01":0.1,"kappa12":0.27027,"T2_01":3.7,"T2star_12":1.2}'
    assert NoiseParams.from_json(text).kappa12 == 0.27027
    with pytest.raises(ValidationError):
        NoiseParams.from_json('{"kappa01": 0.1}')


def test_vacuum_is_stationary():
    assert fidelity_slope(StateVector.basis((3,) * 3, (0, 0, 0)), derive_rates(TRANSMON)) == 0


def test_single_qutrit_relaxation_is_exponential():
    rates = RateSet({1: 0.1, 2: 0.3}, {})
    series = evolve_fidelity(StateVector.basis((3,), (1,)), rates, [0, 0.5, 2, 7])
    assert series[0] == (0, pytest.approx(1))
    for t, f in series:
        assert f == pytest.approx(math.exp(-0.1 * t), abs=1e-6)


def test_analytic_slope_matches_integration_and_dense_formula():
    rates = derive_rates(TRANSMON)
    for topology in ("type-a-linear", "type-b-linear"):
        psi = encoded(topology)
        slope = fidelity_slope(psi, rates)
        assert numerical_slope(psi, rates) == pytest.approx(slope, rel=0.01)
        vec = psi.to_dense()
        dense = 0.0
        for site in range(4):
            for op in local_operators(3, rates):
                big = embed(op, site, psi.dims)
                dense += np.linalg.norm(big @ vec) ** 2 - abs(vec.conj() @ big @ vec) ** 2
        assert dense == pytest.approx(slope, rel=1e-12)


def test_fidelity_series_is_monotone_and_trace_preserving():
    rates = derive_rates(TRANSMON)
    psi = encoded("type-a-linear")
    grid = np.linspace(0, 2, 11)
    fids = [f for _, f in evolve_fidelity(psi, rates, grid)]
    assert fids[0] == pytest.approx(1, abs=1e-12)
    assert all(b <= a + 1e-12 for a, b in zip(fids, fids[1:]))
    assert trace_deviation(psi, rates, grid) < 1e-8


def test_early_time_fit_reproduces_slope():
    rates = derive_rates(TRANSMON)
    psi = encoded("type-b-linear")
    grid = np.linspace(0, 0.004, 5)
    fids = np.array([f for _, f in evolve_fidelity(psi, rates, grid, step=1e-4)])
    fitted = -np.polyfit(grid, fids, 1)[0]
    assert fitted == pytest.approx(fidelity_slope(psi, rates), rel=0.01)


def test_evolve_capacity():
    with pytest.raises(CapacityError):
        evolve_fidelity(StateVector.basis((3,) * 7, (0,) * 7), derive_rates(TRANSMON), [0, 1])


def random_site_state(draw):
    re = draw(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
    im = draw(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
    v = np.array(re) + 1j * np.array(im)
    if np.linalg.norm(v) < 1e-3:
        v = np.array([1, 0, 0], dtype=complex)
    return v / np.linalg.norm(v)


@settings(max_examples=40, deadline=None)
@given(st.data(), st.integers(1, 4))
def test_slope_is_additive_over_product_states(data, n):
    rates = derive_rates(TRANSMON)
    sites = [random_site_state(data.draw) for _ in range(n)]
    whole = fidelity_slope(StateVector.product((3,) * n, sites), rates)
    parts = sum(fidelity_slope(StateVector.product((3,), [v]), rates) for v in sites)
    assert whole == pytest.approx(parts, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["relax1", "relax2", "deph01", "deph12"]), st.floats(0, 2), st.sampled_from(["type-a-linear", "type-b-linear"]))
def test_raising_a_rate_never_lowers_the_slope(which, bump, topology):
    base = derive_rates(TRANSMON)
    relax, deph = dict(base.relax), dict(base.dephase)
    if which.startswith("relax"):
        relax[int(which[-1])] += bump
    else:
        key = (0, 1) if which == "deph01" else (1, 2)
        deph[key] += bump
    psi = encoded(topology)
    assert fidelity_slope(psi, RateSet(relax, deph)) >= fidelity_slope(psi, base) - 1e-12


def test_decay_csv_format():
    text = decay_csv([(0.0, 1.0), (0.1, 0.9876543210987654)])
    assert text.splitlines() == ["t_us,fidelity", "0,1", "0.1,0.987654321099"]
