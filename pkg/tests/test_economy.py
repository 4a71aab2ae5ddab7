import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkw import reference as ref
from qkw.channel import BASIS, build_channel, steady_states
from qkw.economy import (EconomyParams, consumption_vectors, cost_vector, finite_horizon_profit,
                         holdings_matrix, marginal_holdings, payoff_report, steady_payoff)
from qkw.strategies import classical_profile, coalition_profile, quantum_profile

unit = st.floats(0, 1)
QUARTER = np.pi / 4


def test_default_params():
    p = EconomyParams()
    assert p.c == (1.0, 4.0, 9.0)
    assert p.cost(3) == 9.0


@pytest.mark.parametrize("kwargs", [
    {"delta": 1.0}, {"delta": 0.0}, {"c": (4, 1, 9)}, {"c": (1, 4)}, {"u": 5.0},
])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        EconomyParams(**kwargs)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_cost_coordinates_roundtrip(x, y):
    p = EconomyParams.from_coordinates(x, y)
    assert p.x == pytest.approx(x)
    assert p.y == pytest.approx(y)
    assert p.c[0] == 1.0


def test_holdings_and_costs():
    h = holdings_matrix("A")
    assert h.sum() == 8
    assert h[1, BASIS.index("211")] == 1
    v = cost_vector("C", EconomyParams())
    assert v[BASIS.index("212")] == 4.0


@settings(max_examples=20, deadline=None)
@given(unit, unit, unit)
def test_classical_consumption_matches_closed_form(s_a, s_b, s_c):
    w = consumption_vectors(classical_profile(s_a, s_b, s_c))
    assert np.allclose(w, ref.classical_consumption(s_a, s_b, s_c), atol=1e-12)


def test_coalition_consumption_is_mixture(rng):
    p, qa, qb, qc = rng.random(4)
    cp = coalition_profile(p, qa, qb, qc)
    w = consumption_vectors(cp)
    assert np.allclose(w, p * consumption_vectors(cp.first) + (1 - p) * consumption_vectors(cp.second))


@settings(max_examples=20, deadline=None)
@given(unit, st.floats(0.01, 1))
def test_quantum_payoffs_match_closed_form(q_a, q_b):
    params = EconomyParams()
    ch = build_channel(quantum_profile(q_a, q_b, 0.0, QUARTER), dyads=False)
    rho = steady_states(ch, BASIS.point("231")).limit
    got = [steady_payoff(a, rho, params, ch) for a in "ABC"]
    assert np.allclose(got, ref.quantum_payoffs(q_a, q_b, params.c, params.u, params.delta), atol=1e-9)


def test_discounted_profit_from_steady_state_converges():
    params = EconomyParams()
    ch = build_channel(classical_profile(0, 1, 1), dyads=False)
    rho = ref.SPECULATIVE_STEADY
    for agent in "ABC":
        pi = finite_horizon_profit(agent, ch, rho, 400, params)
        assert (1 - params.delta) * pi[-1] == pytest.approx(steady_payoff(agent, rho, params, ch), abs=1e-9)


def test_steady_payoff_rejects_transient_state():
    ch = build_channel(classical_profile(1, 1, 1), dyads=False)
    with pytest.raises(ValueError):
        steady_payoff("A", BASIS.point("332"), EconomyParams(), ch)


def test_profit_requires_normalised_start():
    ch = build_channel(classical_profile(1, 1, 1), dyads=False)
    with pytest.raises(ValueError):
        finite_horizon_profit("A", ch, np.ones(8), 3, EconomyParams())
    with pytest.raises(ValueError):
        finite_horizon_profit("A", ch, BASIS.point("231"), -1, EconomyParams())


def test_speculative_holdings():
    assert np.allclose(marginal_holdings(ref.SPECULATIVE_STEADY), ref.SPECULATIVE_HOLDINGS)


def test_payoff_report_fields():
    ch = build_channel(quantum_profile(1, 1, 0, QUARTER), dyads=False)
    rho = steady_states(ch, BASIS.point("231")).limit
    rep = payoff_report(ch, rho, BASIS.point("231"), EconomyParams(), horizon=10)
    assert set(rep.values) == {"A", "B", "C"}
    assert len(rep.series["A"]) == 11
    assert rep.values["A"] == pytest.approx(17.25)
