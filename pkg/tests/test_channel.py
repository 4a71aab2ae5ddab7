import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkw import reference as ref
from qkw.channel import (BASIS, apply_channel, as_density, build_channel, class_structure,
                         decay_certificate, decompose, dyad_image, iterate, population_series,
                         power_stationary, sample_trajectory, steady_state_batch, steady_states,
                         total_variation, transition_matrix, TransitionChannel)
from qkw.strategies import classical_profile, coalition_profile, quantum_profile

unit = st.floats(0, 1)
QUARTER = np.pi / 4


def test_basis_helpers():
    assert BASIS.names()[0] == "211"
    assert BASIS.index("331") == 6
    assert BASIS.index((3, 3, 2)) == 7
    assert BASIS.hamming(BASIS.index("311"), BASIS.index("211")) == 1
    with pytest.raises(ValueError):
        BASIS.index("111")


@settings(max_examples=20, deadline=None)
@given(unit, unit, unit)
def test_classical_matrix_matches_closed_form(s_a, s_b, s_c):
    t = transition_matrix(classical_profile(s_a, s_b, s_c))
    assert np.allclose(t, ref.classical_matrix(s_a, s_b, s_c), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(unit, unit)
def test_quantum_matrix_matches_closed_form_outside_column_312(q_a, q_b):
    t = transition_matrix(quantum_profile(q_a, q_b, 0.0, QUARTER))
    expected = ref.quantum_matrix(q_a, q_b)
    keep = [k for k in range(8) if BASIS.names()[k] != "312"]
    assert np.allclose(t[:, keep], expected[:, keep], atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(unit, unit)
def test_quantum_column_312_follows_alice_acceptance(q_a, q_b):
    # meeting Charlie, Alice swaps 3 for 2 only in the anticommuting sector (weight q_A)
    col = transition_matrix(quantum_profile(q_a, q_b, 0.0, QUARTER))[:, BASIS.index("312")]
    expected = np.zeros(8)
    expected[BASIS.index("211")] = 1 / 3
    expected[BASIS.index("331")] = 1 / 3
    expected[BASIS.index("232")] = q_a / 3
    expected[BASIS.index("312")] = (1 - q_a) / 3
    assert np.allclose(col, expected, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(unit, unit, unit, unit)
def test_coalition_matrix_is_mixture(p, q_a, q_b, q_c):
    t = transition_matrix(coalition_profile(p, q_a, q_b, q_c))
    assert np.allclose(t, ref.coalition_matrix(p, q_a, q_b, q_c), atol=1e-10)


def test_batched_matrix_equals_individual(rng):
    s = rng.random((4, 3))
    batch = transition_matrix(classical_profile(s[:, 0], s[:, 1], s[:, 2]))
    for k in range(4):
        assert np.allclose(batch[k], transition_matrix(classical_profile(*s[k])))


def test_channel_rejects_non_stochastic():
    with pytest.raises(ValueError):
        TransitionChannel(np.eye(8) * 0.5, classical_profile(1, 1, 1))


@pytest.mark.parametrize("s, expected", [
    ((1, 1, 1), ref.FUNDAMENTAL_STEADY),
    ((0, 1, 1), ref.SPECULATIVE_STEADY),
    ((1, 1, 0), ref.ALTERNATIVE_STEADY),
])
def test_classical_steady_states(s, expected):
    dec = steady_states(build_channel(classical_profile(*s)), BASIS.point("231"))
    assert np.allclose(dec.limit, expected, atol=1e-10)
    assert dec.residual < 1e-12


@settings(max_examples=20, deadline=None)
@given(unit, st.floats(0.01, 1))
def test_quantum_fixed_point(q_a, q_b):
    dec = decompose(transition_matrix(quantum_profile(q_a, q_b, 0.0, QUARTER)), BASIS.point("231"))
    assert np.allclose(dec.limit, ref.quantum_fixed_point(q_a, q_b), atol=1e-10)


def test_multiple_closed_classes_weighted_by_start():
    t = np.eye(8)
    dec = decompose(t, np.full(8, 1 / 8))
    assert dec.multiplicity == 8
    assert np.allclose(dec.limit, np.full(8, 1 / 8))


def test_class_structure_on_chain():
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 1] = adj[1, 2] = adj[2, 1] = True
    comps, closed = class_structure(adj)
    assert closed == [(1, 2)]
    assert (0,) in comps


def test_power_iteration_agrees_with_decomposition(rng):
    for _ in range(5):
        t = transition_matrix(classical_profile(*rng.random(3)))
        p0 = BASIS.point("231")
        assert np.allclose(power_stationary(t, p0), decompose(t, p0).limit, atol=1e-9)


def test_batched_steady_states_agree(rng):
    s = rng.random((30, 3))
    s[:5] = np.round(s[:5])  # include boundary patterns
    t = transition_matrix(classical_profile(s[:, 0], s[:, 1], s[:, 2]))
    limits, counts = steady_state_batch(t, BASIS.point("231"))
    for k in range(30):
        dec = decompose(t[k], BASIS.point("231"))
        assert np.allclose(limits[k], dec.limit, atol=1e-10)
        assert counts[k] == dec.multiplicity


def test_single_difference_dyad_decays():
    ch = build_channel(classical_profile(0.3, 0.6, 0.9))
    img = dyad_image(ch, BASIS.index("311"), BASIS.index("211"))
    expected = np.zeros((8, 8))
    expected[BASIS.index("311"), BASIS.index("211")] = 1 / 3
    assert np.allclose(img, expected)


def test_decay_certificate(rng):
    for profile in (classical_profile(*rng.random(3)), quantum_profile(*rng.random(3), theta=QUARTER),
                    coalition_profile(*rng.random(4))):
        report = decay_certificate(build_channel(profile))
        assert report.contracts


def test_iteration_removes_coherences(rng):
    ch = build_channel(quantum_profile(*rng.random(3), theta=QUARTER))
    m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = m @ m.conj().T
    rho /= np.trace(rho)
    out = iterate(ch, rho, 100)
    assert np.max(np.abs(out - np.diag(np.diag(out)))) < 1e-8
    assert np.trace(out) == pytest.approx(1)
    assert np.allclose(iterate(ch, rho, -1), 0)
    with pytest.raises(ValueError):
        iterate(ch, rho, -2)


def test_population_block_of_dyad_matrix(rng):
    ch = build_channel(classical_profile(*rng.random(3)))
    p = rng.random(8)
    p /= p.sum()
    assert np.allclose(np.diag(apply_channel(ch, p)).real, ch.t8 @ p)
    assert np.allclose(population_series(ch.t8, p, 2)[2], ch.t8 @ ch.t8 @ p)
    with pytest.raises(ValueError):
        apply_channel(ch, 2 * p)


def test_as_density_shapes():
    assert as_density(np.ones(8) / 8).shape == (8, 8)
    with pytest.raises(ValueError):
        as_density(np.ones(3))


def test_trajectory_is_deterministic_per_seed():
    a = sample_trajectory(classical_profile(0, 1, 1), "231", 500, 3)
    b = sample_trajectory(classical_profile(0, 1, 1), "231", 500, 3)
    c = sample_trajectory(classical_profile(0, 1, 1), "231", 500, 4)
    assert np.array_equal(a.goods, b.goods)
    assert not np.array_equal(a.goods, c.goods)
    assert a.records()[0]["goods"] == "231"


def test_monte_carlo_matches_steady_state():
    traj = sample_trajectory(classical_profile(0, 1, 1), "231", 100_000, 11)
    assert total_variation(traj.occupation(), ref.SPECULATIVE_STEADY) < 0.01


def test_sampled_transitions_match_matrix():
    profile = quantum_profile(0.5, 0.7, 0.0, QUARTER)
    traj = sample_trajectory(profile, "231", 60_000, 5)
    counts = traj.transition_counts()
    t = transition_matrix(profile)
    col = BASIS.index("211")
    assert total_variation(counts[:, col] / counts[:, col].sum(), t[:, col]) < 0.02


def test_coalition_trajectory_runs():
    traj = sample_trajectory(coalition_profile(0.5, 0.2, 1, 0.3), "231", 200, 0)
    assert traj.rounds == 200
    with pytest.raises(ValueError):
        sample_trajectory(coalition_profile(0.5, 0.2, 1, 0.3), "231", 0, 0)
