import numpy as np
import pytest

from qkw import reference as ref
from qkw.economy import EconomyParams
from qkw.equilibrium import (StrategyPoint, argmax_set, best_response, classify, coalition_analysis,
                             equilibria, equilibria_from_payoffs, flow_graph, payoff_gradient,
                             phase_diagram, refine, steady_point, unit_grid, Equilibrium)

QUARTER = np.pi / 4
CORNER = EconomyParams.from_coordinates(0.4, 0.4)
MIXED = EconomyParams.from_coordinates(0.19, 0.23)


def test_unit_grid():
    g = unit_grid(0.25)
    assert np.allclose(g, [0, 0.25, 0.5, 0.75, 1])


def test_strategy_point_validation():
    assert StrategyPoint("classical", {"s_A": 0.5}).values() == (0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        StrategyPoint("classical", {"q_A": 0.5})
    with pytest.raises(ValueError):
        StrategyPoint("quantum", {"q_A": 1.5})
    with pytest.raises(ValueError):
        StrategyPoint("nope", {})


def test_argmax_set_keeps_ties():
    assert list(argmax_set(np.array([1.0, 3.0, 3.0, 2.0]))) == [1, 2]


def test_equilibria_of_synthetic_games():
    grid = np.linspace(0, 1, 11)
    a, b = np.meshgrid(grid, grid, indexing="ij")
    # each player wants to match the other's coordinate: continuum on the diagonal
    found, _, _ = equilibria_from_payoffs(-(a - b) ** 2, -(a - b) ** 2, grid)
    assert all(abs(e.point[0] - e.point[1]) < 1e-12 for e in found if e.kind == "grid")
    # dominant strategies: both prefer 1
    found, _, _ = equilibria_from_payoffs(a, b, grid)
    assert [e.point for e in found] == [(1.0, 1.0)]
    # matching pennies has a mixed crossing in the interior
    found, _, _ = equilibria_from_payoffs((2 * a - 1) * (2 * b - 1), -(2 * a - 1) * (2 * b - 1), grid)
    assert [(e.point, e.kind) for e in found] == [((0.5, 0.5), "grid")]
    # off the grid it is reported as a crossing bracketed by grid cells
    even = np.linspace(0, 1, 10)
    a, b = np.meshgrid(even, even, indexing="ij")
    found, _, _ = equilibria_from_payoffs((2 * a - 1) * (2 * b - 1), -(2 * a - 1) * (2 * b - 1), even)
    assert len(found) == 1 and found[0].kind == "crossing"
    assert found[0].point == pytest.approx((0.5, 0.5), abs=0.12)
    (lo, hi), _ = found[0].cell
    assert lo <= found[0].point[0] <= hi


def test_classify():
    cell = ((1.0, 1.0), (1.0, 1.0))
    assert classify([Equilibrium((1.0, 1.0), "grid", cell)]) == "FUND"
    assert classify([Equilibrium((0.0, 1.0), "grid", cell)]) == "SPEC"
    assert classify([Equilibrium((1.0, 0.0), "grid", cell)]) == "ALT"
    assert classify([Equilibrium((0.3, 0.9), "crossing", cell)]) == "MIXED"
    assert classify([]) == "NONE"
    assert classify([Equilibrium((1.0, 1.0), "grid", cell)] * 2) == "MULTIPLE"


def test_fundamental_equilibrium_at_corner():
    assert equilibria("classical", CORNER).points() == [(1.0, 1.0)]


def test_quantum_equilibrium_at_corner():
    assert equilibria("quantum", CORNER, theta=QUARTER).points() == [(1.0, 1.0)]


def test_three_equilibria_near_boundary():
    found = equilibria("classical", MIXED)
    pts = found.points()
    assert len(pts) == 3
    assert pts[0] == (0.0, 1.0)
    assert pts[1] == pytest.approx((0.055, 0.975), abs=0.01)
    assert pts[2] == pytest.approx((0.7233, 0.9233), abs=0.01)


def test_equilibria_survive_finer_grid():
    for eq in equilibria("classical", MIXED).equilibria:
        local = refine(eq, "classical", MIXED)
        assert any(max(abs(a - b) for a, b in zip(e.point, eq.point)) <= 0.011 for e in local)


def test_alice_switch_point():
    # Alice keeps s_A = 1 up to s_C = 0.89 and switches just below 0.90
    keep = best_response("A", "classical", {"s_A": 1.0, "s_B": 1.0, "s_C": 0.89}, MIXED)
    switch = best_response("A", "classical", {"s_A": 1.0, "s_B": 1.0, "s_C": 0.90}, MIXED)
    assert 1.0 in keep.best
    assert 1.0 not in switch.best
    assert switch.best[0] == pytest.approx(0.93)


@pytest.mark.parametrize("q_a, q_b", [(0.2, 0.3), (0.5, 0.9), (0.8, 0.1)])
def test_gradients_closed_form_and_difference(q_a, q_b):
    params = EconomyParams()
    for agent in "AB":
        g = payoff_gradient(agent, {"q_A": q_a, "q_B": q_b, "q_C": 0.0}, params)
        cf = ref.quantum_gradient(agent, q_a, q_b, params.c, params.u, params.delta)
        assert g.closed_form == pytest.approx(cf)
        assert g.finite_difference == pytest.approx(cf, rel=1e-5)
        assert cf > 0


def test_alice_gradient_vanishes_without_bob():
    g = payoff_gradient("A", {"q_A": 0.5, "q_B": 0.0, "q_C": 0.0}, EconomyParams())
    assert g.closed_form == 0
    assert abs(g.finite_difference) < 1e-9


@pytest.fixture(scope="module")
def diagram():
    return phase_diagram(resolution=50)


def test_phase_diagram_anchor_cells(diagram):
    assert diagram.cell_at(0.4, 0.4).classification == "FUND"
    assert diagram.cell_at(0.19, 0.23).classification == "MULTIPLE"


def test_phase_diagram_region_types(diagram):
    assert {"FUND", "SPEC", "ALT", "MIXED"} <= diagram.region_types()


def test_phase_diagram_marks_invalid_costs(diagram):
    for cell in diagram.cells:
        if cell.x + cell.y >= (100 - 1) / 90:
            assert cell.classification == "INVALID"


def test_phase_diagram_jitter_stability():
    for x, y in ((0.41, 0.41), (0.19, 0.23)):
        a = phase_diagram((x - 0.01, x + 0.01), (y - 0.01, y + 0.01), resolution=1)
        b = phase_diagram((x - 0.01 + 1e-6, x + 0.01 + 1e-6), (y - 0.01, y + 0.01), resolution=1)
        assert a.cells[0].classification == b.cells[0].classification


def test_phase_diagram_rejects_bad_range():
    with pytest.raises(ValueError):
        phase_diagram((0.5, 0.5), (0, 1))
    with pytest.raises(ValueError):
        phase_diagram(resolution=0)


def test_phase_diagram_deterministic():
    a = phase_diagram((0.3, 0.5), (0.3, 0.5), resolution=3)
    b = phase_diagram((0.3, 0.5), (0.3, 0.5), resolution=3)
    assert [c.to_record() for c in a.cells] == [c.to_record() for c in b.cells]


@pytest.fixture(scope="module")
def coalition_corner():
    return coalition_analysis(CORNER)


def test_coalition_choices(coalition_corner):
    s0, s1 = coalition_corner.slice(0.0), coalition_corner.slice(1.0)
    assert s0.joint_argmax and all(p == 1 and qb == 1 for p, qb, _ in s0.joint_argmax)
    assert s1.joint_argmax and all(p == 0 and qc == 1 for p, _, qc in s1.joint_argmax)


def test_only_bob_and_charlie_gain():
    report = coalition_analysis(EconomyParams())
    assert np.allclose(report.baseline, [17.25, 17.5, 21.5])
    for gain in report.coalition_gain.values():
        assert min(gain) >= 0
    assert report.pair_improvements == {"AB": [], "AC": []}


@pytest.mark.parametrize("family, coords, media", [
    ("classical", {"s_A": 1, "s_B": 1, "s_C": 1}, {1}),
    ("classical", {"s_A": 0, "s_B": 1, "s_C": 1}, {1, 3}),
    ("classical", {"s_A": 1, "s_B": 1, "s_C": 0}, {1, 2}),
    ("quantum", {"q_A": 1, "q_B": 1, "q_C": 0}, {1, 3}),
])
def test_media_of_exchange(family, coords, media):
    ch, dec = steady_point(family, coords)
    assert flow_graph(dec.limit, ch.profile).media == media


def test_quantum_flow_sends_three_from_bob_to_alice():
    ch, dec = steady_point("quantum", {"q_A": 1, "q_B": 1, "q_C": 0})
    assert 3 in flow_graph(dec.limit, ch.profile).goods_between("B", "A")
