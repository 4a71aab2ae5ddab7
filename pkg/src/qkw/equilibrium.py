"""Best responses, equilibria, phase diagrams and coalition analysis on strategy grids."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .channel import BASIS, build_channel, steady_state_batch, steady_states, transition_matrix
from .circuit import round_branches, traded
from .economy import EconomyParams, consumption_vectors, payoffs_from_summary, steady_summary
from .strategies import AGENTS, CONSUMES, PRODUCES, build_strategy

PAYOFF_TOL = 1e-8
ARGMAX_TOL = 1e-10

COORDINATES = {
    "classical": ("s_A", "s_B", "s_C"),
    "quantum": ("q_A", "q_B", "q_C"),
    "coalition": ("p", "q_A'", "q_B", "q_C'"),
}
OWN_COORDINATE = {
    "classical": {"A": "s_A", "B": "s_B", "C": "s_C"},
    "quantum": {"A": "q_A", "B": "q_B", "C": "q_C"},
}
DEFAULT_FIXED = {
    "classical": {"s_A": 1.0, "s_B": 1.0, "s_C": 1.0},
    "quantum": {"q_A": 1.0, "q_B": 1.0, "q_C": 0.0},
    "coalition": {"p": 1.0, "q_A'": 0.0, "q_B": 1.0, "q_C'": 0.0},
}
DEFAULT_PLAYERS = {"classical": ("A", "C"), "quantum": ("A", "B")}


def unit_grid(step: float = 0.01) -> np.ndarray:
    n = int(round(1 / step)) + 1
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True)
class StrategyPoint:
    family: str
    coords: Mapping[str, float]
    theta: float | None = None

    def __post_init__(self):
        names = COORDINATES.get(self.family)
        if names is None:
            raise ValueError(f"unknown family {self.family!r}")
        full = dict(DEFAULT_FIXED[self.family])
        for k, v in self.coords.items():
            if k not in names:
                raise ValueError(f"{self.family} family has no coordinate {k!r}")
            if not 0 <= float(v) <= 1:
                raise ValueError(f"coordinate {k} must lie in [0, 1]")
            full[k] = float(v)
        object.__setattr__(self, "coords", full)

    def profile(self):
        return make_profile(self.family, self.coords, self.theta)

    def values(self) -> tuple[float, ...]:
        return tuple(self.coords[k] for k in COORDINATES[self.family])


def make_profile(family: str, coords: Mapping[str, object], theta: float | None = None):
    params = [coords[k] for k in COORDINATES[family]]
    return build_strategy(family, *params, theta=theta)


@dataclass(frozen=True)
class SteadyGrid:
    """Steady-state summaries over a product grid, reusable for any cost point."""

    family: str
    axes: tuple[tuple[str, np.ndarray], ...]
    fixed: Mapping[str, float]
    theta: float | None
    holdings: np.ndarray  # grid shape + (3 agents, 3 goods)
    consumption: np.ndarray  # grid shape + (3,)
    multiplicity: np.ndarray  # grid shape
    limits: np.ndarray  # grid shape + (8,)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(g) for _, g in self.axes)

    def payoffs(self, params: EconomyParams) -> np.ndarray:
        return payoffs_from_summary(self.holdings, self.consumption, params)


def _coalition_tables(coords, size, theta):
    """T8 and w for the p-mixture, evaluating each joint profile once per distinct parameter pair."""
    def column(name):
        return np.broadcast_to(np.asarray(coords[name], dtype=float), (size,))
    p = column("p")
    parts = []
    for which, other in (("first", "q_B"), ("second", "q_C'")):
        pairs = np.stack([column("q_A'"), column(other)], axis=1)
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        args = {"q_A'": uniq[:, 0], "q_B": 0.0, "q_C'": 0.0, "p": 1.0}
        args[other] = uniq[:, 1]
        if len(uniq) == 1:
            args = {k: (v[0] if np.ndim(v) else v) for k, v in args.items()}
        prof = getattr(make_profile("coalition", args, theta), which)
        t8 = transition_matrix(prof).reshape(-1, 8, 8)[inverse.ravel()]
        w = consumption_vectors(prof).reshape(-1, 3, 8)[inverse.ravel()]
        parts.append((t8, w))
    (t1, w1), (t2, w2) = parts
    mix = p[:, None, None]
    return mix * t1 + (1 - mix) * t2, mix * w1 + (1 - mix) * w2


@lru_cache(maxsize=32)
def _steady_grid_cached(family, axes, fixed, theta, start) -> SteadyGrid:
    names = [a for a, _ in axes]
    grids = [np.asarray(g) for _, g in axes]
    mesh = np.meshgrid(*grids, indexing="ij")
    shape = mesh[0].shape
    coords: dict[str, object] = dict(fixed)
    for name, m in zip(names, mesh):
        coords[name] = m.ravel()
    size = mesh[0].size
    for k in COORDINATES[family]:
        if k not in coords:
            coords[k] = DEFAULT_FIXED[family][k]
        if size > 1 and np.ndim(coords[k]) == 0:
            coords[k] = np.full(size, float(coords[k]))
    if family == "coalition":
        t8, w = _coalition_tables(coords, size, theta)
    else:
        profile = make_profile(family, coords, theta)
        t8 = transition_matrix(profile).reshape(-1, 8, 8)
        w = consumption_vectors(profile).reshape(-1, 3, 8)
    limits, counts = steady_state_batch(t8, BASIS.point(start))
    holdings, consumption = steady_summary(limits, w)
    return SteadyGrid(family, tuple((n, g) for n, g in zip(names, grids)), dict(fixed), theta,
                      holdings.reshape(shape + (3, 3)), consumption.reshape(shape + (3,)),
                      counts.reshape(shape), limits.reshape(shape + (8,)))


def steady_grid(family: str, axes: Mapping[str, Sequence[float]],
                fixed: Mapping[str, float] | None = None, theta: float | None = None,
                start: str = "231") -> SteadyGrid:
    """Steady states reached from ``start`` at every grid point (cached)."""
    if family not in COORDINATES:
        raise ValueError(f"unknown family {family!r}")
    for name, grid in axes.items():
        if name not in COORDINATES[family]:
            raise ValueError(f"{family} family has no coordinate {name!r}")
        if len(grid) < 1:
            raise ValueError("empty grid")
    fixed = {k: float(v) for k, v in (fixed or {}).items() if k not in axes}
    key_axes = tuple((n, tuple(float(v) for v in g)) for n, g in axes.items())
    key_fixed = tuple(sorted(fixed.items()))
    return _steady_grid_cached(family, key_axes, key_fixed, theta, start)


@dataclass(frozen=True)
class PayoffSurface:
    axes: tuple[tuple[str, np.ndarray], ...]
    values: np.ndarray  # grid shape + (3,) in agent order A, B, C
    multiplicity: np.ndarray

    def agent(self, name: str) -> np.ndarray:
        return self.values[..., AGENTS.index(name)]

    @property
    def ambiguous(self) -> np.ndarray:
        """Cells where the limit depends on the initial distribution."""
        return self.multiplicity > 1


def payoff_surface(family: str, axes: Mapping[str, Sequence[float]], params: EconomyParams,
                   fixed: Mapping[str, float] | None = None, theta: float | None = None,
                   start: str = "231") -> PayoffSurface:
    for name, grid in axes.items():
        if len(grid) < 2:
            raise ValueError(f"axis {name} needs at least two points")
    sg = steady_grid(family, axes, fixed, theta, start)
    return PayoffSurface(sg.axes, sg.payoffs(params), sg.multiplicity)


def argmax_set(values: np.ndarray, tol: float = ARGMAX_TOL) -> np.ndarray:
    return np.flatnonzero(values >= np.max(values) - tol)


@dataclass(frozen=True)
class BestResponseResult:
    agent: str
    coordinate: str
    grid: np.ndarray
    payoffs: np.ndarray
    argmax: np.ndarray

    @property
    def maximum(self) -> float:
        return float(np.max(self.payoffs))

    @property
    def best(self) -> np.ndarray:
        return self.grid[self.argmax]


def best_response(agent: str, family: str, point: Mapping[str, float], params: EconomyParams,
                  grid: Sequence[float] | None = None, theta: float | None = None,
                  start: str = "231", tol: float = ARGMAX_TOL) -> BestResponseResult:
    """Maximise the agent's own payoff over its coordinate with everyone else fixed."""
    coord = OWN_COORDINATE[family][agent]
    grid = unit_grid() if grid is None else np.asarray(grid, dtype=float)
    fixed = {k: v for k, v in point.items() if k != coord}
    sg = steady_grid(family, {coord: grid}, fixed, theta, start)
    payoffs = sg.payoffs(params)[:, AGENTS.index(agent)]
    return BestResponseResult(agent, coord, grid, payoffs, argmax_set(payoffs, tol))


@dataclass(frozen=True)
class Equilibrium:
    """Mutual best response; ``cell`` brackets the point on the grid."""

    point: tuple[float, float]
    kind: str  # "grid" (exact mutual best response) or "crossing" (best-response curves cross)
    cell: tuple[tuple[float, float], tuple[float, float]]

    def to_record(self) -> dict:
        return {"point": list(self.point), "kind": self.kind,
                "cell": [list(self.cell[0]), list(self.cell[1])]}


@dataclass(frozen=True)
class EquilibriumSet:
    family: str
    players: tuple[str, str]
    coordinates: tuple[str, str]
    grid: np.ndarray
    equilibria: list[Equilibrium]
    first_response: np.ndarray  # best coordinate of player 1 against each grid value of player 2
    second_response: np.ndarray  # best coordinate of player 2 against each grid value of player 1

    def points(self) -> list[tuple[float, float]]:
        return [e.point for e in self.equilibria]


def _segment_crossings(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Intersection points of two polylines given as (n, 2) vertex arrays."""
    a0, a1 = p[:-1, None, :], p[1:, None, :]
    b0, b1 = q[None, :-1, :], q[None, 1:, :]
    da, db = a1 - a0, b1 - b0
    denom = da[..., 0] * db[..., 1] - da[..., 1] * db[..., 0]
    diff = b0 - a0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (diff[..., 0] * db[..., 1] - diff[..., 1] * db[..., 0]) / denom
        s = (diff[..., 0] * da[..., 1] - diff[..., 1] * da[..., 0]) / denom
    eps = 1e-12
    hit = (np.abs(denom) > 1e-15) & (t >= -eps) & (t <= 1 + eps) & (s >= -eps) & (s <= 1 + eps)
    i, j = np.nonzero(hit)
    return (a0[i, 0] + t[i, j][:, None] * da[i, 0])


def _bracket(value: float, grid: np.ndarray) -> tuple[float, float]:
    k = int(np.searchsorted(grid, value - 1e-12))
    if k < len(grid) and abs(grid[k] - value) < 1e-12:
        return float(grid[k]), float(grid[k])
    k = min(max(k, 1), len(grid) - 1)
    return float(grid[k - 1]), float(grid[k])


def equilibria_from_payoffs(v1: np.ndarray, v2: np.ndarray, grid: np.ndarray,
                            tol: float = PAYOFF_TOL) -> tuple[list[Equilibrium], np.ndarray, np.ndarray]:
    """Equilibria of a two-player game on ``grid`` x ``grid``.

    ``v1[i, j]`` and ``v2[i, j]`` are the payoffs when player 1 plays grid[i]
    and player 2 plays grid[j]. Exact mutual best responses are reported,
    together with crossings of the two best-response curves that fall between
    grid points (mixed equilibria located to within one grid cell).
    """
    br1 = v1 >= v1.max(axis=0, keepdims=True) - tol
    br2 = v2 >= v2.max(axis=1, keepdims=True) - tol
    step = grid[1] - grid[0]
    found: list[Equilibrium] = []

    def known(pt) -> bool:
        return any(max(abs(pt[0] - e.point[0]), abs(pt[1] - e.point[1])) <= step * (1 + 1e-9)
                   for e in found)

    for i, j in np.argwhere(br1 & br2):
        pt = (float(grid[i]), float(grid[j]))
        if not known(pt):
            found.append(Equilibrium(pt, "grid", ((pt[0], pt[0]), (pt[1], pt[1]))))
    # curves use the largest element of each argmax set
    r1 = np.array([grid[np.flatnonzero(br1[:, j]).max()] for j in range(len(grid))])
    r2 = np.array([grid[np.flatnonzero(br2[i]).max()] for i in range(len(grid))])
    curve1 = np.stack([r1, grid], axis=1)
    curve2 = np.stack([grid, r2], axis=1)
    for x, y in _segment_crossings(curve1, curve2):
        pt = (float(np.clip(x, 0, 1)), float(np.clip(y, 0, 1)))
        if not known(pt):
            found.append(Equilibrium(pt, "crossing", (_bracket(pt[0], grid), _bracket(pt[1], grid))))
    found.sort(key=lambda e: e.point)
    return found, r1, r2


def equilibria(family: str, params: EconomyParams, grid: Sequence[float] | None = None,
               players: tuple[str, str] | None = None, fixed: Mapping[str, float] | None = None,
               theta: float | None = None, start: str = "231",
               tol: float = PAYOFF_TOL) -> EquilibriumSet:
    """Equilibria between two players; the third coordinate stays fixed (s_B = 1 classically)."""
    players = players or DEFAULT_PLAYERS[family]
    grid = unit_grid() if grid is None else np.asarray(grid, dtype=float)
    c1, c2 = (OWN_COORDINATE[family][a] for a in players)
    base = dict(DEFAULT_FIXED[family])
    base.update(fixed or {})
    sg = steady_grid(family, {c1: grid, c2: grid}, {k: v for k, v in base.items()
                                                     if k not in (c1, c2)}, theta, start)
    v = sg.payoffs(params)
    found, r1, r2 = equilibria_from_payoffs(v[..., AGENTS.index(players[0])],
                                            v[..., AGENTS.index(players[1])], grid, tol)
    return EquilibriumSet(family, players, (c1, c2), grid, found, r1, r2)


def refine(eq: Equilibrium, family: str, params: EconomyParams, players: tuple[str, str] | None = None,
           fixed: Mapping[str, float] | None = None, theta: float | None = None,
           start: str = "231", width: float = 0.02, factor: int = 10) -> list[Equilibrium]:
    """Re-solve on a local grid ``factor`` times finer; returns equilibria found there."""
    players = players or DEFAULT_PLAYERS[family]
    lo = [max(0.0, c - width) for c in eq.point]
    hi = [min(1.0, c + width) for c in eq.point]
    n = [int(round((h - l) / (0.01 / factor))) + 1 for l, h in zip(lo, hi)]
    g1, g2 = np.linspace(lo[0], hi[0], n[0]), np.linspace(lo[1], hi[1], n[1])
    c1, c2 = (OWN_COORDINATE[family][a] for a in players)
    base = dict(DEFAULT_FIXED[family])
    base.update(fixed or {})
    sg = steady_grid(family, {c1: g1, c2: g2}, {k: v for k, v in base.items()
                                                 if k not in (c1, c2)}, theta, start)
    v = sg.payoffs(params)
    # the local game is rectangular; reuse the square solver only when the boxes agree
    v1, v2 = v[..., AGENTS.index(players[0])], v[..., AGENTS.index(players[1])]
    br1 = v1 >= v1.max(axis=0, keepdims=True) - PAYOFF_TOL
    br2 = v2 >= v2.max(axis=1, keepdims=True) - PAYOFF_TOL
    r1 = np.array([g1[np.flatnonzero(br1[:, j]).max()] for j in range(len(g2))])
    r2 = np.array([g2[np.flatnonzero(br2[i]).max()] for i in range(len(g1))])
    out = [Equilibrium((float(g1[i]), float(g2[j])), "grid", ((g1[i], g1[i]), (g2[j], g2[j])))
           for i, j in np.argwhere(br1 & br2)]
    for x, y in _segment_crossings(np.stack([r1, g2], 1), np.stack([g1, r2], 1)):
        out.append(Equilibrium((float(x), float(y)), "crossing", (_bracket(x, g1), _bracket(y, g2))))
    return out


@dataclass(frozen=True)
class Gradient:
    agent: str
    coordinate: str
    point: tuple[float, float]
    closed_form: float | None
    finite_difference: float


def closed_form_gradient(agent: str, q_a: float, q_b: float, params: EconomyParams) -> float | None:
    """Analytic dV/dq of the quantum family for Alice (q_A) and Bob (q_B)."""
    c1, c2, c3 = params.c
    du = params.delta * params.u
    denom = (4 * (1 + q_a) + q_b * (3 + q_a)) ** 2
    if agent == "A":
        return ((c3 - c2) * q_b * (4 - q_b) + du * q_b ** 2) / denom
    if agent == "B":
        return ((c3 - c1) * 2 * (1 - q_a) * (1 + q_a) + du * 2 * (1 + q_a) ** 2) / denom
    return None


def payoff_gradient(agent: str, point: Mapping[str, float], params: EconomyParams,
                    step: float = 1e-4, theta: float | None = None,
                    start: str = "231") -> Gradient:
    """Closed form next to a central (one-sided at the boundary) difference of the simulated V."""
    coord = OWN_COORDINATE["quantum"][agent]
    x = float(point[coord])
    lo, hi = max(0.0, x - step), min(1.0, x + step)
    fixed = {k: v for k, v in point.items() if k != coord}
    sg = steady_grid("quantum", {coord: (lo, hi)}, fixed, theta, start)
    v = sg.payoffs(params)[:, AGENTS.index(agent)]
    fd = float((v[1] - v[0]) / (hi - lo))
    q_a = float(point.get("q_A", DEFAULT_FIXED["quantum"]["q_A"]))
    q_b = float(point.get("q_B", DEFAULT_FIXED["quantum"]["q_B"]))
    return Gradient(agent, coord, (q_a, q_b), closed_form_gradient(agent, q_a, q_b, params), fd)


PHASE_CLASSES = ("FUND", "SPEC", "ALT", "MIXED", "MULTIPLE", "NONE", "INVALID")
_PURE = {(1.0, 1.0): "FUND", (0.0, 1.0): "SPEC", (1.0, 0.0): "ALT"}


def classify(found: Sequence[Equilibrium]) -> str:
    if len(found) > 1:
        return "MULTIPLE"
    if not found:
        return "NONE"
    return _PURE.get(tuple(round(c, 12) for c in found[0].point), "MIXED")


@dataclass(frozen=True)
class PhaseCell:
    x: float
    y: float
    classification: str
    equilibria: list[Equilibrium] = field(default_factory=list)

    def to_record(self) -> dict:
        return {"x": self.x, "y": self.y, "class": self.classification,
                "equilibria": [e.to_record() for e in self.equilibria]}


@dataclass(frozen=True)
class PhaseDiagram:
    xs: np.ndarray
    ys: np.ndarray
    cells: list[PhaseCell]

    def grid(self) -> np.ndarray:
        return np.array([c.classification for c in self.cells]).reshape(len(self.xs), len(self.ys))

    def cell_at(self, x: float, y: float) -> PhaseCell:
        hx = (self.xs[1] - self.xs[0]) / 2 if len(self.xs) > 1 else np.inf
        hy = (self.ys[1] - self.ys[0]) / 2 if len(self.ys) > 1 else np.inf
        i = int(np.argmin(np.abs(self.xs - x)))
        j = int(np.argmin(np.abs(self.ys - y)))
        if abs(self.xs[i] - x) > hx + 1e-12 or abs(self.ys[j] - y) > hy + 1e-12:
            raise ValueError("point lies outside the diagram")
        return self.cells[i * len(self.ys) + j]

    def region_types(self) -> set[str]:
        return {c.classification for c in self.cells}


def cell_centres(lo: float, hi: float, resolution: int) -> np.ndarray:
    width = (hi - lo) / resolution
    return lo + width * (np.arange(resolution) + 0.5)


def phase_diagram(x_range: tuple[float, float] = (0.0, 1.0), y_range: tuple[float, float] = (0.0, 1.0),
                  resolution: int = 50, u: float = 100.0, delta: float = 0.9, c1: float = 1.0,
                  grid: Sequence[float] | None = None, start: str = "231") -> PhaseDiagram:
    """Classical equilibria of Alice and Charlie (s_B = 1) at the centre of every cost cell."""
    for lo, hi in (x_range, y_range):
        if not 0 <= lo < hi <= 1:
            raise ValueError("ranges must satisfy 0 <= lo < hi <= 1")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    grid = unit_grid() if grid is None else np.asarray(grid, dtype=float)
    sg = steady_grid("classical", {"s_A": grid, "s_C": grid}, {"s_B": 1.0}, None, start)
    xs, ys = cell_centres(*x_range, resolution), cell_centres(*y_range, resolution)
    cells = []
    for x, y in itertools.product(xs, ys):
        try:
            params = EconomyParams.from_coordinates(x, y, u, delta, c1)
        except ValueError:
            cells.append(PhaseCell(float(x), float(y), "INVALID"))
            continue
        v = sg.payoffs(params)
        found, _, _ = equilibria_from_payoffs(v[..., 0], v[..., 2], grid)
        cells.append(PhaseCell(float(x), float(y), classify(found), found))
    return PhaseDiagram(xs, ys, cells)


@dataclass(frozen=True)
class CoalitionSlice:
    q_a: float
    grid: np.ndarray
    values: np.ndarray  # (p, q_B, q_C') + (3,)
    joint_argmax: list[tuple[float, float, float]]
    pareto: list[tuple[float, float, float]]


@dataclass(frozen=True)
class CoalitionReport:
    slices: list[CoalitionSlice]
    baseline: np.ndarray
    baseline_point: Mapping[str, float]
    pair_improvements: dict[str, list[tuple[float, float]]]
    coalition_gain: dict[float, tuple[float, float]]

    def slice(self, q_a: float) -> CoalitionSlice:
        for s in self.slices:
            if abs(s.q_a - q_a) < 1e-12:
                return s
        raise KeyError(q_a)


def _pareto(vb: np.ndarray, vc: np.ndarray, tol: float) -> np.ndarray:
    pts = np.stack([vb.ravel(), vc.ravel()], axis=1)
    keep = np.ones(len(pts), dtype=bool)
    for k, (b, c) in enumerate(pts):
        dominated = (pts[:, 0] >= b - tol) & (pts[:, 1] >= c - tol) & \
                    ((pts[:, 0] > b + tol) | (pts[:, 1] > c + tol))
        keep[k] = not dominated.any()
    return keep.reshape(vb.shape)


def _improves(vi: np.ndarray, vj: np.ndarray, bi: float, bj: float, tol: float) -> np.ndarray:
    di, dj = vi - bi, vj - bj
    return (di >= -tol) & (dj >= -tol) & ((di > tol) | (dj > tol))


def coalition_analysis(params: EconomyParams, grid: Sequence[float] | None = None,
                       alice: Sequence[float] = (0.0, 1.0), pair_grid: Sequence[float] | None = None,
                       baseline: Mapping[str, float] | None = None, start: str = "231",
                       tol: float = PAYOFF_TOL) -> CoalitionReport:
    """Bob/Charlie randomising between two joint profiles, against a no-coalition baseline.

    The baseline is a point of the quantum family (default: q_A = q_B = 1,
    q_C = 0). Pair searches for (A, B) and (A, C) scan the two agents' own
    quantum-family coordinates with the third agent held at the baseline.
    """
    grid = unit_grid(0.05) if grid is None else np.asarray(grid, dtype=float)
    pair_grid = unit_grid(0.05) if pair_grid is None else np.asarray(pair_grid, dtype=float)
    baseline = dict(DEFAULT_FIXED["quantum"], **(baseline or {}))
    slices = []
    for qa in alice:
        sg = steady_grid("coalition", {"p": grid, "q_B": grid, "q_C'": grid}, {"q_A'": qa},
                         None, start)
        v = sg.payoffs(params)
        vb, vc = v[..., 1], v[..., 2]
        both = (vb >= vb.max() - tol) & (vc >= vc.max() - tol)
        arg = [tuple(float(grid[k]) for k in idx) for idx in np.argwhere(both)]
        par = [tuple(float(grid[k]) for k in idx) for idx in np.argwhere(_pareto(vb, vc, tol))]
        slices.append(CoalitionSlice(float(qa), grid, v, arg, par))

    base_sg = steady_grid("quantum", {"q_A": (baseline["q_A"],)},
                          {k: v for k, v in baseline.items() if k != "q_A"}, None, start)
    base = base_sg.payoffs(params)[0]
    gains = {}
    for s in slices:
        ok = _improves(s.values[..., 1], s.values[..., 2], base[1], base[2], tol)
        if ok.any():
            idx = np.unravel_index(np.argmax(np.where(ok, s.values[..., 1] + s.values[..., 2], -np.inf)),
                                   ok.shape)
            gains[s.q_a] = (float(s.values[idx][1] - base[1]), float(s.values[idx][2] - base[2]))
        else:
            weak = (s.values[..., 1] >= base[1] - tol) & (s.values[..., 2] >= base[2] - tol)
            gains[s.q_a] = (0.0, 0.0) if weak.any() else (float("nan"), float("nan"))

    pairs = {}
    for pair in (("A", "B"), ("A", "C")):
        coords = tuple(OWN_COORDINATE["quantum"][a] for a in pair)
        fixed = {k: v for k, v in baseline.items() if k not in coords}
        sg = steady_grid("quantum", {coords[0]: pair_grid, coords[1]: pair_grid}, fixed, None, start)
        v = sg.payoffs(params)
        i, j = (AGENTS.index(a) for a in pair)
        ok = _improves(v[..., i], v[..., j], base[i], base[j], tol)
        pairs["".join(pair)] = [(float(pair_grid[a]), float(pair_grid[b])) for a, b in np.argwhere(ok)]
    return CoalitionReport(slices, base, baseline, pairs, gains)


@dataclass(frozen=True)
class FlowGraph:
    edges: dict[tuple[str, str, int], float]  # (giver, receiver, good) -> steady trade rate
    media: set[int]

    def goods_between(self, giver: str, receiver: str) -> set[int]:
        return {g for (a, b, g), r in self.edges.items() if a == giver and b == receiver and r > 0}


def flow_graph(rho, profile, tol: float = 1e-12) -> FlowGraph:
    """Steady-state trade rates per (giver, receiver, good) and the resulting media of exchange.

    A good is a medium of exchange when some agent accepts it although it is
    neither that agent's consumption good nor its production good.
    """
    p = np.real(np.diag(rho)) if np.ndim(rho) == 2 else np.asarray(rho, dtype=float)
    profiles = ([(1.0, profile)] if not hasattr(profile, "first")
                else [(float(profile.p), profile.first), (1 - float(profile.p), profile.second)])
    edges: dict[tuple[str, str, int], float] = {}
    for weight_profile, prof in profiles:
        for k, goods in enumerate(BASIS.labels):
            if p[k] <= tol or weight_profile <= 0:
                continue
            for b in round_branches(goods, prof):
                if not traded(b, goods):
                    continue
                i, j = b.meeting
                gi, gj = goods[AGENTS.index(i)], goods[AGENTS.index(j)]
                rate = weight_profile * p[k] * float(b.probability)
                for giver, receiver, good in ((i, j, gi), (j, i, gj)):
                    edges[(giver, receiver, good)] = edges.get((giver, receiver, good), 0.0) + rate
    edges = {k: v for k, v in edges.items() if v > tol}
    media = {g for (_, receiver, g) in edges
             if g not in (CONSUMES[receiver], PRODUCES[receiver])}
    return FlowGraph(edges, media)


def steady_point(family: str, coords: Mapping[str, float], theta: float | None = None,
                 start: str = "231"):
    """Channel and limit state for a single strategy point."""
    point = StrategyPoint(family, coords, theta)
    ch = build_channel(point.profile())
    dec = steady_states(ch, BASIS.point(start))
    return ch, dec
