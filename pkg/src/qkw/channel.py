"""Round superoperator on the commodity space, its iterates and its steady states."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .circuit import Branch, round_branches
from .strategies import CoalitionProfile, StrategyProfile

Profile = Union[StrategyProfile, CoalitionProfile]

STOCHASTIC_TOL = 1e-10
EDGE_TOL = 1e-12
FIXED_POINT_TOL = 1e-10


class CommodityBasis:
    """Fixed ordering of the eight goods triples agents can hold between rounds."""

    labels: tuple[tuple[int, int, int], ...] = (
        (2, 1, 1), (2, 1, 2), (2, 3, 1), (2, 3, 2),
        (3, 1, 1), (3, 1, 2), (3, 3, 1), (3, 3, 2),
    )
    dim = 8

    @classmethod
    def index(cls, goods: Sequence[int] | str) -> int:
        if isinstance(goods, str):
            goods = tuple(int(ch) for ch in goods.strip())
        try:
            return cls.labels.index(tuple(int(g) for g in goods))
        except ValueError:
            raise ValueError(f"{goods!r} is not a commodity basis state") from None

    @classmethod
    def label(cls, index: int) -> tuple[int, int, int]:
        return cls.labels[index]

    @classmethod
    def names(cls) -> list[str]:
        return ["".join(map(str, g)) for g in cls.labels]

    @classmethod
    def point(cls, goods: Sequence[int] | str) -> np.ndarray:
        v = np.zeros(cls.dim)
        v[cls.index(goods)] = 1.0
        return v

    @classmethod
    def hamming(cls, i: int, j: int) -> int:
        return sum(a != b for a, b in zip(cls.labels[i], cls.labels[j]))


BASIS = CommodityBasis


def _environment(branch: Branch) -> tuple:
    return branch.meeting, branch.ancilla, branch.flags


def _expansions(profile: StrategyProfile) -> list[list[Branch]]:
    return [round_branches(g, profile) for g in BASIS.labels]


def _population_matrix(expansions: list[list[Branch]], batch: int | None) -> np.ndarray:
    shape = (batch, 8, 8) if batch else (8, 8)
    t8 = np.zeros(shape)
    for k, branches in enumerate(expansions):
        for b in branches:
            t8[..., BASIS.index(b.goods), k] += b.probability
    return t8


def _dyad_matrix(expansions: list[list[Branch]]) -> np.ndarray:
    """64x64 action on vec(|x><y|) = e_{8x+y}."""
    t64 = np.zeros((64, 64), dtype=complex)
    keyed = []
    for branches in expansions:
        env: dict[tuple, list[tuple[int, complex]]] = {}
        for b in branches:
            env.setdefault(_environment(b), []).append((BASIS.index(b.goods), complex(b.amplitude)))
        keyed.append(env)
    for x in range(8):
        for y in range(8):
            col = 8 * x + y
            left, right = keyed[x], keyed[y]
            for key in left.keys() & right.keys():
                for ox, ax in left[key]:
                    for oy, ay in right[key]:
                        t64[8 * ox + oy, col] += ax * np.conj(ay)
    return t64


@dataclass(frozen=True)
class TransitionChannel:
    """Round channel: dyad action ``t64`` (unbatched profiles only) and population block ``t8``."""

    t8: np.ndarray
    profile: Profile
    t64: np.ndarray | None = None

    def __post_init__(self):
        cols = self.t8.sum(axis=-2)
        if np.max(np.abs(cols - 1)) > STOCHASTIC_TOL or np.min(self.t8) < -EDGE_TOL:
            raise ValueError("population block is not column-stochastic")

    @property
    def batch(self) -> int | None:
        return self.t8.shape[0] if self.t8.ndim == 3 else None

    def select(self, index: int) -> "TransitionChannel":
        if self.batch is None:
            return self
        return TransitionChannel(self.t8[index], self.profile, None)


def transition_matrix(profile: Profile) -> np.ndarray:
    """T8 only; accepts batched profiles and returns (n, 8, 8) for them."""
    if isinstance(profile, CoalitionProfile):
        p = np.asarray(profile.p, dtype=float)[..., None, None]
        return p * transition_matrix(profile.first) + (1 - p) * transition_matrix(profile.second)
    return _population_matrix(_expansions(profile), profile.batch)


def build_channel(profile: Profile, dyads: bool | None = None) -> TransitionChannel:
    """Assemble the channel; the 64x64 dyad matrix is built unless the profile is batched."""
    batch = profile.batch
    if dyads is None:
        dyads = batch is None
    if dyads and batch is not None:
        raise ValueError("dyad matrices are only assembled for unbatched profiles")
    if isinstance(profile, CoalitionProfile):
        a, b = build_channel(profile.first, dyads), build_channel(profile.second, dyads)
        p = np.asarray(profile.p, dtype=float)
        t8 = p[..., None, None] * a.t8 + (1 - p[..., None, None]) * b.t8
        t64 = p * a.t64 + (1 - p) * b.t64 if dyads else None
        return TransitionChannel(t8, profile, t64)
    expansions = _expansions(profile)
    t8 = _population_matrix(expansions, batch)
    return TransitionChannel(t8, profile, _dyad_matrix(expansions) if dyads else None)


def _require_dyads(channel: TransitionChannel) -> np.ndarray:
    if channel.t64 is None:
        raise ValueError("channel was built without its dyad matrix")
    return channel.t64


def as_density(rho: np.ndarray | Sequence[float]) -> np.ndarray:
    """Accept an 8-vector of populations or an 8x8 block; return the 8x8 block."""
    rho = np.asarray(rho)
    if rho.shape == (8,):
        rho = np.diag(rho).astype(complex)
    if rho.shape != (8, 8):
        raise ValueError("density must be an 8-vector or an 8x8 matrix")
    return rho.astype(complex)


def dyad_image(channel: TransitionChannel, x: int, y: int) -> np.ndarray:
    """T(|x><y|) as an 8x8 matrix."""
    return _require_dyads(channel)[:, 8 * x + y].reshape(8, 8)


def apply_channel(channel: TransitionChannel, rho, *, check_trace: bool = True) -> np.ndarray:
    rho = as_density(rho)
    if check_trace and abs(np.trace(rho) - 1) > 1e-9:
        raise ValueError("density block is not normalised")
    return (_require_dyads(channel) @ rho.reshape(64)).reshape(8, 8)


def iterate(channel: TransitionChannel, rho, t: int) -> np.ndarray:
    """T^t(rho). ``t = -1`` returns the zero block by convention."""
    rho = as_density(rho)
    if t == -1:
        return np.zeros((8, 8), dtype=complex)
    if t < 0:
        raise ValueError("t must be non-negative (or the sentinel -1)")
    power = np.linalg.matrix_power(_require_dyads(channel), t)
    return (power @ rho.reshape(64)).reshape(8, 8)


def population_series(t8: np.ndarray, p0: np.ndarray, steps: int) -> np.ndarray:
    """Rows are diag(T^tau rho0) for tau = 0..steps."""
    out = np.empty((steps + 1,) + np.shape(p0))
    out[0] = p0
    for tau in range(steps):
        out[tau + 1] = t8 @ out[tau]
    return out


@dataclass(frozen=True)
class ClosedClassDecomposition:
    components: list[tuple[int, ...]]
    closed: list[tuple[int, ...]]
    stationary: list[np.ndarray]
    weights: np.ndarray | None = None
    limit: np.ndarray | None = None
    residual: float | None = None

    @property
    def multiplicity(self) -> int:
        return len(self.closed)

    def limit_labels(self, tol: float = 1e-14) -> dict[str, float]:
        if self.limit is None:
            return {}
        return {n: float(v) for n, v in zip(BASIS.names(), self.limit) if v > tol}


def _stationary(block: np.ndarray) -> np.ndarray:
    """Solve (B - I) x = 0 together with sum(x) = 1."""
    n = len(block)
    system = np.vstack([block - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    v, _, rank, _ = np.linalg.lstsq(system, rhs, rcond=None)
    if rank < n:
        raise RuntimeError("closed class does not have a unique stationary distribution")
    v[np.abs(v) < 1e-15] = 0.0
    return v


def power_stationary(t8: np.ndarray, p0: np.ndarray, tol: float = 1e-12,
                     max_iter: int = 10**6) -> np.ndarray:
    """Limit of the lazy chain (I + T)/2, which shares fixed points with T and is aperiodic."""
    lazy = 0.5 * (np.eye(len(t8)) + t8)
    p = np.asarray(p0, dtype=float)
    for _ in range(max_iter):
        nxt = lazy @ p
        if np.sum(np.abs(nxt - p)) < tol:
            return nxt
        p = nxt
    raise RuntimeError("power iteration did not converge")


def class_structure(adjacency: np.ndarray) -> tuple[list[tuple[int, ...]], list[tuple[int, ...]]]:
    """Strongly connected components of a 0/1 adjacency (``adjacency[i, j]``: i -> j) and the closed ones."""
    n = len(adjacency)
    count, labels = connected_components(adjacency, directed=True, connection="strong")
    components = sorted(tuple(int(i) for i in np.flatnonzero(labels == c)) for c in range(count))
    closed = []
    for comp in components:
        outside = np.setdiff1d(np.arange(n), comp)
        if not adjacency[np.ix_(comp, outside)].any():
            closed.append(comp)
    return components, closed


def _edges(t8: np.ndarray) -> np.ndarray:
    return (np.swapaxes(t8, -1, -2) > EDGE_TOL).astype(int)


def _check_start(p0: np.ndarray) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    if abs(p0.sum() - 1) > 1e-9 or np.min(p0) < -1e-12:
        raise ValueError("initial distribution must be a probability vector")
    return p0


def decompose(t8: np.ndarray, p0: np.ndarray | None = None) -> ClosedClassDecomposition:
    """Closed communicating classes of a column-stochastic matrix and the limit from ``p0``."""
    t8 = np.asarray(t8, dtype=float)
    n = len(t8)
    components, closed = class_structure(_edges(t8))
    stationary = []
    for comp in closed:
        idx = np.array(comp)
        pi = np.zeros(n)
        pi[idx] = _stationary(t8[np.ix_(idx, idx)])
        stationary.append(pi)
    if p0 is None:
        return ClosedClassDecomposition(components, closed, stationary)

    p0 = _check_start(p0)
    recurrent = {i for comp in closed for i in comp}
    transient = [i for i in range(n) if i not in recurrent]
    weights = np.array([p0[list(comp)].sum() for comp in closed])
    if transient:
        q = t8[np.ix_(transient, transient)]
        # expected visits to each transient state, then one step into the recurrent part
        visits = np.linalg.solve(np.eye(len(transient)) - q, p0[transient])
        for k, comp in enumerate(closed):
            weights[k] += t8[np.ix_(list(comp), transient)].sum(axis=0) @ visits
    limit = sum(w * pi for w, pi in zip(weights, stationary))
    residual = float(np.sum(np.abs(t8 @ limit - limit)))
    return ClosedClassDecomposition(components, closed, stationary, weights, limit, residual)


def steady_states(channel: TransitionChannel, rho0=None) -> ClosedClassDecomposition:
    if channel.batch is not None:
        raise ValueError("select a single channel from the batch first")
    p0 = None if rho0 is None else np.real(np.diag(as_density(rho0)))
    return decompose(channel.t8, p0)


def steady_state_batch(t8: np.ndarray, p0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Limits from ``p0`` for a stack of matrices; returns (limits, closed-class counts).

    Matrices sharing an edge pattern share their class structure, so each
    pattern is analysed once and the linear solves run batched.
    """
    t8 = np.asarray(t8, dtype=float)
    p0 = _check_start(p0)
    n = t8.shape[-1]
    edges = _edges(t8).reshape(len(t8), -1)
    keys = np.packbits(edges.astype(np.uint8), axis=1)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    limits = np.zeros((len(t8), n))
    counts = np.zeros(len(t8), dtype=int)
    for pattern in np.unique(inverse):
        members = np.flatnonzero(inverse == pattern)
        mats = t8[members]
        _, closed = class_structure(edges[members[0]].reshape(n, n))
        counts[members] = len(closed)
        recurrent = {i for comp in closed for i in comp}
        transient = [i for i in range(n) if i not in recurrent]
        if transient:
            q = mats[:, transient][:, :, transient]
            visits = np.linalg.solve(np.eye(len(transient)) - q,
                                     np.broadcast_to(p0[transient], (len(members), len(transient)))[..., None])[..., 0]
        for comp in closed:
            idx = list(comp)
            m = len(idx)
            system = mats[:, idx][:, :, idx] - np.eye(m)
            system[:, -1, :] = 1.0  # replace one balance equation by normalisation
            rhs = np.zeros((len(members), m, 1))
            rhs[:, -1] = 1.0
            pi = np.linalg.solve(system, rhs)[..., 0]
            weight = np.full(len(members), p0[idx].sum())
            if transient:
                weight = weight + np.einsum("bt,bt->b", mats[:, idx][:, :, transient].sum(axis=1), visits)
            limits[members[:, None], np.array(idx)[None, :]] = weight[:, None] * pi
    return limits, counts


@dataclass(frozen=True)
class DecayReport:
    max_ratio: float
    max_multi_difference: float
    ratios: dict[tuple[str, str], float] = field(repr=False)

    @property
    def contracts(self) -> bool:
        return self.max_ratio <= 1 / 3 + 1e-12 and self.max_multi_difference < 1e-12


def decay_certificate(channel: TransitionChannel) -> DecayReport:
    """Spectral-norm ratio |T(|x><y|)| / |x><y| for every off-diagonal dyad."""
    names = BASIS.names()
    ratios = {}
    worst_single = 0.0
    worst_multi = 0.0
    for x in range(8):
        for y in range(8):
            if x == y:
                continue
            norm = float(np.linalg.norm(dyad_image(channel, x, y), 2))
            ratios[(names[x], names[y])] = norm
            if BASIS.hamming(x, y) == 1:
                worst_single = max(worst_single, norm)
            else:
                worst_multi = max(worst_multi, norm)
    return DecayReport(worst_single, worst_multi, ratios)


@dataclass(frozen=True)
class Trajectory:
    goods: np.ndarray  # basis index held at the start of each round, plus the final holding
    meetings: list[str]
    flags: np.ndarray  # (rounds, 3)
    seed: int

    @property
    def rounds(self) -> int:
        return len(self.meetings)

    def occupation(self, burn_in: int = 0) -> np.ndarray:
        counts = np.bincount(self.goods[burn_in + 1:], minlength=8)
        return counts / counts.sum()

    def transition_counts(self) -> np.ndarray:
        counts = np.zeros((8, 8))
        np.add.at(counts, (self.goods[1:], self.goods[:-1]), 1)
        return counts

    def records(self) -> list[dict]:
        names = BASIS.names()
        return [{"round": t, "goods": names[self.goods[t]], "meeting": self.meetings[t],
                 "flags": "".join(map(str, self.flags[t])), "after": names[self.goods[t + 1]]}
                for t in range(self.rounds)]


def _outcome_tables(profile: StrategyProfile):
    tables = []
    for branches in _expansions(profile):
        probs = np.array([float(b.probability) for b in branches])
        probs = probs / probs.sum()
        tables.append((np.cumsum(probs), [(BASIS.index(b.goods), b.meeting, b.flags) for b in branches]))
    return tables


def sample_trajectory(profile: Profile, start, rounds: int, seed: int) -> Trajectory:
    """Measure each round's outcome (meeting, agreements, consumption) and continue from it."""
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if profile.batch is not None:
        raise ValueError("sampling needs an unbatched profile")
    rng = np.random.default_rng(seed)
    if isinstance(profile, CoalitionProfile):
        parts = [_outcome_tables(profile.first), _outcome_tables(profile.second)]
        pick = rng.random(rounds) >= float(profile.p)
    else:
        parts = [_outcome_tables(profile)]
        pick = np.zeros(rounds, dtype=int)
    if isinstance(start, (str, tuple, list)) and len(start) == 3:
        state = BASIS.index(start)
    else:
        p0 = np.asarray(start, dtype=float)
        state = int(rng.choice(8, p=p0 / p0.sum()))
    draws = rng.random(rounds)
    goods = np.empty(rounds + 1, dtype=int)
    flags = np.empty((rounds, 3), dtype=int)
    meetings = []
    goods[0] = state
    for t in range(rounds):
        cum, outcomes = parts[int(pick[t])][state]
        k = min(int(np.searchsorted(cum, draws[t], side="right")), len(outcomes) - 1)
        state, meeting, flag = outcomes[k]
        goods[t + 1] = state
        flags[t] = flag
        meetings.append(meeting)
    return Trajectory(goods, meetings, flags, seed)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))
