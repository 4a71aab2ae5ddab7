"""Agents, goods and the strategy unitaries each agent plays on its ancillas."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .qsim import I2, X, Y, Z, kron

Param = Union[float, np.ndarray]

AGENTS = ("A", "B", "C")
GOOD_BITS = {1: 0b01, 2: 0b10, 3: 0b11}
BITS_GOOD = {v: k for k, v in GOOD_BITS.items()}
CONSUMES = {"A": 1, "B": 2, "C": 3}
PRODUCES = {"A": 2, "B": 3, "C": 1}
HOLDABLE = {a: tuple(sorted({1, 2, 3} - {CONSUMES[a]})) for a in AGENTS}

UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class AgentSpec:
    name: str
    consumes: int
    produces: int
    holdable: tuple[int, ...]


AGENT_SPECS = {a: AgentSpec(a, CONSUMES[a], PRODUCES[a], HOLDABLE[a]) for a in AGENTS}


def pair_index(agent: str, held: int) -> int:
    """0 when ``held`` is the agent's smaller holdable good (ancillas 1-2), else 1."""
    return HOLDABLE[agent].index(held)


def accept_bit(held: int, offered: int) -> int:
    """Position of the 'accept ``offered``' wire inside the pair used while holding ``held``."""
    if held == offered:
        raise ValueError("an agent cannot be offered the good it already holds")
    others = sorted({1, 2, 3} - {held})
    return others.index(offered)


def _as_param(value: Param, name: str) -> Param:
    arr = np.asarray(value, dtype=float)
    if arr.ndim > 1:
        raise ValueError(f"{name} must be a scalar or a 1-d array")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"{name} must lie in [0, 1]")
    return float(arr) if arr.ndim == 0 else arr


def _mix(weight: Param, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """sqrt(1-w)*first + sqrt(w)*second, broadcast over a batch of weights."""
    w = np.asarray(weight, dtype=float)[..., None, None]
    return np.sqrt(1 - w) * first + np.sqrt(w) * second


def constraint_error(u: np.ndarray) -> float:
    """Largest of |<00|U|00>| and |<11|U|11>| across the batch."""
    return float(max(np.max(np.abs(u[..., 0, 0])), np.max(np.abs(u[..., 3, 3]))))


def unitarity_error(u: np.ndarray) -> float:
    prod = np.conj(np.swapaxes(u, -1, -2)) @ u
    return float(np.max(np.abs(prod - np.eye(u.shape[-1]))))


@dataclass(frozen=True)
class StrategyProfile:
    """Six 2-qubit strategy matrices keyed by (agent, held good), plus the angle theta.

    ``unitary=False`` admits the one non-unitary matrix written for the
    coalition family; such profiles are still checked for the |00>/|11>
    constraint and for norm-one branch expansions by the circuit layer.
    """

    unitaries: Mapping[tuple[str, int], np.ndarray]
    theta: float
    family: str = "custom"
    params: Mapping[str, Param] = field(default_factory=dict)
    unitary: bool = True

    def __post_init__(self):
        if self.theta is None:
            raise ValueError("theta must be given")
        expected = {(a, g) for a in AGENTS for g in HOLDABLE[a]}
        if set(self.unitaries) != expected:
            raise ValueError(f"profile needs exactly the keys {sorted(expected)}")
        batch = None
        clean = {}
        for key, u in self.unitaries.items():
            u = np.asarray(u, dtype=complex)
            if u.shape[-2:] != (4, 4) or u.ndim not in (2, 3):
                raise ValueError(f"strategy {key} must be 4x4 (optionally batched)")
            if u.ndim == 3:
                if batch not in (None, u.shape[0]):
                    raise ValueError("batched strategies disagree on batch length")
                batch = u.shape[0]
            if constraint_error(u) > UNITARY_TOL:
                raise ValueError(f"strategy {key} violates <00|U|00> = <11|U|11> = 0")
            if self.unitary and unitarity_error(u) > UNITARY_TOL:
                raise ValueError(f"strategy {key} is not unitary")
            clean[key] = u
        if batch is not None:
            clean = {k: np.broadcast_to(u, (batch, 4, 4)) if u.ndim == 2 else u
                     for k, u in clean.items()}
        object.__setattr__(self, "unitaries", clean)

    @property
    def batch(self) -> int | None:
        u = next(iter(self.unitaries.values()))
        return u.shape[0] if u.ndim == 3 else None

    def strategy(self, agent: str, held: int) -> np.ndarray:
        return self.unitaries[(agent, held)]

    def select(self, index: int) -> "StrategyProfile":
        """One member of a batched profile."""
        if self.batch is None:
            return self
        params = {k: (v[index] if np.ndim(v) else v) for k, v in self.params.items()}
        return StrategyProfile({k: u[index] for k, u in self.unitaries.items()},
                               self.theta, self.family, params, self.unitary)


@dataclass(frozen=True)
class CoalitionProfile:
    """Public randomisation: ``first`` with probability p, ``second`` otherwise."""

    p: Param
    first: StrategyProfile
    second: StrategyProfile
    family: str = "coalition"
    params: Mapping[str, Param] = field(default_factory=dict)

    @property
    def theta(self) -> float:
        return self.first.theta

    @property
    def batch(self) -> int | None:
        return self.first.batch or self.second.batch or (
            np.shape(self.p)[0] if np.ndim(self.p) else None)


def _rot(p: Param) -> np.ndarray:
    """sqrt(p) I + i sqrt(1-p) Y, the single-qubit 'decline with probability p' gate."""
    p = np.asarray(p, dtype=float)[..., None, None]
    return np.sqrt(p) * I2 + 1j * np.sqrt(1 - p) * Y


def _left(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched kron(a, b)."""
    return np.einsum("...ij,...kl->...ikjl", a, b).reshape(
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2]) + (4, 4))


def classical_profile(s_a: Param, s_b: Param, s_c: Param, theta: float = 0.0) -> StrategyProfile:
    s_a, s_b, s_c = (_as_param(v, n) for v, n in ((s_a, "s_A"), (s_b, "s_B"), (s_c, "s_C")))
    u = {
        ("A", 2): _left(Y, _rot(s_a)),
        ("A", 3): _left(Y, _rot(1 - np.asarray(s_a))),
        ("B", 1): _left(Y, _rot(s_b)),
        ("B", 3): _left(_rot(1 - np.asarray(s_b)), Y),
        ("C", 1): _left(_rot(s_c), Y),
        ("C", 2): _left(_rot(1 - np.asarray(s_c)), Y),
    }
    return StrategyProfile(u, theta, "classical", {"s_A": s_a, "s_B": s_b, "s_C": s_c})


def quantum_profile(q_a: Param, q_b: Param, q_c: Param = 0.0,
                    theta: float = np.pi / 4) -> StrategyProfile:
    q_a, q_b, q_c = (_as_param(v, n) for v, n in ((q_a, "q_A"), (q_b, "q_B"), (q_c, "q_C")))
    u = {
        ("A", 2): kron(Y, I2),
        ("A", 3): _mix(q_a, kron(Y, Y), kron(Y, X)),
        ("B", 1): kron(Y, I2),
        ("B", 3): _mix(q_b, kron(Y, Y), kron(Z, Y)),
        ("C", 1): kron(I2, Y),
        ("C", 2): _mix(q_c, kron(Y, Y), kron(Z, Y)),
    }
    return StrategyProfile(u, theta, "quantum", {"q_A": q_a, "q_B": q_b, "q_C": q_c})


def coalition_profile(p: Param, q_a_prime: Param, q_b: Param, q_c_prime: Param,
                      theta: float = np.pi / 4) -> CoalitionProfile:
    """Bob and Charlie play the first joint profile with probability p, the second otherwise."""
    p = _as_param(p, "p")
    qa, qb, qc = (_as_param(v, n) for v, n in
                  ((q_a_prime, "q_A'"), (q_b, "q_B"), (q_c_prime, "q_C'")))
    alice = {("A", 2): _mix(qa, kron(Y, I2), kron(X, I2)), ("A", 3): kron(Y, X)}
    first = dict(alice)
    first.update({
        ("B", 1): kron(Y, I2),
        ("B", 3): _mix(qb, kron(Y, Y), kron(Z, Y)),
        ("C", 1): kron(I2, Y),
        ("C", 2): kron(Y, Y),
    })
    second = dict(alice)
    second.update({
        ("B", 1): kron(Y, I2),
        # written as a real combination of I(x)Y and Z(x)Y; unitary only at q in {0, 1}
        ("C", 1): _mix(qc, kron(I2, Y), kron(Z, Y)),
        ("B", 3): kron(Y, Y),
        ("C", 2): kron(Y, Y),
    })
    params = {"p": p, "q_A'": qa, "q_B": qb, "q_C'": qc}
    return CoalitionProfile(
        p,
        StrategyProfile(first, theta, "coalition-1", params),
        StrategyProfile(second, theta, "coalition-2", params, unitary=False),
        params=params,
    )


def custom_profile(matrices: Mapping[tuple[str, int], np.ndarray], theta: float) -> StrategyProfile:
    return StrategyProfile(dict(matrices), theta, "custom")


FAMILIES = {
    "classical": classical_profile,
    "quantum": quantum_profile,
    "coalition": coalition_profile,
}


def build_strategy(family: str, *params: Param, theta: float | None = None):
    """Named-family constructor; parameters are positional in family order."""
    try:
        ctor = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown strategy family {family!r}") from None
    if theta is None:
        return ctor(*params)
    return ctor(*params, theta=theta)
