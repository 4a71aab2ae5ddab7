"""Closed-form oracles for transition matrices, steady states, payoffs and round expansions.

Everything here is written out by hand, independently of the circuit
simulator, so that tests and the ``verify`` command can compare the two.
Matrices are indexed by the commodity basis 211, 212, 231, 232, 311, 312,
331, 332 and are column-stochastic (column = state before the round).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .circuit import Branch

R3 = 1 / np.sqrt(3)


def classical_matrix(s_a: float, s_b: float, s_c: float) -> np.ndarray:
    """Transition matrix of the classical family (s_i = probability of keeping the cheaper good)."""
    return np.array([
        [(1 + s_c) / 3, 0, s_b / 3, 0, 1 / 3, s_a / 3, 0, 0],
        [(1 - s_c) / 3, (2 - s_c) / 3, 0, 0, 0, 0, 0, 0],
        [1 / 3, s_c / 3, (s_a + 1 - s_b + s_c) / 3, 1 / 3, (1 - s_b) / 3, 0, 1 / 3, s_a / 3],
        [0, 1 / 3, (1 - s_c) / 3, (s_a + 1) / 3, 0, (1 - s_b) / 3, 0, 0],
        [0, 0, 0, 0, (1 + s_b) / 3, 0, s_b / 3, 0],
        [0, 0, 0, 0, 0, (2 - s_a + s_b - s_c) / 3, 0, 0],
        [0, 0, (1 - s_a) / 3, 0, 0, s_c / 3, (2 - s_b) / 3, 1 / 3],
        [0, 0, 0, (1 - s_a) / 3, 0, 0, 0, (2 - s_a) / 3],
    ])


def quantum_matrix(q_a: float, q_b: float) -> np.ndarray:
    """Transition matrix of the quantum family at maximal entanglement (q_C = 0)."""
    return np.array([
        [2 / 3, 0, 1 / 3, 0, 1 / 3, 1 / 3, 0, 0],
        [0, 1 / 3, 0, 0, 0, 0, 0, 0],
        [1 / 3, 1 / 3, (2 - q_b) / 3, 1 / 3, q_a / 3, 0, 1 / 3, 1 / 3],
        [0, 1 / 3, 0, (2 - q_b) / 3, 0, 1 / 3, 0, 0],
        [0, 0, 0, 0, (2 - q_a) / 3, 0, 1 / 3, 0],
        [0] * 8,
        [0, 0, q_b / 3, 0, 0, 1 / 3, 1 / 3, 1 / 3],
        [0, 0, 0, q_b / 3, 0, 0, 0, 1 / 3],
    ])


def coalition_first_matrix(q_a: float, q_b: float) -> np.ndarray:
    """Matrix of the first coalition profile (Alice q_A', Bob q_B, Charlie fixed)."""
    x = q_b * (1 - q_a) + (1 - q_b) * q_a
    return np.array([
        [(2 - q_a) / 3, 0, 1 / 3, 0, 1 / 3, 1 / 3, 0, 0],
        [q_a / 3, 1 / 3, 0, 0, 0, 0, 0, 0],
        [1 / 3, 1 / 3, (2 - x - q_a) / 3, 1 / 3, 1 / 3, 0, 1 / 3, 1 / 3],
        [0, 1 / 3, q_a / 3, (2 - x) / 3, 0, 1 / 3, 0, 0],
        [0, 0, 0, 0, 1 / 3, 0, 1 / 3, 0],
        [0] * 8,
        [0, 0, x / 3, 0, 0, 1 / 3, 1 / 3, 1 / 3],
        [0, 0, 0, x / 3, 0, 0, 0, 1 / 3],
    ])


def coalition_second_matrix(q_a: float, q_c: float) -> np.ndarray:
    """Matrix of the second coalition profile (Alice q_A', Charlie q_C', Bob fixed)."""
    x = q_a * (1 - q_c) + (1 - q_a) * q_c
    return np.array([
        [(2 - x) / 3, 0, 1 / 3, 0, 1 / 3, 1 / 3, 0, 0],
        [x / 3, 1 / 3, 0, 0, 0, 0, 0, 0],
        [1 / 3, 1 / 3, (2 - q_a - x) / 3, 1 / 3, 1 / 3, 0, 1 / 3, 1 / 3],
        [0, 1 / 3, x / 3, (2 - q_a) / 3, 0, 1 / 3, 0, 0],
        [0, 0, 0, 0, 1 / 3, 0, 1 / 3, 0],
        [0] * 8,
        [0, 0, q_a / 3, 0, 0, 1 / 3, 1 / 3, 1 / 3],
        [0, 0, 0, q_a / 3, 0, 0, 0, 1 / 3],
    ])


def coalition_matrix(p: float, q_a: float, q_b: float, q_c: float) -> np.ndarray:
    return p * coalition_first_matrix(q_a, q_b) + (1 - p) * coalition_second_matrix(q_a, q_c)


def classical_consumption(s_a: float, s_b: float, s_c: float) -> np.ndarray:
    """Rows w_A, w_B, w_C: per-round consumption probability from each basis state."""
    return np.array([
        [2 - s_c, 1, 1 - s_c, 0, 2 - s_b, 1 - s_b, 1, 0],
        [1, 1 + s_c, 1 - s_a, 2 - s_a, 0, s_c, 0, 1],
        [0, 0, s_b, 1, 1, s_a, 1 + s_b, 1 + s_a],
    ]) / 3


# steady states over the full basis
FUNDAMENTAL_STEADY = np.array([1, 0, 1, 0, 0, 0, 0, 0]) / 2
SPECULATIVE_STEADY = np.array([3, 0, 2, 0, 1, 0, 1, 0]) / 7
ALTERNATIVE_STEADY = np.array([1, 1, 2, 3, 0, 0, 0, 0]) / 7
QUANTUM_STEADY = np.array([5, 0, 4, 0, 1, 0, 2, 0]) / 12
SPECULATIVE_HOLDINGS = (5 / 7, 3 / 7, 1.0)

_QUANTUM_SUPPORT = (0, 2, 4, 6)  # 211, 231, 311, 331


def quantum_fixed_point(q_a: float, q_b: float) -> np.ndarray:
    """Steady populations of the quantum family reached from 231."""
    weights = np.array([2 + 2 * q_a + q_b, 2 + 2 * q_a, q_b, q_b * (1 + q_a)])
    p = np.zeros(8)
    p[list(_QUANTUM_SUPPORT)] = weights / (4 * (1 + q_a) + q_b * (3 + q_a))
    return p


def quantum_payoffs(q_a: float, q_b: float, c: Sequence[float], u: float, delta: float) -> np.ndarray:
    """(V_A, V_B, V_C) at the quantum fixed point."""
    c1, c2, c3 = c
    rho = quantum_fixed_point(q_a, q_b)[list(_QUANTUM_SUPPORT)]
    v = np.array([[c2, c2, c3, c3], [c1, c3, c1, c3], [c1, c1, c1, c1]])
    w = np.array([[1, 0, 1 + q_a, 1], [1, q_b, 0, 0], [0, 1, 1, 2]]) / 3
    return (-v + u * delta * w) @ rho


def quantum_gradient(agent: str, q_a: float, q_b: float, c: Sequence[float], u: float,
                     delta: float) -> float:
    """dV_A/dq_A or dV_B/dq_B of the quantum family."""
    c1, c2, c3 = c
    du = u * delta
    denom = (4 * (1 + q_a) + q_b * (3 + q_a)) ** 2
    if agent == "A":
        return ((c3 - c2) * q_b * (4 - q_b) + du * q_b ** 2) / denom
    if agent == "B":
        return ((c3 - c1) * 2 * (1 - q_a) * (1 + q_a) + du * 2 * (1 + q_a) ** 2) / denom
    raise ValueError("closed-form gradients exist for A and B only")


def two_person_success(k: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Trade probability of the two-person protocol, |K_01 a_1 b_1|^2."""
    return float(abs(k[0, 1] * a[1] * b[1]) ** 2)


# ---------------------------------------------------------------------------
# Round expansions: each term is a product of per-agent ancilla superpositions.

Ket = Mapping[str, complex]


@dataclass(frozen=True)
class ExpansionTerm:
    coefficient: complex
    goods: str
    meeting: str
    ancilla: tuple[Ket, Ket, Ket]
    flags: str


def _key(goods, meeting, ancilla, flags) -> tuple[str, str, str, str]:
    return str(goods), meeting, ancilla, str(flags)


def expand_terms(terms: Sequence[ExpansionTerm]) -> dict[tuple[str, str, str, str], complex]:
    """Multiply out the ancilla products into basis amplitudes keyed by (goods, meeting, ancilla, flags)."""
    out: dict[tuple[str, str, str, str], complex] = {}
    for t in terms:
        for parts in itertools.product(*(kt.items() for kt in t.ancilla)):
            bits = "".join(p[0] for p in parts)
            amp = t.coefficient * np.prod([p[1] for p in parts])
            key = _key(t.goods, t.meeting, bits, t.flags)
            out[key] = out.get(key, 0) + amp
    return out


def branch_amplitudes(branches: Sequence[Branch]) -> dict[tuple[str, str, str, str], complex]:
    out = {}
    for b in branches:
        key = _key("".join(map(str, b.goods)), b.meeting, b.ancilla, "".join(map(str, b.flags)))
        out[key] = out.get(key, 0) + complex(b.amplitude)
    return out


def phase_aligned_error(expected: Mapping, computed: Mapping) -> float:
    """Largest amplitude difference after removing one global phase."""
    keys = set(expected) | set(computed)
    ref = max(expected, key=lambda k: abs(expected[k]))
    if abs(computed.get(ref, 0)) < 1e-14:
        return float("inf")
    phase = computed[ref] / expected[ref]
    phase /= abs(phase)
    return max(abs(computed.get(k, 0) - phase * expected.get(k, 0)) for k in keys)


def _keep_or_swap(s: float) -> dict[str, complex]:
    """|1>(sqrt(s)|0> - sqrt(1-s)|1>)|00>: the cheaper-pair half of a classical strategy."""
    return {"1000": np.sqrt(s), "1100": -np.sqrt(1 - s)}


def expansion_211_classical(s_a: float, s_b: float, s_c: float) -> list[ExpansionTerm]:
    """Round started in 211, classical family at zero entanglement."""
    idle = {"0000": 1.0}
    a, b = _keep_or_swap(s_a), _keep_or_swap(s_b)
    c = {"0100": np.sqrt(s_c), "1100": -np.sqrt(1 - s_c)}
    return [
        ExpansionTerm(-R3, "231", "AB", (a, b, idle), "110"),
        ExpansionTerm(-R3, "211", "AC", (a, idle, {"0100": np.sqrt(s_c)}), "000"),
        ExpansionTerm(R3, "212", "AC", (a, idle, {"1100": np.sqrt(1 - s_c)}), "100"),
        ExpansionTerm(-R3, "211", "BC", (idle, b, c), "000"),
    ]


def expansion_311_classical(s_a: float, s_b: float, s_c: float) -> list[ExpansionTerm]:
    """Round started in 311, classical family at zero entanglement."""
    idle = {"0000": 1.0}
    a = {"0010": np.sqrt(1 - s_a), "0011": -np.sqrt(s_a)}
    b = _keep_or_swap(s_b)
    c = {"0100": np.sqrt(s_c), "1100": -np.sqrt(1 - s_c)}
    return [
        ExpansionTerm(-R3, "311", "AB", (a, {"1000": np.sqrt(s_b)}, idle), "000"),
        ExpansionTerm(R3, "231", "AB", (a, {"1100": np.sqrt(1 - s_b)}, idle), "100"),
        ExpansionTerm(-R3, "211", "AC", (a, idle, c), "101"),
        ExpansionTerm(-R3, "311", "BC", (idle, b, c), "000"),
    ]


def _basis_terms(rows) -> list[ExpansionTerm]:
    return [ExpansionTerm(amp, goods, meeting, ({a: 1.0}, {b: 1.0}, {c: 1.0}), flags)
            for amp, goods, meeting, a, b, c, flags in rows]


def expansion_231_quantum(q_b: float) -> list[ExpansionTerm]:
    """Round started in 231, quantum family at maximal entanglement (Bob hands 3 to Alice)."""
    yes, no = 1j * np.sqrt(q_b) * R3, -1j * np.sqrt(1 - q_b) * R3
    return _basis_terms([
        (yes, "331", "AB", "0111", "1110", "1111", "010"),
        (no, "231", "AB", "1000", "0011", "0000", "000"),
        (-R3, "231", "AC", "1000", "0000", "0100", "000"),
        (yes, "211", "BC", "1111", "1110", "1011", "001"),
        (no, "211", "BC", "0000", "0011", "0100", "001"),
    ])


def expansion_311_quantum(q_a: float) -> list[ExpansionTerm]:
    """Round started in 311, quantum family at maximal entanglement."""
    yes, no = -1j * np.sqrt(q_a) * R3, -1j * np.sqrt(1 - q_a) * R3
    return _basis_terms([
        (yes, "231", "AB", "1100", "0111", "1111", "100"),
        (no, "311", "AB", "0011", "1000", "0000", "000"),
        (-R3, "311", "BC", "0000", "1000", "0100", "000"),
        (yes, "211", "AC", "1100", "1111", "1011", "101"),
        (no, "211", "AC", "0011", "0000", "0100", "101"),
    ])
