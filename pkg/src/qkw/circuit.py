"""The single-round exchange circuit: matchmaking, entangled strategies, swaps, consumption."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import qsim
from .qsim import LocalOperator, PatternControlled, RegisterLayout, SparseState
from .strategies import (AGENTS, BITS_GOOD, CONSUMES, GOOD_BITS, HOLDABLE, PRODUCES,
                         StrategyProfile, accept_bit, pair_index)

LAYOUT = RegisterLayout((
    ("goods.A", 2), ("goods.B", 2), ("goods.C", 2),
    ("match.W", 3),
    ("anc.A", 4), ("anc.B", 4), ("anc.C", 4),
    ("flag.A", 1), ("flag.B", 1), ("flag.C", 1),
))
GOODS_REGISTERS = ("goods.A", "goods.B", "goods.C")
ANCILLA_REGISTERS = tuple(n for n in LAYOUT.names if n not in GOODS_REGISTERS)
STRATEGY_QUBITS = LAYOUT.qubits("anc.A") + LAYOUT.qubits("anc.B") + LAYOUT.qubits("anc.C")

MEETINGS = ("AB", "AC", "BC")
# bit k of the W register is set when agent k takes part in the meeting
MEETING_W = {"AB": 0b110, "AC": 0b101, "BC": 0b011}
W_MEETING = {v: k for k, v in MEETING_W.items()}

BRANCH_TOL = 1e-10


@dataclass(frozen=True)
class Branch:
    amplitude: complex | np.ndarray
    goods: tuple[int, int, int]
    meeting: str
    ancilla: str
    flags: tuple[int, int, int]

    @property
    def probability(self):
        return np.abs(self.amplitude) ** 2

    def to_record(self) -> dict:
        amp = complex(self.amplitude)
        return {
            "amplitude_re": amp.real,
            "amplitude_im": amp.imag,
            "goods": "".join(map(str, self.goods)),
            "meeting": self.meeting,
            "ancilla_bits": self.ancilla,
            "flags": "".join(map(str, self.flags)),
        }


def validate_goods(goods: Sequence[int]) -> tuple[int, int, int]:
    goods = tuple(int(g) for g in goods)
    if len(goods) != 3:
        raise ValueError(f"expected three goods, got {goods}")
    for agent, g in zip(AGENTS, goods):
        if g not in HOLDABLE[agent]:
            raise ValueError(f"agent {agent} cannot hold good {g} between rounds")
    return goods


def parse_goods(text: str) -> tuple[int, int, int]:
    return validate_goods(tuple(int(ch) for ch in str(text).strip()))


def ancilla_wire(agent: str, held: int, offered: int) -> int:
    """Qubit carrying agent's 'accept ``offered`` while holding ``held``' decision."""
    return LAYOUT.qubit(f"anc.{agent}", 2 * pair_index(agent, held) + accept_bit(held, offered))


def initial_state(goods: Sequence[int]) -> SparseState:
    a, b, c = validate_goods(goods)
    amp = 1 / np.sqrt(3)
    base = LAYOUT.compose(**{"goods.A": GOOD_BITS[a], "goods.B": GOOD_BITS[b],
                             "goods.C": GOOD_BITS[c]})
    return SparseState(LAYOUT, {LAYOUT.write(base, "match.W", w): amp + 0j
                                for w in MEETING_W.values()})


def strategy_gates(profile: StrategyProfile) -> list[LocalOperator]:
    """Each agent's strategy for each held good, controlled on meeting someone and on the good."""
    gates = []
    for k, agent in enumerate(AGENTS):
        w_qubit = LAYOUT.qubit("match.W", k)
        goods_qubits = LAYOUT.qubits(f"goods.{agent}")
        for held in HOLDABLE[agent]:
            pair = pair_index(agent, held)
            targets = LAYOUT.qubits(f"anc.{agent}")[2 * pair: 2 * pair + 2]
            bits = GOOD_BITS[held]
            gate = LocalOperator(profile.strategy(agent, held), targets)
            gates.append(qsim.controlled(gate, (w_qubit,) + goods_qubits,
                                         (1, bits >> 1, bits & 1)))
    return gates


def _swap_registers() -> np.ndarray:
    perm = np.zeros((16, 16), dtype=complex)
    for x in range(4):
        for y in range(4):
            perm[(y << 2) | x, (x << 2) | y] = 1
    return perm


def swap_combinations(meeting: str) -> tuple[tuple[int, int], ...]:
    """Ordered (g, g') pairs: agent i holding g trades with agent j holding g'."""
    i, j = meeting
    return tuple((g, g2) for g, g2 in itertools.product(HOLDABLE[i], HOLDABLE[j]) if g != g2)


def combination_wires(meeting: str, g: int, g2: int) -> tuple[int, int]:
    i, j = meeting
    return ancilla_wire(i, g, g2), ancilla_wire(j, g2, g)


@lru_cache(maxsize=None)
def swap_gates() -> tuple[tuple[str, PatternControlled], ...]:
    """One goods swap per meeting pair.

    The swap fires when the pair is the one that met and, for at least one
    combination (g, g'), agent i's 'accept g' while holding g' wire and agent
    j's 'accept g while holding g'' wire both read 1. Goods registers are not
    consulted, and several agreeing combinations still swap only once.
    """
    swap = _swap_registers()
    out = []
    for meeting in MEETINGS:
        i, j = meeting
        combos = swap_combinations(meeting)
        wires = list(dict.fromkeys(w for g, g2 in combos for w in combination_wires(meeting, g, g2)))
        patterns = []
        for bits in itertools.product((0, 1), repeat=len(wires)):
            value = dict(zip(wires, bits))
            if any(all(value[w] for w in combination_wires(meeting, g, g2)) for g, g2 in combos):
                patterns.append((1, 1) + bits)
        controls = (LAYOUT.qubit("match.W", AGENTS.index(i)),
                    LAYOUT.qubit("match.W", AGENTS.index(j))) + tuple(wires)
        targets = LAYOUT.qubits(f"goods.{i}") + LAYOUT.qubits(f"goods.{j}")
        out.append((meeting, PatternControlled(LocalOperator(swap, targets), controls, patterns)))
    return tuple(out)


def agreeing_combinations(branch: "Branch") -> list[tuple[int, int]]:
    """Combinations whose two accept wires both read 1 in this branch."""
    bits = branch.ancilla
    offset = LAYOUT.qubit("anc.A")
    return [(g, g2) for g, g2 in swap_combinations(branch.meeting)
            if all(bits[w - offset] == "1" for w in combination_wires(branch.meeting, g, g2))]


@lru_cache(maxsize=None)
def consumption_gates() -> tuple[LocalOperator, ...]:
    """Flag toggled on holding the consumption good, then consumption -> production."""
    gates = []
    for agent in AGENTS:
        goods_q = LAYOUT.qubits(f"goods.{agent}")
        flag_q = LAYOUT.qubit(f"flag.{agent}")
        cons = GOOD_BITS[CONSUMES[agent]]
        prod = GOOD_BITS[PRODUCES[agent]]
        gates.append(qsim.controlled(LocalOperator(qsim.X, (flag_q,)), goods_q,
                                     (cons >> 1, cons & 1)))
        perm = np.eye(4, dtype=complex)
        perm[[cons, prod]] = perm[[prod, cons]]
        gates.append(qsim.controlled(LocalOperator(perm, goods_q), (flag_q,), (1,)))
    return tuple(gates)


def round_state(goods: Sequence[int], profile: StrategyProfile) -> SparseState:
    """Full 24-qubit state after one round started from the basis goods triple."""
    if not isinstance(profile, StrategyProfile):
        raise TypeError("round expansion needs a single StrategyProfile")
    state = initial_state(goods)
    ys = "Y" * len(STRATEGY_QUBITS)
    state = qsim.pauli_exp(state, STRATEGY_QUBITS, ys, profile.theta)
    for gate in strategy_gates(profile):
        state = qsim.apply(state, gate)
    state = qsim.pauli_exp(state, STRATEGY_QUBITS, ys, -profile.theta)
    for _, gate in swap_gates():
        state = qsim.apply(state, gate)
    for gate in consumption_gates():
        state = qsim.apply(state, gate)
    return state


def decode(label: int) -> tuple[tuple[int, int, int], str, str, tuple[int, int, int]]:
    goods = []
    for reg in GOODS_REGISTERS:
        bits = LAYOUT.read(label, reg)
        if bits not in BITS_GOOD:
            raise ValueError("goods register left in |00>")
        goods.append(BITS_GOOD[bits])
    w = LAYOUT.read(label, "match.W")
    anc = "".join(format(LAYOUT.read(label, f"anc.{a}"), "04b") for a in AGENTS)
    flags = tuple(LAYOUT.read(label, f"flag.{a}") for a in AGENTS)
    return tuple(goods), W_MEETING[w], anc, flags


def round_branches(goods: Sequence[int], profile: StrategyProfile) -> list[Branch]:
    state = round_state(goods, profile)
    branches = []
    for label, amp in sorted(state, key=lambda kv: kv[0]):
        g, meeting, anc, flags = decode(label)
        branches.append(Branch(amp, g, meeting, anc, flags))
    return branches


def branch_norm(branches: Sequence[Branch]):
    return sum((b.probability for b in branches), 0.0)


def traded(branch: Branch, before: Sequence[int]) -> bool:
    """Whether the meeting pair exchanged goods in this branch."""
    i, j = (AGENTS.index(a) for a in branch.meeting)
    return any(branch.goods[k] != before[k] or branch.flags[k] for k in (i, j))


def two_qubit_pauli(u: np.ndarray) -> dict[str, complex]:
    """Pauli-basis coefficients of a single 4x4 matrix."""
    out = {}
    for a, b in itertools.product("IXYZ", repeat=2):
        p = qsim.kron(qsim.PAULI[a], qsim.PAULI[b])
        c = np.trace(p.conj().T @ u) / 4
        if abs(c) > qsim.PRUNE_TOL:
            out[a + b] = complex(c)
    return out


def anticommutes_with_y(pauli: str) -> bool:
    """Odd number of X/Z letters: anticommutes with the all-Y string."""
    return sum(ch in "XZ" for ch in pauli) % 2 == 1


class PauliSum(dict):
    """Pauli string (one letter per strategy ancilla) -> coefficient."""

    def apply(self, state: SparseState, targets: Sequence[int] = STRATEGY_QUBITS) -> SparseState:
        out: dict[int, complex] = {}
        for pauli, coeff in self.items():
            for label, amp in qsim.pauli_string(state, targets, pauli):
                out[label] = out.get(label, 0.0) + coeff * amp
        return SparseState(state.layout, out)


def meeting_operator(profile: StrategyProfile, meeting: str, goods: Sequence[int]) -> PauliSum:
    """Pauli expansion of the meeting agents' joint strategy on the 12 strategy ancillas."""
    if meeting not in MEETINGS:
        raise ValueError(f"unknown meeting {meeting!r}")
    goods = validate_goods(goods)
    per_agent = []
    for k, agent in enumerate(AGENTS):
        if agent not in meeting:
            per_agent.append({"IIII": 1.0})
            continue
        held = goods[k]
        local = two_qubit_pauli(np.asarray(profile.strategy(agent, held)))
        pad = "II"
        if pair_index(agent, held) == 0:
            per_agent.append({p + pad: c for p, c in local.items()})
        else:
            per_agent.append({pad + p: c for p, c in local.items()})
    out = PauliSum()
    for (pa, ca), (pb, cb), (pc, cc) in itertools.product(*(d.items() for d in per_agent)):
        out[pa + pb + pc] = ca * cb * cc
    return out


def commutant_split(profile: StrategyProfile, meeting: str,
                    goods: Sequence[int]) -> tuple[PauliSum, PauliSum]:
    """Split the meeting operator into parts commuting / anticommuting with Y^(x)12."""
    full = meeting_operator(profile, meeting, goods)
    comm = PauliSum({p: c for p, c in full.items() if not anticommutes_with_y(p)})
    anti = PauliSum({p: c for p, c in full.items() if anticommutes_with_y(p)})
    return comm, anti


@dataclass(frozen=True)
class TwoPersonGame:
    """Two-agent trade of |0> (Alice) against |1> (Bob)."""

    k: np.ndarray
    a: tuple[complex, complex]
    b: tuple[complex, complex]
    theta: float = 0.0

    def __post_init__(self):
        k = np.asarray(self.k, dtype=complex).reshape(2, 2)
        object.__setattr__(self, "k", k)
        for name, vec in (("K", k.ravel()), ("a", self.a), ("b", self.b)):
            if abs(np.sum(np.abs(np.asarray(vec)) ** 2) - 1) > 1e-12:
                raise ValueError(f"{name} amplitudes are not normalised")


TWO_PERSON_LAYOUT = RegisterLayout((("psi.A", 1), ("psi.B", 1), ("anc.A", 1), ("anc.B", 1)))


def _prep(amps) -> np.ndarray:
    a0, a1 = amps
    return np.array([[a0, -np.conj(a1)], [a1, np.conj(a0)]], dtype=complex)


def two_person_trade(game: TwoPersonGame) -> tuple[float, SparseState]:
    """Success probability (both ancillas |1>) and the post-trade state."""
    lay = TWO_PERSON_LAYOUT
    state = SparseState(lay, {lay.compose(**{"psi.A": i, "psi.B": j}): game.k[i, j]
                              for i in range(2) for j in range(2)})
    anc = lay.qubits("anc.A") + lay.qubits("anc.B")
    state = qsim.pauli_exp(state, anc, "YY", game.theta)
    ua = qsim.controlled(LocalOperator(_prep(game.a), lay.qubits("anc.A")), lay.qubits("psi.A"), (0,))
    ub = qsim.controlled(LocalOperator(_prep(game.b), lay.qubits("anc.B")), lay.qubits("psi.B"), (1,))
    state = qsim.apply(qsim.apply(state, ua), ub)
    state = qsim.pauli_exp(state, anc, "YY", -game.theta)
    swap = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    cswap = qsim.controlled(LocalOperator(swap, lay.qubits("psi.A") + lay.qubits("psi.B")), anc, (1, 1))
    state = qsim.apply(state, cswap)
    success = sum(abs(v) ** 2 for k, v in state
                  if lay.read(k, "anc.A") == 1 and lay.read(k, "anc.B") == 1)
    return float(success), state
