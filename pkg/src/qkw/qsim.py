"""Exact sparse state-vector algebra over named qubit registers.

Amplitudes may be plain complex numbers or 1-d numpy arrays sharing one
batch length; every operation broadcasts over that batch so a whole
parameter grid can be pushed through a circuit in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

PRUNE_TOL = 1e-14

Amplitude = Union[complex, np.ndarray]

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron(*mats: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def _negligible(amp: Amplitude) -> bool:
    return bool(np.max(np.abs(amp)) < PRUNE_TOL)


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers; qubit 0 is the leftmost printed bit."""

    registers: tuple[tuple[str, int], ...]
    _offsets: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = [name for name, _ in self.registers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate register names in {names}")
        offsets, pos = {}, 0
        for name, count in self.registers:
            if count < 1:
                raise ValueError(f"register {name!r} must hold at least one qubit")
            offsets[name] = pos
            pos += count
        object.__setattr__(self, "_offsets", MappingProxyType(offsets))

    @property
    def width(self) -> int:
        return sum(count for _, count in self.registers)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.registers)

    def size(self, name: str) -> int:
        return dict(self.registers)[name]

    def qubits(self, name: str) -> tuple[int, ...]:
        start = self._offsets[name]
        return tuple(range(start, start + self.size(name)))

    def qubit(self, name: str, offset: int = 0) -> int:
        if not 0 <= offset < self.size(name):
            raise IndexError(f"offset {offset} outside register {name!r}")
        return self._offsets[name] + offset

    def locate(self, q: int) -> tuple[str, int]:
        for name, count in self.registers:
            start = self._offsets[name]
            if start <= q < start + count:
                return name, q - start
        raise IndexError(f"qubit {q} outside layout of width {self.width}")

    def bit(self, label: int, q: int) -> int:
        return (label >> (self.width - 1 - q)) & 1

    def read(self, label: int, name: str) -> int:
        value = 0
        for q in self.qubits(name):
            value = (value << 1) | self.bit(label, q)
        return value

    def write(self, label: int, name: str, value: int) -> int:
        qs = self.qubits(name)
        if not 0 <= value < (1 << len(qs)):
            raise ValueError(f"value {value} does not fit register {name!r}")
        for k, q in enumerate(qs):
            shift = self.width - 1 - q
            b = (value >> (len(qs) - 1 - k)) & 1
            label = (label & ~(1 << shift)) | (b << shift)
        return label

    def compose(self, **values: int) -> int:
        label = 0
        for name, value in values.items():
            label = self.write(label, name, value)
        return label

    def format(self, label: int) -> str:
        return format(label, f"0{self.width}b")

    def parse(self, bits: str) -> int:
        if len(bits) != self.width or set(bits) - {"0", "1"}:
            raise ValueError(f"expected {self.width} binary digits, got {bits!r}")
        return int(bits, 2)

    def sublayout(self, keep: Iterable[str]) -> "RegisterLayout":
        keep = set(keep)
        unknown = keep - set(self.names)
        if unknown:
            raise ValueError(f"unknown registers {sorted(unknown)}")
        return RegisterLayout(tuple((n, c) for n, c in self.registers if n in keep))

    def project(self, label: int, sub: "RegisterLayout") -> int:
        out = 0
        for name in sub.names:
            out = sub.write(out, name, self.read(label, name))
        return out


class SparseState:
    """Map from basis label to amplitude; treated as immutable."""

    __slots__ = ("layout", "_amps")

    def __init__(self, layout: RegisterLayout, amplitudes: Mapping[int, Amplitude]):
        self.layout = layout
        limit = 1 << layout.width
        amps = {}
        for label, amp in amplitudes.items():
            if not 0 <= label < limit:
                raise ValueError(f"label {label} outside layout")
            if not _negligible(amp):
                amps[label] = amp
        self._amps = MappingProxyType(amps)

    @classmethod
    def basis(cls, layout: RegisterLayout, **values: int) -> "SparseState":
        return cls(layout, {layout.compose(**values): 1.0 + 0j})

    @property
    def amplitudes(self) -> Mapping[int, Amplitude]:
        return self._amps

    def __len__(self) -> int:
        return len(self._amps)

    def __iter__(self):
        return iter(self._amps.items())

    def norm_squared(self) -> Amplitude:
        return sum((np.abs(a) ** 2 for a in self._amps.values()), 0.0)

    def amplitude(self, label: int) -> Amplitude:
        return self._amps.get(label, 0.0)

    def to_bits(self) -> dict[str, Amplitude]:
        return {self.layout.format(k): v for k, v in sorted(self._amps.items())}

    def __repr__(self) -> str:
        terms = [f"{v}|{b}>" for b, v in self.to_bits().items()]
        return "SparseState(" + " + ".join(terms) + ")"


class LocalOperator:
    """Dense matrix acting on an ordered list of qubits (first = most significant).

    The matrix may carry a leading batch axis: shape (n, 2**k, 2**k).
    """

    def __init__(self, matrix: np.ndarray, targets: Sequence[int]):
        matrix = np.asarray(matrix, dtype=complex)
        targets = tuple(int(t) for t in targets)
        dim = 1 << len(targets)
        if len(set(targets)) != len(targets):
            raise ValueError(f"repeated target qubits {targets}")
        if matrix.ndim not in (2, 3) or matrix.shape[-2:] != (dim, dim):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match {len(targets)} targets"
            )
        self.matrix = matrix
        self.targets = targets
        self._columns = None

    @property
    def batched(self) -> bool:
        return self.matrix.ndim == 3

    def unitarity_error(self) -> float:
        m = self.matrix
        prod = np.conj(np.swapaxes(m, -1, -2)) @ m
        return float(np.max(np.abs(prod - np.eye(m.shape[-1]))))

    def columns(self):
        """Per column, the nonzero (row, coefficient) entries."""
        if self._columns is None:
            m = self.matrix
            mask = np.abs(m) > 0
            if self.batched:
                mask = mask.any(axis=0)
            cols = []
            for c in range(m.shape[-1]):
                rows = np.flatnonzero(mask[:, c])
                cols.append(tuple((int(r), m[..., r, c]) for r in rows))
            self._columns = tuple(cols)
        return self._columns


class PatternControlled:
    """``op`` applied when the control qubits read any of the listed bit patterns.

    Equivalent to a dense controlled operator whose active blocks are the
    listed patterns, without materialising the 2**(m+k) matrix.
    """

    def __init__(self, op: LocalOperator, controls: Sequence[int], patterns: Iterable[Sequence[int]]):
        controls = tuple(int(c) for c in controls)
        if set(controls) & set(op.targets):
            raise ValueError("control and target qubits overlap")
        if len(set(controls)) != len(controls):
            raise ValueError("repeated control qubits")
        active = set()
        for pat in patterns:
            pat = tuple(int(v) for v in pat)
            if len(pat) != len(controls) or set(pat) - {0, 1}:
                raise ValueError(f"bad control pattern {pat}")
            value = 0
            for v in pat:
                value = (value << 1) | v
            active.add(value)
        self.op = op
        self.controls = controls
        self.active = frozenset(active)

    @property
    def targets(self) -> tuple[int, ...]:
        return self.controls + self.op.targets


def apply(state: SparseState, op: Union[LocalOperator, PatternControlled]) -> SparseState:
    """Apply ``op`` on its targets and identity elsewhere."""
    width = state.layout.width
    if isinstance(op, PatternControlled):
        for t in op.targets:
            if not 0 <= t < width:
                raise IndexError(f"target qubit {t} outside layout of width {width}")
        cshifts = [width - 1 - c for c in op.controls]
        hit, miss = {}, {}
        for label, amp in state:
            value = 0
            for s in cshifts:
                value = (value << 1) | ((label >> s) & 1)
            (hit if value in op.active else miss)[label] = amp
        moved = apply(SparseState(state.layout, hit), op.op)
        out = dict(miss)
        for label, amp in moved:
            out[label] = out.get(label, 0.0) + amp
        return SparseState(state.layout, out)
    for t in op.targets:
        if not 0 <= t < width:
            raise IndexError(f"target qubit {t} outside layout of width {width}")
    shifts = [width - 1 - t for t in op.targets]
    k = len(shifts)
    clear = ~sum(1 << s for s in shifts)
    cols = op.columns()
    out: dict[int, Amplitude] = {}
    for label, amp in state:
        col = 0
        for s in shifts:
            col = (col << 1) | ((label >> s) & 1)
        base = label & clear
        for row, coeff in cols[col]:
            new = base
            for j, s in enumerate(shifts):
                if (row >> (k - 1 - j)) & 1:
                    new |= 1 << s
            out[new] = out.get(new, 0.0) + amp * coeff
    return SparseState(state.layout, out)


def controlled(op: LocalOperator, controls: Sequence[int], values: Sequence[int]) -> LocalOperator:
    """Block operator acting as ``op`` only when ``controls`` read ``values``."""
    controls = tuple(int(c) for c in controls)
    values = tuple(int(v) for v in values)
    if len(controls) != len(values):
        raise ValueError("one control value is needed per control qubit")
    if set(controls) & set(op.targets):
        raise ValueError("control and target qubits overlap")
    if any(v not in (0, 1) for v in values):
        raise ValueError("control values must be 0 or 1")
    m = len(controls)
    d = op.matrix.shape[-1]
    block = 0
    for v in values:
        block = (block << 1) | v
    full = np.eye(d << m, dtype=complex)
    if op.batched:
        full = np.broadcast_to(full, (op.matrix.shape[0],) + full.shape).copy()
    sl = slice(block * d, (block + 1) * d)
    full[..., sl, sl] = op.matrix
    return LocalOperator(full, controls + op.targets)


def pauli_string(state: SparseState, targets: Sequence[int], paulis: str) -> SparseState:
    """Apply a tensor product of Pauli letters on ``targets``."""
    if len(targets) != len(paulis):
        raise ValueError("one Pauli letter per target is required")
    width = state.layout.width
    out = {}
    for label, amp in state:
        new, phase = label, 1 + 0j
        for t, p in zip(targets, paulis):
            s = width - 1 - t
            b = (label >> s) & 1
            if p in "XY":
                new ^= 1 << s
            if p == "Y":
                phase *= 1j if b == 0 else -1j
            elif p == "Z" and b:
                phase = -phase
            elif p not in "IXYZ":
                raise ValueError(f"unknown Pauli letter {p!r}")
        out[new] = out.get(new, 0.0) + amp * phase
    return SparseState(state.layout, out)


def pauli_exp(state: SparseState, targets: Sequence[int], paulis: str, theta: float) -> SparseState:
    """Apply exp(i*theta*P) = cos(theta) I + i sin(theta) P for a Pauli string P."""
    rotated = pauli_string(state, targets, paulis)
    c, s = np.cos(theta), np.sin(theta)
    out = {k: c * v for k, v in state}
    for k, v in rotated:
        out[k] = out.get(k, 0.0) + 1j * s * v
    return SparseState(state.layout, out)


@dataclass(frozen=True)
class DensityBlock:
    """Square matrix over an explicit list of basis labels of ``layout``."""

    layout: RegisterLayout
    labels: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if self.matrix.shape[-2:] != (n, n):
            raise ValueError("matrix shape does not match the label list")

    def trace(self) -> Amplitude:
        return np.trace(self.matrix, axis1=-2, axis2=-1)

    def purity(self) -> Amplitude:
        return np.trace(self.matrix @ self.matrix, axis1=-2, axis2=-1).real

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))), initial=0.0) < tol)

    def entry(self, row_label: int, col_label: int) -> Amplitude:
        index = {k: i for i, k in enumerate(self.labels)}
        if row_label not in index or col_label not in index:
            return 0.0
        return self.matrix[..., index[row_label], index[col_label]]

    def as_bits(self) -> dict[tuple[str, str], Amplitude]:
        out = {}
        for i, a in enumerate(self.labels):
            for j, b in enumerate(self.labels):
                v = self.matrix[..., i, j]
                if not _negligible(v):
                    out[(self.layout.format(a), self.layout.format(b))] = v
        return out


def _batch_shape(states: Iterable[SparseState]) -> tuple[int, ...]:
    for st in states:
        for _, amp in st:
            return np.shape(amp)
    return ()


def outer_evolve(left: SparseState, right: SparseState) -> DensityBlock:
    """Return the dyad |left><right| as a block over the union of supports."""
    if left.layout != right.layout:
        raise ValueError("left and right states use different layouts")
    labels = tuple(sorted(set(left.amplitudes) | set(right.amplitudes)))
    index = {k: i for i, k in enumerate(labels)}
    batch = _batch_shape((left, right))
    mat = np.zeros(batch + (len(labels), len(labels)), dtype=complex)
    for a, va in left:
        for b, vb in right:
            mat[..., index[a], index[b]] += va * np.conj(vb)
    return DensityBlock(left.layout, labels, mat)


def partial_trace(block: DensityBlock, keep: Iterable[str]) -> DensityBlock:
    """Trace out every register not named in ``keep``."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep must name at least one register")
    layout = block.layout
    sub = layout.sublayout(keep)
    traced = [n for n in layout.names if n not in set(keep)]
    trace_sub = layout.sublayout(traced) if traced else None
    kept = [layout.project(k, sub) for k in block.labels]
    rest = [layout.project(k, trace_sub) if trace_sub else 0 for k in block.labels]
    labels = tuple(sorted(set(kept)))
    index = {k: i for i, k in enumerate(labels)}
    out = np.zeros(block.matrix.shape[:-2] + (len(labels), len(labels)), dtype=complex)
    n = len(block.labels)
    for i in range(n):
        for j in range(n):
            if rest[i] == rest[j]:
                out[..., index[kept[i]], index[kept[j]]] += block.matrix[..., i, j]
    return DensityBlock(sub, labels, out)
