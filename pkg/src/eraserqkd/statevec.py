"""Dense pure-state simulation of small qubit registers.

Qubit 0 is the most significant bit of the basis index. For the two-qubit
register |QF> used throughout the package, Q is qubit 0 and F is qubit 1, so
the amplitude of |qf> lives at index ``2*q + f``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_QUBITS = 4
NORM_TOL = 1e-9
UNITARY_TOL = 1e-12
# Branches whose probability falls below this are treated as impossible.
ZERO_PROB = 1e-14

Q, F = 0, 1

_SQRT1_2 = 1 / math.sqrt(2)


class StateError(ValueError):
    """Malformed register, gate, or measurement request."""


class UnitarityError(RuntimeError):
    """A gate changed the norm of the state it acted on."""


@dataclass(frozen=True, eq=False)
class PureState:
    n_qubits: int
    amps: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise StateError(f"register size must be 1..{MAX_QUBITS}, got {self.n_qubits}")
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.shape != (2**self.n_qubits,):
            raise StateError(f"expected {2**self.n_qubits} amplitudes, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise StateError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def _trusted(cls, n_qubits: int, amps: np.ndarray) -> PureState:
        # skips validation; callers guarantee shape and normalization
        obj = object.__new__(cls)
        amps.setflags(write=False)
        object.__setattr__(obj, "n_qubits", n_qubits)
        object.__setattr__(obj, "amps", amps)
        return obj

    @classmethod
    def basis(cls, bits: Sequence[int] | str) -> PureState:
        """Computational basis state, e.g. ``PureState.basis("01")`` is |01>."""
        bits = [int(b) for b in bits]
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[_index(bits)] = 1.0
        return cls(len(bits), amps)

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex], normalize: bool = False) -> PureState:
        amps = np.asarray(amps, dtype=complex)
        if normalize:
            amps = amps / np.linalg.norm(amps)
        n = int(round(math.log2(amps.size))) if amps.size else 0
        return cls(n, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def norm(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def equals(self, other: PureState, atol: float = 1e-12, up_to_phase: bool = False) -> bool:
        """Amplitude-wise comparison, optionally ignoring a global phase."""
        if self.n_qubits != other.n_qubits:
            return False
        a, b = self.amps, other.amps
        if up_to_phase:
            k = int(np.argmax(np.abs(b)))
            if abs(a[k]) < ZERO_PROB:
                return False
            b = b * (a[k] / abs(a[k])) / (b[k] / abs(b[k]))
        return bool(np.max(np.abs(a - b)) <= atol)

    def __repr__(self) -> str:
        terms = []
        for i, amp in enumerate(self.amps):
            if abs(amp) > ZERO_PROB:
                label = format(i, f"0{self.n_qubits}b")
                terms.append(f"({amp.real:+.6g}{amp.imag:+.6g}j)|{label}>")
        return "PureState(" + " ".join(terms) + ")"


def _index(bits: Sequence[int]) -> int:
    idx = 0
    for b in bits:
        if b not in (0, 1):
            raise StateError(f"bit values must be 0 or 1, got {b!r}")
        idx = (idx << 1) | b
    return idx


def bit_of(index: int, qubit: int, n_qubits: int) -> int:
    return (index >> (n_qubits - 1 - qubit)) & 1


class GateKind(enum.Enum):
    H = "H"
    X = "X"
    Z = "Z"
    PHASE = "PHASE"
    CNOT = "CNOT"


@dataclass(frozen=True)
class GateSpec:
    kind: GateKind
    target: int
    control: int | None = None
    phi: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is GateKind.CNOT:
            if self.control is None:
                raise StateError("CNOT needs a control qubit")
            if self.control == self.target:
                raise StateError("CNOT control and target must differ")
        elif self.control is not None:
            raise StateError(f"{self.kind.value} takes no control qubit")
        if not math.isfinite(self.phi):
            raise StateError("phase angle must be finite")

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)


def H(target: int) -> GateSpec:
    return GateSpec(GateKind.H, target)


def X(target: int) -> GateSpec:
    return GateSpec(GateKind.X, target)


def Z(target: int) -> GateSpec:
    return GateSpec(GateKind.Z, target)


def phase(target: int, phi: float) -> GateSpec:
    return GateSpec(GateKind.PHASE, target, phi=phi)


def CNOT(control: int, target: int) -> GateSpec:
    return GateSpec(GateKind.CNOT, target, control=control)


_ONE_QUBIT = {
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2,
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}


@lru_cache(maxsize=256)
def gate_matrix(gate: GateSpec, n_qubits: int) -> np.ndarray:
    """Full ``2^n x 2^n`` matrix of ``gate`` acting on an n-qubit register."""
    for q in gate.qubits():
        if not 0 <= q < n_qubits:
            raise StateError(f"qubit index {q} out of range for {n_qubits}-qubit register")
    dim = 2**n_qubits
    if gate.kind is GateKind.CNOT:
        m = np.zeros((dim, dim), dtype=complex)
        flip = 1 << (n_qubits - 1 - gate.target)
        for i in range(dim):
            j = i ^ flip if bit_of(i, gate.control, n_qubits) else i
            m[j, i] = 1.0
    else:
        if gate.kind is GateKind.PHASE:
            single = np.diag([1.0, np.exp(1j * gate.phi)]).astype(complex)
        else:
            single = _ONE_QUBIT[gate.kind]
        m = np.array([[1.0 + 0j]])
        for q in range(n_qubits):
            m = np.kron(m, single if q == gate.target else np.eye(2))
    m.setflags(write=False)
    return m


def apply_gate(state: PureState, gate: GateSpec) -> PureState:
    before = state.norm()
    amps = gate_matrix(gate, state.n_qubits) @ state.amps
    after = float(np.vdot(amps, amps).real)
    if abs(after - before) > UNITARY_TOL:
        raise UnitarityError(f"{gate} changed norm^2 from {before!r} to {after!r}")
    return PureState._trusted(state.n_qubits, amps)


def apply_circuit(state: PureState, gates: Sequence[GateSpec]) -> PureState:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


@lru_cache(maxsize=None)
def _projector_mask(n_qubits: int, qubits: tuple[int, ...], outcome: tuple[int, ...]) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    mask = np.ones(idx.shape, dtype=bool)
    for q, b in zip(qubits, outcome):
        mask &= ((idx >> (n_qubits - 1 - q)) & 1) == b
    mask.setflags(write=False)
    return mask


def _check_qubits(state: PureState, qubits: Sequence[int]) -> None:
    if len(set(qubits)) != len(qubits):
        raise StateError(f"duplicate qubits in {list(qubits)}")
    for q in qubits:
        if not 0 <= q < state.n_qubits:
            raise StateError(f"qubit index {q} out of range for {state.n_qubits}-qubit register")


def measure(state: PureState, qubit: int, rng: np.random.Generator) -> tuple[int, PureState]:
    """Projective Z-basis measurement of one qubit.

    Returns the outcome bit and the renormalized post-measurement state.
    """
    _check_qubits(state, [qubit])
    probs = state.probabilities()
    one = _projector_mask(state.n_qubits, (qubit,), (1,))
    p1 = float(probs[one].sum())
    total = float(probs.sum())
    if total <= ZERO_PROB:
        raise StateError("cannot measure a state with zero total probability")
    bit = 1 if rng.random() * total < p1 else 0
    p = p1 if bit else total - p1
    amps = np.where(one if bit else ~one, state.amps, 0) / math.sqrt(p)
    return bit, PureState._trusted(state.n_qubits, amps)


@dataclass(frozen=True)
class Branch:
    outcome: tuple[int, ...]
    probability: float
    collapsed: PureState


def branch_enumerate(state: PureState, qubits: Sequence[int]) -> list[Branch]:
    """All outcomes of measuring ``qubits`` with their exact Born weights."""
    qubits = list(qubits)
    _check_qubits(state, qubits)
    probs = state.probabilities()
    branches = []
    for outcome in itertools.product((0, 1), repeat=len(qubits)):
        mask = _projector_mask(state.n_qubits, tuple(qubits), outcome)
        p = float(probs[mask].sum())
        if p <= ZERO_PROB:
            continue
        amps = np.where(mask, state.amps, 0) / math.sqrt(p)
        branches.append(Branch(outcome, p, PureState._trusted(state.n_qubits, amps)))
    return branches


def overlap(a: PureState, b: PureState) -> float:
    """Squared inner product ``|<a|b>|^2``."""
    if a.n_qubits != b.n_qubits:
        raise StateError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)
