"""Intercept-resend eavesdroppers and an exact QBER oracle.

Evan sits on the two-qubit channel. Each strategy is implemented twice: once
as a sampled action (``apply_attack``) used by sessions, once as an exact
list of weighted branches (``attack_branches``) used by the oracle.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np

from .protocol.parties import (
    CIRCUIT_ERASERS,
    AliceSettings,
    Eraser,
    alice_prepare_circuit,
    bob_decode,
    bob_eraser_circuit,
)
from .statevec import F, Q, PureState, branch_enumerate, measure

# Probabilities here are dyadic rationals; floats are snapped to the nearest
# fraction with a bounded denominator and must agree to this tolerance.
_MAX_DENOMINATOR = 1 << 20
_SNAP_TOL = 1e-12


class AttackKind(enum.Enum):
    NONE = "NONE"
    INTERCEPT_Z = "INTERCEPT_Z"
    INTERCEPT_ERASER = "INTERCEPT_ERASER"


class Target(enum.Enum):
    Q = "Q"
    F = "F"
    BOTH = "BOTH"

    @property
    def qubits(self) -> tuple[int, ...]:
        return {Target.Q: (Q,), Target.F: (F,), Target.BOTH: (Q, F)}[self]


@dataclass(frozen=True)
class AttackStrategy:
    kind: AttackKind = AttackKind.NONE
    targets: Optional[Target] = None
    variant: Optional[Eraser] = None

    def __post_init__(self) -> None:
        if self.kind is AttackKind.INTERCEPT_Z and self.targets is None:
            raise ValueError("INTERCEPT_Z needs targets Q, F or BOTH")
        if self.kind is AttackKind.INTERCEPT_ERASER and self.variant not in CIRCUIT_ERASERS:
            raise ValueError("INTERCEPT_ERASER needs variant A or B")
        if self.kind is not AttackKind.INTERCEPT_Z and self.targets is not None:
            raise ValueError(f"{self.kind.value} takes no targets")
        if self.kind is not AttackKind.INTERCEPT_ERASER and self.variant is not None:
            raise ValueError(f"{self.kind.value} takes no eraser variant")

    @classmethod
    def none(cls) -> AttackStrategy:
        return cls()

    @classmethod
    def intercept_z(cls, targets: Target | str = Target.BOTH) -> AttackStrategy:
        return cls(AttackKind.INTERCEPT_Z, targets=Target(targets))

    @classmethod
    def intercept_eraser(cls, variant: Eraser | str = Eraser.CIRCUIT_A) -> AttackStrategy:
        if isinstance(variant, str) and variant in ("A", "B"):
            variant = f"CIRCUIT_{variant}"
        return cls(AttackKind.INTERCEPT_ERASER, variant=Eraser(variant))

    @classmethod
    def parse(cls, text: str) -> AttackStrategy:
        """Inverse of ``label``: ``NONE``, ``INTERCEPT_Z(BOTH)``, ``INTERCEPT_ERASER(A)``."""
        m = re.fullmatch(r"\s*([A-Z_]+)\s*(?:\(\s*([A-Z_]+)\s*\))?\s*", text)
        if not m:
            raise ValueError(f"cannot parse attack {text!r}")
        kind, arg = m.groups()
        if kind == "NONE" and arg is None:
            return cls.none()
        if kind == "INTERCEPT_Z" and arg:
            return cls.intercept_z(arg)
        if kind == "INTERCEPT_ERASER" and arg:
            return cls.intercept_eraser(arg)
        raise ValueError(f"cannot parse attack {text!r}")

    @property
    def label(self) -> str:
        if self.kind is AttackKind.INTERCEPT_Z:
            return f"INTERCEPT_Z({self.targets.value})"
        if self.kind is AttackKind.INTERCEPT_ERASER:
            return f"INTERCEPT_ERASER({self.variant.value[-1]})"
        return "NONE"


ALL_STRATEGIES = (
    AttackStrategy.none(),
    AttackStrategy.intercept_z("Q"),
    AttackStrategy.intercept_z("F"),
    AttackStrategy.intercept_z("BOTH"),
    AttackStrategy.intercept_eraser("A"),
    AttackStrategy.intercept_eraser("B"),
)


@dataclass(frozen=True)
class AttackOutcome:
    evan_guess: Optional[int]
    disturbed_state: PureState


def _resend(guess: int) -> PureState:
    # Evan poses as Alice in the entangled mode.
    return alice_prepare_circuit(AliceSettings(guess, wpi=True))


def apply_attack(state: PureState, strategy: AttackStrategy, rng: np.random.Generator) -> AttackOutcome:
    if state.n_qubits != 2:
        raise ValueError("attacks act on the two-qubit Q/F channel")
    if strategy.kind is AttackKind.NONE:
        return AttackOutcome(None, state)
    if strategy.kind is AttackKind.INTERCEPT_Z:
        guess = None
        for qubit in strategy.targets.qubits:
            bit, state = measure(state, qubit, rng)
            if qubit == Q:
                guess = bit
        return AttackOutcome(guess, state)
    probe = bob_eraser_circuit(state, strategy.variant)
    q, probe = measure(probe, Q, rng)
    f, _ = measure(probe, F, rng)
    guess = bob_decode(strategy.variant, (q, f), True)
    return AttackOutcome(guess, _resend(guess))


def attack_branches(state: PureState, strategy: AttackStrategy) -> list[tuple[float, AttackOutcome]]:
    """Every way the attack can go, with its exact probability."""
    if strategy.kind is AttackKind.NONE:
        return [(1.0, AttackOutcome(None, state))]
    if strategy.kind is AttackKind.INTERCEPT_Z:
        qubits = strategy.targets.qubits
        out = []
        for b in branch_enumerate(state, qubits):
            guess = b.outcome[qubits.index(Q)] if Q in qubits else None
            out.append((b.probability, AttackOutcome(guess, b.collapsed)))
        return out
    probe = bob_eraser_circuit(state, strategy.variant)
    resent: dict[int, float] = {}
    for b in branch_enumerate(probe, [Q, F]):
        guess = bob_decode(strategy.variant, b.outcome, True)
        resent[guess] = resent.get(guess, 0.0) + b.probability
    return [(p, AttackOutcome(g, _resend(g))) for g, p in sorted(resent.items())]


def to_fraction(x: float) -> Fraction:
    frac = Fraction(x).limit_denominator(_MAX_DENOMINATOR)
    if abs(float(frac) - x) > _SNAP_TOL:
        raise ArithmeticError(f"{x!r} is not close to a simple fraction")
    return frac


def _alice_states(alice_bit: int, eraser: Eraser) -> list[tuple[float, PureState]]:
    if eraser is Eraser.NONE:
        # F carries a uniformly random fill in this mode
        return [(0.5, alice_prepare_circuit(AliceSettings(alice_bit, False, fill))) for fill in (0, 1)]
    return [(1.0, alice_prepare_circuit(AliceSettings(alice_bit, True)))]


def exact_mode_qber(strategy: AttackStrategy, alice_bit: int, eraser: Eraser) -> Fraction:
    """P(Bob's bit != Alice's bit | the round sifts), by full branch enumeration.

    The sifted mode is implied by Bob's setting: NONE pairs with Alice sending
    no which-path information, CIRCUIT_A/B with Alice entangling F.
    """
    if eraser not in (Eraser.NONE, *CIRCUIT_ERASERS):
        raise ValueError(f"{eraser.value} is not a circuit-backend setting")
    wrong = valid = 0.0
    for w_alice, sent in _alice_states(alice_bit, eraser):
        for w_evan, outcome in attack_branches(sent, strategy):
            received = bob_eraser_circuit(outcome.disturbed_state, eraser)
            for b in branch_enumerate(received, [Q, F]):
                weight = w_alice * w_evan * b.probability
                decoded = bob_decode(eraser, b.outcome, True)
                if decoded is None:
                    continue
                valid += weight
                if decoded != alice_bit:
                    wrong += weight
    return to_fraction(wrong / valid)


def normalize_policy(policy: Mapping[Eraser, float]) -> dict[Eraser, Fraction]:
    weights = {Eraser(k): to_fraction(float(v)) if not isinstance(v, Fraction) else v
               for k, v in policy.items()}
    total = sum(weights.values())
    if total <= 0 or any(w < 0 for w in weights.values()):
        raise ValueError(f"eraser policy needs non-negative weights with a positive sum: {policy}")
    return {k: w / total for k, w in weights.items() if w}


def overall_qber(strategy: AttackStrategy, bob_eraser_policy: Mapping[Eraser, float]) -> Fraction:
    """Expected QBER of the whole sifted key.

    Half the sifted rounds come from the no-WPI/no-eraser mode and half from
    the WPI/eraser mode, the latter split by Bob's eraser policy; Alice's bit
    is uniform.
    """
    policy = normalize_policy(bob_eraser_policy)
    half = Fraction(1, 2)

    def bit_avg(eraser: Eraser) -> Fraction:
        return half * (exact_mode_qber(strategy, 0, eraser) + exact_mode_qber(strategy, 1, eraser))

    entangled = sum((w * bit_avg(e) for e, w in policy.items()), Fraction(0))
    return half * bit_avg(Eraser.NONE) + half * entangled


def mode_table(strategies=ALL_STRATEGIES) -> list[dict]:
    """Exact QBER per (strategy, eraser variant, mode, alice bit)."""
    rows = []
    for strategy in strategies:
        for eraser in (Eraser.NONE, *CIRCUIT_ERASERS):
            mode = "NO_WPI_NO_ERASER" if eraser is Eraser.NONE else "WPI_ERASER"
            for bit in (0, 1):
                rows.append({
                    "strategy": strategy.label,
                    "eraser_variant": eraser.value,
                    "mode": mode,
                    "alice_bit": bit,
                    "qber": exact_mode_qber(strategy, bit, eraser),
                })
    return rows
