"""BB84 on a single qubit, run through the same reporting pipeline.

Basis 0 is the computational basis, basis 1 the Hadamard-rotated one.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from .. import rng as rngmod
from ..adversary import AttackKind, AttackStrategy, to_fraction
from ..statevec import H, PureState, X, apply_circuit, branch_enumerate, measure, overlap
from .parties import ProtocolError
from .session import ConfigError, SessionConfig, SessionReport, finish_session

BASIS_NAMES = ("Z", "X")


def bb84_prepare(bit: int, basis: int) -> PureState:
    gates = ([X(0)] if bit else []) + ([H(0)] if basis else [])
    return apply_circuit(PureState.basis("0"), gates)


def bb84_measure(state: PureState, basis: int, rng: np.random.Generator) -> int:
    if basis:
        state = apply_circuit(state, [H(0)])
    bit, _ = measure(state, 0, rng)
    return bit


def basis_overlap() -> float:
    """Overlap of the bit-0 states of the two bases."""
    return overlap(bb84_prepare(0, 0), bb84_prepare(0, 1))


def _check_attack(attack: AttackStrategy) -> None:
    if attack.kind is AttackKind.INTERCEPT_ERASER:
        raise ConfigError("attack", "BB84 supports NONE or INTERCEPT_Z (computational-basis intercept-resend)")


@dataclass
class BB84Record:
    round_id: int
    alice_bit: int
    alice_basis: int
    bob_basis: int
    outcome: int
    registered: bool = True
    decoded: Optional[int] = None
    sifted: bool = False
    disclosed: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "round_id": self.round_id,
            "alice_bit": self.alice_bit,
            "alice_basis": BASIS_NAMES[self.alice_basis],
            "bob_basis": BASIS_NAMES[self.bob_basis],
            "outcomes": [self.outcome],
            "registered": self.registered,
            "decoded": self.decoded,
            "sifted": self.sifted,
            "disclosed": self.disclosed,
        }


def _intercept(state: PureState, attack: AttackStrategy, rng: np.random.Generator) -> PureState:
    if attack.kind is AttackKind.INTERCEPT_Z:
        # measuring in the computational basis and resending the eigenstate
        _, state = measure(state, 0, rng)
    return state


def play_bb84_round(config: SessionConfig, round_id: int) -> BB84Record:
    rng = rngmod.substream(config.seed, rngmod.ROUNDS, round_id)
    bit, alice_basis, bob_basis = (int(x) for x in rng.integers(0, 2, size=3))
    state = _intercept(bb84_prepare(bit, alice_basis), config.attack, rng)
    return BB84Record(round_id, bit, alice_basis, bob_basis, bb84_measure(state, bob_basis, rng))


def bb84_session(config: SessionConfig) -> tuple[SessionReport, list[BB84Record]]:
    """Random bit and basis per round; keep the rounds where the bases match."""
    _check_attack(config.attack)
    records = [play_bb84_round(config, rid) for rid in range(config.rounds)]
    sifted_ids = [r.round_id for r in records if r.alice_basis == r.bob_basis]
    alice_bits = {r.round_id: r.alice_bit for r in records}
    bob_bits = {rid: records[rid].outcome for rid in sifted_ids}
    mode_of = {rid: BASIS_NAMES[records[rid].alice_basis] for rid in sifted_ids}
    report = finish_session(records, alice_bits, bob_bits, sifted_ids, mode_of, config)
    return report, records


def bb84_exact_qber(attack: AttackStrategy) -> Fraction:
    """Exact sifted QBER, enumerating bit, basis and every measurement branch."""
    _check_attack(attack)
    wrong = 0.0
    for bit in (0, 1):
        for basis in (0, 1):
            sent = bb84_prepare(bit, basis)
            evan = ([(b.probability, b.collapsed) for b in branch_enumerate(sent, [0])]
                    if attack.kind is AttackKind.INTERCEPT_Z else [(1.0, sent)])
            for p_evan, received in evan:
                if basis:
                    received = apply_circuit(received, [H(0)])
                for b in branch_enumerate(received, [0]):
                    if b.outcome[0] != bit:
                        wrong += 0.25 * p_evan * b.probability
    if wrong < 0:
        raise ProtocolError("negative error weight")
    return to_fraction(wrong)
