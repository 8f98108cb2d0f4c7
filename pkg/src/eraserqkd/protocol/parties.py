"""What Alice and Bob do in a single round, and the public sifting step."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .. import photonic
from ..photonic import DetectionDistribution, EraserOptics, Tagging
from ..statevec import CNOT, F, H, Q, X, Z, PureState, apply_circuit, measure


class ProtocolError(ValueError):
    pass


class Backend(enum.Enum):
    CIRCUIT = "CIRCUIT"
    PHOTONIC = "PHOTONIC"


class Eraser(enum.Enum):
    NONE = "NONE"
    CIRCUIT_A = "CIRCUIT_A"
    CIRCUIT_B = "CIRCUIT_B"
    PHOTONIC_TIMEBIN = "PHOTONIC_TIMEBIN"
    PHOTONIC_PBS = "PHOTONIC_PBS"
    PHOTONIC_ABSORB = "PHOTONIC_ABSORB"

    @property
    def backend(self) -> Backend | None:
        if self is Eraser.NONE:
            return None
        return Backend.CIRCUIT if self.value.startswith("CIRCUIT") else Backend.PHOTONIC


CIRCUIT_ERASERS = (Eraser.CIRCUIT_A, Eraser.CIRCUIT_B)
PHOTONIC_ERASERS = (Eraser.PHOTONIC_TIMEBIN, Eraser.PHOTONIC_PBS, Eraser.PHOTONIC_ABSORB)

# The which-path tagging Alice must use for each photonic eraser to be able to undo it.
PHOTONIC_TAGGING = {
    Eraser.PHOTONIC_TIMEBIN: Tagging.TIMEBIN,
    Eraser.PHOTONIC_PBS: Tagging.POLARIZATION,
    Eraser.PHOTONIC_ABSORB: Tagging.POLARIZATION,
}

_OPTICS = {
    Eraser.NONE: EraserOptics.NONE,
    Eraser.PHOTONIC_TIMEBIN: EraserOptics.TIMEBIN,
    Eraser.PHOTONIC_PBS: EraserOptics.PBS,
    Eraser.PHOTONIC_ABSORB: EraserOptics.ABSORB,
}


@dataclass(frozen=True)
class AliceSettings:
    """bit sets the phase (0 or pi); wpi adds which-path tagging; flag_fill is F when wpi is off."""

    bit: int
    wpi: bool
    flag_fill: int = 0

    def __post_init__(self) -> None:
        if self.bit not in (0, 1) or self.flag_fill not in (0, 1):
            raise ProtocolError(f"bit and flag_fill must be 0 or 1: {self}")


@dataclass(frozen=True)
class BobSettings:
    eraser: Eraser = Eraser.NONE


# circuit outcomes are (q, f); photonic ones are (detector, time_bin) or None if absorbed
Outcome = Union[tuple[int, int], tuple[str, int], None]


@dataclass(frozen=True)
class BobResult:
    outcomes: Outcome
    registered: bool


# --- circuit backend --------------------------------------------------------

@lru_cache(maxsize=None)
def alice_prepare_circuit(settings: AliceSettings) -> PureState:
    gates = []
    if not settings.wpi and settings.flag_fill:
        gates.append(X(F))
    gates.append(H(Q))
    if settings.wpi:
        gates.append(CNOT(Q, F))
    if settings.bit:
        gates.append(Z(Q))
    gates.append(H(Q))
    return apply_circuit(PureState.basis("00"), gates)


_ERASER_GATES = {
    Eraser.NONE: [],
    Eraser.CIRCUIT_A: [H(F)],
    Eraser.CIRCUIT_B: [CNOT(Q, F), H(Q)],
}


def bob_eraser_circuit(state: PureState, eraser: Eraser) -> PureState:
    """State on Bob's side right before his two Z-basis measurements."""
    try:
        gates = _ERASER_GATES[eraser]
    except KeyError:
        raise ProtocolError(f"{eraser.value} is not a circuit-backend setting") from None
    return apply_circuit(state, gates)


def bob_measure_circuit(state: PureState, settings: BobSettings, rng: np.random.Generator) -> BobResult:
    state = bob_eraser_circuit(state, settings.eraser)
    q, state = measure(state, Q, rng)
    f, _ = measure(state, F, rng)
    return BobResult((q, f), True)


# --- photonic backend -------------------------------------------------------

def alice_prepare_photonic(settings: AliceSettings, tagging: Tagging) -> photonic.PhotonState:
    """Photon state on the two channels leaving Alice's second beam splitter.

    Without which-path information the time-bin sender drops the delay, and
    the polarization sender turns both arm polarizers to 0 degrees so the
    photon still carries a polarization Bob's optics can act on.
    """
    phi = math.pi * settings.bit
    if settings.wpi:
        return photonic.run(photonic.interferometer(phi, tagging))
    if tagging is Tagging.POLARIZATION:
        return photonic.run(photonic.interferometer(phi, tagging, arm_angles=(0, 0)))
    return photonic.run(photonic.interferometer(phi, Tagging.NONE))


@lru_cache(maxsize=None)
def photonic_detection(settings: AliceSettings, tagging: Tagging, eraser: Eraser) -> DetectionDistribution:
    return photonic.detect(_receive(alice_prepare_photonic(settings, tagging), eraser))


def _receive(state: photonic.PhotonState, eraser: Eraser) -> photonic.PhotonState:
    try:
        optics = _OPTICS[eraser]
    except KeyError:
        raise ProtocolError(f"{eraser.value} is not a photonic-backend setting") from None
    return photonic.run(photonic.receiver(optics), state)


def sample_detection(dist: DetectionDistribution, rng: np.random.Generator) -> tuple[str, int] | None:
    u = rng.random()
    acc = 0.0
    for key, p in dist.entries.items():
        acc += p
        if u < acc:
            return key
    return None


def photonic_registered(eraser: Eraser, outcome: tuple[str, int] | None) -> bool:
    if outcome is None:
        return False
    if eraser is Eraser.PHOTONIC_TIMEBIN:
        return outcome[1] == photonic.INTERFERING_BIN
    return True


def bob_measure_photonic(state: photonic.PhotonState, settings: BobSettings,
                         rng: np.random.Generator) -> BobResult:
    outcome = sample_detection(photonic.detect(_receive(state, settings.eraser)), rng)
    return BobResult(outcome, photonic_registered(settings.eraser, outcome))


# --- decoding and sifting ---------------------------------------------------

_PHOTONIC_BITS = {
    Eraser.NONE: {"D1": 0, "D2": 1},
    Eraser.PHOTONIC_PBS: {"D1": 0, "D4": 0, "D2": 1, "D3": 1},
    Eraser.PHOTONIC_ABSORB: {"D1": 0, "D2": 1},
    Eraser.PHOTONIC_TIMEBIN: {"D1": 0, "D2": 1},
}


def bob_decode(eraser: Eraser, outcomes: Outcome, registered: bool) -> Optional[int]:
    """Bit Bob infers from his detectors, or None when nothing usable was registered."""
    if not registered or outcomes is None:
        return None
    first, second = outcomes
    if isinstance(first, str):
        return _PHOTONIC_BITS[eraser][first]
    if eraser is Eraser.NONE:
        return first
    if eraser is Eraser.CIRCUIT_A:
        return int(first != second)
    if eraser is Eraser.CIRCUIT_B:
        return int(first == second)
    raise ProtocolError(f"cannot decode circuit outcomes with {eraser.value}")


@dataclass(frozen=True)
class AliceAnnouncement:
    round_id: int
    wpi: bool


@dataclass(frozen=True)
class BobAnnouncement:
    round_id: int
    eraser: Eraser
    registered: bool


def is_valid_mode(wpi: bool, eraser: Eraser, registered: bool) -> bool:
    if wpi:
        return eraser is not Eraser.NONE and registered
    return eraser is Eraser.NONE


def sift(alice: Sequence[AliceAnnouncement], bob: Sequence[BobAnnouncement]) -> list[int]:
    """Round ids kept for the key, computed from public announcements only."""
    if len(alice) != len(bob):
        raise ProtocolError(f"announcement lists differ in length: {len(alice)} vs {len(bob)}")
    kept = []
    for a, b in zip(alice, bob):
        if a.round_id != b.round_id:
            raise ProtocolError(f"announcements out of step: round {a.round_id} vs {b.round_id}")
        if is_valid_mode(a.wpi, b.eraser, b.registered):
            kept.append(a.round_id)
    return kept


def estimate_qber(alice_bits: Mapping[int, int], bob_bits: Mapping[int, Optional[int]],
                  disclosed_ids: Sequence[int]) -> float:
    """Fraction of disclosed rounds where the two parties' bits differ."""
    if not disclosed_ids:
        raise ProtocolError("cannot estimate QBER from an empty disclosure set")
    errors = sum(alice_bits[i] != bob_bits[i] for i in disclosed_ids)
    return errors / len(disclosed_ids)
