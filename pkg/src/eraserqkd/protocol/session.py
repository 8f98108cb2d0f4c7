"""Full key-exchange sessions over either backend."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from .. import rng as rngmod
from ..adversary import AttackKind, AttackStrategy, apply_attack, normalize_policy
from .parties import (
    CIRCUIT_ERASERS,
    PHOTONIC_ERASERS,
    PHOTONIC_TAGGING,
    AliceAnnouncement,
    AliceSettings,
    Backend,
    BobAnnouncement,
    BobResult,
    BobSettings,
    Eraser,
    Outcome,
    ProtocolError,
    alice_prepare_circuit,
    bob_decode,
    bob_measure_circuit,
    estimate_qber,
    photonic_detection,
    photonic_registered,
    sample_detection,
    sift,
)

DEFAULT_DISCLOSE_FRACTION = 0.5
DEFAULT_QBER_THRESHOLD = 0.05


class ConfigError(ValueError):
    """Invalid session configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def default_policy(backend: Backend) -> dict[Eraser, float]:
    if backend is Backend.CIRCUIT:
        return {Eraser.CIRCUIT_A: 0.5, Eraser.CIRCUIT_B: 0.5}
    return {Eraser.PHOTONIC_PBS: 1.0}


@dataclass(frozen=True)
class SessionConfig:
    rounds: int
    backend: Backend = Backend.CIRCUIT
    bob_eraser_policy: Optional[Mapping[Eraser, float]] = None
    attack: AttackStrategy = field(default_factory=AttackStrategy.none)
    seed: int = 0
    disclose_fraction: float = DEFAULT_DISCLOSE_FRACTION
    qber_threshold: float = DEFAULT_QBER_THRESHOLD

    def __post_init__(self) -> None:
        if isinstance(self.rounds, bool) or not isinstance(self.rounds, int) or self.rounds < 1:
            raise ConfigError("rounds", f"must be a positive integer, got {self.rounds!r}")
        try:
            object.__setattr__(self, "backend", Backend(self.backend))
        except ValueError:
            raise ConfigError("backend", f"must be CIRCUIT or PHOTONIC, got {self.backend!r}") from None
        try:
            rngmod.check_seed(self.seed)
        except ValueError as exc:
            raise ConfigError("seed", str(exc)) from None
        if not 0 < self.disclose_fraction < 1:
            raise ConfigError("disclose_fraction", f"must lie in (0, 1), got {self.disclose_fraction!r}")
        if self.rounds * self.disclose_fraction < 1:
            raise ConfigError("disclose_fraction", "too small to disclose a single bit at this round count")
        if not 0 <= self.qber_threshold <= 1:
            raise ConfigError("qber_threshold", f"must lie in [0, 1], got {self.qber_threshold!r}")
        if not isinstance(self.attack, AttackStrategy):
            raise ConfigError("attack", f"expected an AttackStrategy, got {self.attack!r}")
        if self.backend is Backend.PHOTONIC and self.attack.kind is not AttackKind.NONE:
            raise ConfigError("attack", "eavesdroppers act on the circuit backend only")

        policy = self.bob_eraser_policy
        if policy is None:
            policy = default_policy(self.backend)
        try:
            policy = {Eraser(k): float(v) for k, v in policy.items()}
            normalize_policy(policy)
        except (ValueError, TypeError) as exc:
            raise ConfigError("bob_eraser_policy", str(exc)) from None
        allowed = CIRCUIT_ERASERS if self.backend is Backend.CIRCUIT else PHOTONIC_ERASERS
        for eraser in policy:
            if eraser not in allowed:
                raise ConfigError("bob_eraser_policy",
                                  f"{eraser.value} is not available on the {self.backend.value} backend")
        if self.backend is Backend.PHOTONIC:
            taggings = {PHOTONIC_TAGGING[e] for e, w in policy.items() if w > 0}
            if len(taggings) > 1:
                raise ConfigError("bob_eraser_policy",
                                  "photonic erasers must share one which-path tagging "
                                  "(TIMEBIN cannot be mixed with PBS/ABSORB)")
        object.__setattr__(self, "bob_eraser_policy", policy)

    @property
    def policy_items(self) -> list[tuple[Eraser, float]]:
        weights = {e: w for e, w in self.bob_eraser_policy.items() if w > 0}
        total = sum(weights.values())
        return [(e, weights[e] / total) for e in Eraser if e in weights]


@dataclass
class RoundRecord:
    round_id: int
    alice: AliceSettings
    bob: BobSettings
    outcomes: Outcome
    registered: bool
    decoded: Optional[int] = None
    sifted: bool = False
    disclosed: bool = False
    flag_fill_used: bool = True

    def to_dict(self) -> dict[str, Any]:
        outcomes = None if self.outcomes is None else list(self.outcomes)
        return {
            "round_id": self.round_id,
            "alice_bit": self.alice.bit,
            "alice_wpi": self.alice.wpi,
            "flag_fill": self.alice.flag_fill if self.flag_fill_used and not self.alice.wpi else None,
            "bob_eraser": self.bob.eraser.value,
            "outcomes": outcomes,
            "registered": self.registered,
            "decoded": self.decoded,
            "sifted": self.sifted,
            "disclosed": self.disclosed,
        }


@dataclass(frozen=True)
class SessionReport:
    sifted_length: int
    sift_ratio: float
    disclosed_count: int
    qber_overall: float
    qber_by_mode: dict[str, float]
    eve_detected: bool
    final_key: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "sifted_length": self.sifted_length,
            "sift_ratio": self.sift_ratio,
            "disclosed_count": self.disclosed_count,
            "qber_overall": self.qber_overall,
            "qber_by_mode": dict(self.qber_by_mode),
            "eve_detected": self.eve_detected,
            "final_key": self.final_key,
        }


def _draw_settings(config: SessionConfig, rng) -> tuple[AliceSettings, BobSettings]:
    bit, wpi, fill, eraser_on = (int(x) for x in rng.integers(0, 2, size=4))
    u = rng.random()
    eraser = Eraser.NONE
    if eraser_on:
        acc = 0.0
        for candidate, weight in config.policy_items:
            eraser = candidate
            acc += weight
            if u < acc:
                break
    return AliceSettings(bit, bool(wpi), fill), BobSettings(eraser)


def play_round(config: SessionConfig, round_id: int) -> RoundRecord:
    """One round from its own random substream; independent of every other round."""
    rng = rngmod.substream(config.seed, rngmod.ROUNDS, round_id)
    alice, bob = _draw_settings(config, rng)
    if config.backend is Backend.CIRCUIT:
        state = alice_prepare_circuit(alice)
        state = apply_attack(state, config.attack, rng).disturbed_state
        result = bob_measure_circuit(state, bob, rng)
        return RoundRecord(round_id, alice, bob, result.outcomes, result.registered)
    tagging = PHOTONIC_TAGGING[config.policy_items[0][0]]
    dist = photonic_detection(alice, tagging, bob.eraser)
    outcome = sample_detection(dist, rng)
    result = BobResult(outcome, photonic_registered(bob.eraser, outcome))
    return RoundRecord(round_id, alice, bob, result.outcomes, result.registered, flag_fill_used=False)


def _disclose(seed: int, sifted_ids: Sequence[int], fraction: float) -> list[int]:
    if not sifted_ids:
        raise ProtocolError("no rounds survived sifting; run more rounds")
    count = min(len(sifted_ids), math.ceil(fraction * len(sifted_ids)))
    rng = rngmod.substream(seed, rngmod.DISCLOSURE)
    picked = rng.choice(len(sifted_ids), size=count, replace=False)
    return sorted(sifted_ids[i] for i in picked)


def finish_session(records: Sequence[Any], alice_bits: Mapping[int, int], bob_bits: Mapping[int, Optional[int]],
                   sifted_ids: list[int], mode_of: Mapping[int, str], config: SessionConfig) -> SessionReport:
    """Disclose, estimate QBER and mark the records; shared by both protocols."""
    disclosed = _disclose(config.seed, sifted_ids, config.disclose_fraction)
    qber = estimate_qber(alice_bits, bob_bits, disclosed)

    by_mode: dict[str, list[int]] = {}
    for rid in disclosed:
        by_mode.setdefault(mode_of[rid], []).append(rid)
    qber_by_mode = {mode: estimate_qber(alice_bits, bob_bits, ids) for mode, ids in sorted(by_mode.items())}

    disclosed_set = set(disclosed)
    for rid in sifted_ids:
        records[rid].sifted = True
        records[rid].decoded = bob_bits[rid]
        records[rid].disclosed = rid in disclosed_set
    key = "".join(str(alice_bits[rid]) for rid in sifted_ids if rid not in disclosed_set)

    return SessionReport(
        sifted_length=len(sifted_ids),
        sift_ratio=len(sifted_ids) / len(records),
        disclosed_count=len(disclosed),
        qber_overall=qber,
        qber_by_mode=qber_by_mode,
        eve_detected=qber > config.qber_threshold,
        final_key=key,
    )


def run_session(config: SessionConfig) -> tuple[SessionReport, list[RoundRecord]]:
    """Play every round, sift on the public announcements, disclose a subset and estimate QBER.

    The final key is Alice's copy of the undisclosed sifted bits.
    """
    records = [play_round(config, rid) for rid in range(config.rounds)]
    sifted_ids = sift(
        [AliceAnnouncement(r.round_id, r.alice.wpi) for r in records],
        [BobAnnouncement(r.round_id, r.bob.eraser, r.registered) for r in records],
    )
    bob_bits = {rid: bob_decode(records[rid].bob.eraser, records[rid].outcomes, records[rid].registered)
                for rid in sifted_ids}
    mode_of = {rid: records[rid].bob.eraser.value for rid in sifted_ids}
    alice_bits = {r.round_id: r.alice.bit for r in records}
    report = finish_session(records, alice_bits, bob_bits, sifted_ids, mode_of, config)
    return report, records


def sift_from_transcript(transcript: Sequence[Mapping[str, Any]]) -> list[int]:
    """Recompute the kept rounds from serialized records' public fields only."""
    return sift(
        [AliceAnnouncement(r["round_id"], r["alice_wpi"]) for r in transcript],
        [BobAnnouncement(r["round_id"], Eraser(r["bob_eraser"]), r["registered"]) for r in transcript],
    )


def empirical_qber(records: Sequence[Any], mode: Optional[str] = None) -> tuple[int, int]:
    """(errors, sifted rounds) over every sifted record, optionally one mode only.

    Unlike the report's estimate this uses the whole sifted key, which is
    what the exact oracle predicts.
    """
    errors = total = 0
    for r in records:
        if not r.sifted:
            continue
        d = r.to_dict()
        if mode is not None and d.get("bob_eraser", d.get("alice_basis")) != mode:
            continue
        total += 1
        errors += d["decoded"] != d["alice_bit"]
    return errors, total
