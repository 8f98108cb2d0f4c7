"""Library side of the command-line tool.

Every CLI subcommand is a thin wrapper over a function here, so anything the
CLI does can be reproduced in-process with the same seeds and the same bytes.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import jsonio, photonic
from . import rng as rngmod
from .adversary import (
    ALL_STRATEGIES,
    AttackKind,
    AttackStrategy,
    exact_mode_qber,
    mode_table,
    overall_qber,
)
from .photonic import Layout
from .protocol.bb84 import basis_overlap, bb84_exact_qber, bb84_session
from .protocol.parties import (
    CIRCUIT_ERASERS,
    AliceSettings,
    Eraser,
    alice_prepare_circuit,
    bob_decode,
    bob_eraser_circuit,
)
from .protocol.session import (
    DEFAULT_DISCLOSE_FRACTION,
    DEFAULT_QBER_THRESHOLD,
    ConfigError,
    SessionConfig,
    SessionReport,
    empirical_qber,
    run_session,
    sift_from_transcript,
)
from .statevec import CNOT, F, H, Q, X, Z, GateSpec, PureState, apply_gate, branch_enumerate, overlap, phase

# the intercept-resend error rate the eraser protocol is expected to expose
HEADLINE_QBER = Fraction(1, 4)

# amplitudes in |QF> order 00, 01, 10, 11
_S = 1 / math.sqrt(2)
EXPECTED_ERASER_STATES = {
    (Eraser.CIRCUIT_A, 1): PureState.from_amplitudes([0, _S, _S, 0]),
    (Eraser.CIRCUIT_A, 0): PureState.from_amplitudes([_S, 0, 0, _S]),
    (Eraser.CIRCUIT_B, 1): PureState.from_amplitudes([_S, 0, 0, -_S]),
    (Eraser.CIRCUIT_B, 0): PureState.from_amplitudes([0, _S, _S, 0]),
}


# --- configuration ----------------------------------------------------------

_CONFIG_FIELDS = {
    "protocol", "rounds", "backend", "bob_eraser_policy", "attack", "seed", "disclose_fraction",
    "qber_threshold", "transcript", "report", "repetitions", "workers", "sweep",
}


@dataclass(frozen=True)
class SweepSpec:
    layout: Layout
    points: int
    output: Path


@dataclass(frozen=True)
class RunConfig:
    session: SessionConfig
    transcript: Path
    report: Path
    protocol: str = "ERASER"
    repetitions: int = 1
    workers: int = 1
    sweep: Optional[SweepSpec] = None


def parse_attack(value: Any) -> AttackStrategy:
    if value is None:
        return AttackStrategy.none()
    if isinstance(value, str):
        return AttackStrategy.parse(value)
    if isinstance(value, dict):
        kind = value.get("kind", "NONE")
        if kind == "INTERCEPT_Z":
            return AttackStrategy.intercept_z(value.get("targets", "BOTH"))
        if kind == "INTERCEPT_ERASER":
            return AttackStrategy.intercept_eraser(value.get("variant", "A"))
        if kind == "NONE":
            return AttackStrategy.none()
    raise ValueError(f"unrecognized attack {value!r}")


def config_from_dict(raw: dict, base_dir: Path = Path("."), stem: str = "session") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = sorted(set(raw) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(unknown[0], f"unknown field (allowed: {', '.join(sorted(_CONFIG_FIELDS))})")
    if "rounds" not in raw:
        raise ConfigError("rounds", "missing required field")

    protocol = raw.get("protocol", "ERASER")
    if protocol not in ("ERASER", "BB84"):
        raise ConfigError("protocol", f"must be ERASER or BB84, got {protocol!r}")
    try:
        attack = parse_attack(raw.get("attack"))
    except ValueError as exc:
        raise ConfigError("attack", str(exc)) from None
    backend = raw.get("backend", "CIRCUIT")
    if protocol == "BB84" and backend != "CIRCUIT":
        raise ConfigError("backend", "BB84 runs on the circuit backend only")
    if protocol == "BB84" and attack.kind is AttackKind.INTERCEPT_ERASER:
        raise ConfigError("attack", "BB84 supports NONE or INTERCEPT_Z")

    session = SessionConfig(
        rounds=raw["rounds"],
        backend=backend,
        bob_eraser_policy=raw.get("bob_eraser_policy"),
        attack=attack,
        seed=raw.get("seed", 0),
        disclose_fraction=raw.get("disclose_fraction", DEFAULT_DISCLOSE_FRACTION),
        qber_threshold=raw.get("qber_threshold", DEFAULT_QBER_THRESHOLD),
    )
    for name in ("repetitions", "workers"):
        value = raw.get(name, 1)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(name, f"must be a positive integer, got {value!r}")

    sweep = None
    if "sweep" in raw:
        spec = raw["sweep"]
        try:
            sweep = SweepSpec(Layout(spec["layout"]), int(spec.get("points", 32)),
                              base_dir / spec.get("output", f"{stem}.sweep.json"))
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise ConfigError("sweep", f"needs a known layout and points >= 2 ({exc})") from None
        if sweep.points < 2:
            raise ConfigError("sweep", "points must be at least 2")

    return RunConfig(
        session=session,
        transcript=base_dir / raw.get("transcript", f"{stem}.transcript.jsonl"),
        report=base_dir / raw.get("report", f"{stem}.report.json"),
        protocol=protocol,
        repetitions=raw.get("repetitions", 1),
        workers=raw.get("workers", 1),
        sweep=sweep,
    )


def load_run_config(path: str | Path) -> RunConfig:
    """Parse a JSON config file; output paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<syntax>", f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(raw, path.parent, path.stem)


# --- run --------------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    report: SessionReport
    transcript_lines: list[str] = field(repr=False)
    transcript_path: Path
    report_path: Path

    def summary(self) -> str:
        r = self.report
        verdict = "EAVESDROPPER DETECTED" if r.eve_detected else "channel clean"
        return f"sifted={r.sifted_length} qber={r.qber_overall:.4f} verdict={verdict}"


def execute_session(protocol: str, session: SessionConfig) -> tuple[SessionReport, list[str]]:
    runner = bb84_session if protocol == "BB84" else run_session
    report, records = runner(session)
    return report, [jsonio.dumps_line(r.to_dict()) for r in records]


def _suffixed(path: Path, rep: int, total: int) -> Path:
    if total == 1:
        return path
    return path.with_name(f"{path.stem}.rep{rep}{path.suffix}")


def _rep_sessions(cfg: RunConfig) -> list[SessionConfig]:
    if cfg.repetitions == 1:
        return [cfg.session]
    return [replace(cfg.session, seed=rngmod.derive_seed(cfg.session.seed, rngmod.REPETITION, i))
            for i in range(cfg.repetitions)]


def run(cfg: RunConfig) -> list[RunResult]:
    """Run the configured session(s) and write transcript and report files."""
    sessions = _rep_sessions(cfg)
    if cfg.workers > 1 and len(sessions) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outputs = list(pool.map(execute_session, [cfg.protocol] * len(sessions), sessions))
    else:
        outputs = [execute_session(cfg.protocol, s) for s in sessions]

    results = []
    for i, (report, lines) in enumerate(outputs):
        tpath = _suffixed(cfg.transcript, i, len(sessions))
        rpath = _suffixed(cfg.report, i, len(sessions))
        for p in (tpath, rpath):
            p.parent.mkdir(parents=True, exist_ok=True)
        tpath.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        jsonio.write_json(rpath, report.to_dict())
        results.append(RunResult(report, lines, tpath, rpath))
    if cfg.sweep is not None:
        cfg.sweep.output.parent.mkdir(parents=True, exist_ok=True)
        jsonio.write_json(cfg.sweep.output, sweep(cfg.sweep.layout, cfg.sweep.points))
    return results


# --- sweep ------------------------------------------------------------------

def sweep(layout: Layout | str, points: int) -> dict[str, Any]:
    """Detection probability curves over an evenly spaced phase grid."""
    layout = Layout(layout)
    s = photonic.sweep(layout, points)
    series = {det: s.series(det) for det in s.detectors}
    out: dict[str, Any] = {
        "layout": layout.value,
        "points": points,
        "phi": s.phis,
        "series": series,
        "visibility": {det: photonic.visibility(v) for det, v in series.items()},
        "absorbed": [d.absorbed for d in s.dists],
    }
    bins = s.time_bins()
    if len(bins) > 1:
        by_bin = {f"{det}@t{t}": s.series(det, t) for det in s.detectors for t in bins}
        out["series_by_time_bin"] = by_bin
        out["visibility_by_time_bin"] = {k: photonic.visibility(v) for k, v in by_bin.items()}
    return out


# --- oracle -----------------------------------------------------------------

POLICIES = {
    "UNIFORM_A_B": {Eraser.CIRCUIT_A: 1, Eraser.CIRCUIT_B: 1},
    "CIRCUIT_A": {Eraser.CIRCUIT_A: 1},
    "CIRCUIT_B": {Eraser.CIRCUIT_B: 1},
}


def oracle_table() -> dict[str, Any]:
    """Exact QBER for every strategy, eraser variant, mode and bit, plus overlap checks."""
    rows = [dict(r, qber_float=float(r["qber"])) for r in mode_table()]
    overall = []
    for strategy in ALL_STRATEGIES:
        for name, policy in POLICIES.items():
            q = overall_qber(strategy, policy)
            overall.append({
                "strategy": strategy.label,
                "policy": name,
                "qber": q,
                "qber_float": float(q),
                "matches_25_percent": q == HEADLINE_QBER,
            })
    uniform = [r for r in overall if r["policy"] == "UNIFORM_A_B" and r["strategy"] != "NONE"]
    no_wpi_state = alice_prepare_circuit(AliceSettings(0, wpi=False))
    wpi_state = alice_prepare_circuit(AliceSettings(0, wpi=True))
    return {
        "mode_table": rows,
        "overall": overall,
        "reproduces_25_percent": [r["strategy"] for r in uniform if r["matches_25_percent"]],
        "diverges_from_25_percent": [
            {"strategy": r["strategy"], "policy": r["policy"], "qber": r["qber"]}
            for r in overall if r["strategy"] != "NONE" and not r["matches_25_percent"]
        ],
        "overlaps": {
            "channel_state_bit0_no_wpi_vs_wpi": overlap(no_wpi_state, wpi_state),
            "bb84_basis_states": basis_overlap(),
        },
        "bb84": {
            s.label: bb84_exact_qber(s) for s in (AttackStrategy.none(), AttackStrategy.intercept_z("Q"))
        },
        "timebin_peak_weights": timebin_peak_weights(),
    }


def timebin_peak_weights() -> dict[str, dict[str, float]]:
    """Arrival-time weights of the time-bin eraser at phi = 0 and phi = pi.

    The early and late peaks do not interfere, so only the middle bin depends on phi.
    """
    out = {}
    for name, phi in (("phi=0", 0.0), ("phi=pi", math.pi)):
        dist = photonic.simulate(Layout.ERASER_TIMEBIN, phi)
        out[name] = {f"{det}@t{tb}": p for (det, tb), p in sorted(dist.entries.items())}
    return out


# --- selftest ---------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def _check(name: str, fn: Callable[[], Optional[str]]) -> Check:
    try:
        detail = fn() or ""
    except AssertionError as exc:
        return Check(name, False, str(exc) or "assertion failed")
    except Exception as exc:  # a crash inside a check is a failed check, not a crashed selftest
        return Check(name, False, f"{type(exc).__name__}: {exc}")
    return Check(name, True, detail)


def _random_state(rng: np.random.Generator, n: int) -> PureState:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState.from_amplitudes(v, normalize=True)


def _all_gates(n: int, rng: np.random.Generator) -> list[GateSpec]:
    gates: list[GateSpec] = []
    for q in range(n):
        gates += [H(q), X(q), Z(q), phase(q, float(rng.uniform(-np.pi, np.pi)))]
        gates += [CNOT(c, q) for c in range(n) if c != q]
    return gates


def check_unitarity() -> str:
    rng = np.random.default_rng(7)
    count = 0
    for n in (1, 2, 3, 4):
        for _ in range(25):
            state = _random_state(rng, n)
            for gate in _all_gates(n, rng):
                out = apply_gate(state, gate)
                assert abs(out.norm() - state.norm()) <= 1e-12, f"{gate} broke the norm"
                if gate.kind.value != "PHASE":
                    assert apply_gate(out, gate).equals(state, atol=1e-12), f"{gate} is not an involution"
                count += 1
    return f"{count} gate applications"


def check_eraser_states() -> str:
    for (eraser, bit), expected in EXPECTED_ERASER_STATES.items():
        got = bob_eraser_circuit(alice_prepare_circuit(AliceSettings(bit, wpi=True)), eraser)
        assert got.equals(expected, atol=1e-12, up_to_phase=True), f"{eraser.value}, bit {bit}: {got}"
    return "4 eraser states"


def check_overlaps() -> str:
    table = oracle_table()["overlaps"]
    assert abs(table["channel_state_bit0_no_wpi_vs_wpi"] - 0.25) <= 1e-12
    assert abs(table["bb84_basis_states"] - 0.5) <= 1e-12
    return "0.25 and 0.5"


def check_branch_completeness() -> str:
    rng = np.random.default_rng(11)
    for n in (1, 2, 3, 4):
        for _ in range(50):
            state = _random_state(rng, n)
            qubits = list(rng.permutation(n)[: rng.integers(1, n + 1)])
            total = sum(b.probability for b in branch_enumerate(state, qubits))
            assert abs(total - 1) <= 1e-9, f"branches sum to {total}"
    return "200 random states"


def check_decode_correctness() -> str:
    cases = 0
    for bit in (0, 1):
        for eraser in (Eraser.NONE, *CIRCUIT_ERASERS):
            fills = (0, 1) if eraser is Eraser.NONE else (0,)
            for fill in fills:
                sent = alice_prepare_circuit(AliceSettings(bit, eraser is not Eraser.NONE, fill))
                for b in branch_enumerate(bob_eraser_circuit(sent, eraser), [Q, F]):
                    assert bob_decode(eraser, b.outcome, True) == bit, \
                        f"bit {bit}, {eraser.value}, outcome {b.outcome}"
                cases += 1
    return f"{cases} sifted cases, every branch decodes correctly"


def check_discarded_mode_is_random() -> str:
    for bit in (0, 1):
        sent = alice_prepare_circuit(AliceSettings(bit, wpi=True))
        probs = {b.outcome: b.probability for b in branch_enumerate(sent, [Q])}
        assert abs(probs[(0,)] - 0.5) <= 1e-12 and abs(probs[(1,)] - 0.5) <= 1e-12
    return "Q is 50/50 with WPI and no eraser"


def check_sift_purity() -> str:
    report, records = run_session(SessionConfig(2000, seed=5, attack=AttackStrategy.intercept_z("F")))
    transcript = [json.loads(jsonio.dumps_line(r.to_dict())) for r in records]
    recomputed = sift_from_transcript(transcript)
    assert recomputed == [r["round_id"] for r in transcript if r["sifted"]]
    assert len(recomputed) == report.sifted_length
    return f"{len(recomputed)} kept rounds recomputed from announcements"


def check_determinism() -> str:
    cfg = SessionConfig(1500, seed=99, attack=AttackStrategy.intercept_eraser("B"))
    a = execute_session("ERASER", cfg)
    b = execute_session("ERASER", cfg)
    assert a[1] == b[1], "transcripts differ"
    assert jsonio.dumps(a[0].to_dict()) == jsonio.dumps(b[0].to_dict()), "reports differ"
    return "identical bytes"


def check_oracle_vs_monte_carlo(rounds: int = 6000) -> str:
    worst = 0.0
    for i, strategy in enumerate(ALL_STRATEGIES):
        cfg = SessionConfig(rounds, seed=1000 + i, attack=strategy)
        _, records = run_session(cfg)
        for eraser in (Eraser.NONE, *CIRCUIT_ERASERS):
            errors, n = empirical_qber(records, eraser.value)
            p = float((exact_mode_qber(strategy, 0, eraser) + exact_mode_qber(strategy, 1, eraser)) / 2)
            sigma = math.sqrt(max(p * (1 - p), 1e-12) / n)
            z = abs(errors / n - p) / sigma if p not in (0.0, 1.0) else (0.0 if errors == n * p else math.inf)
            assert z <= 5, f"{strategy.label} / {eraser.value}: {errors}/{n} vs {p} ({z:.1f} sigma)"
            worst = max(worst, z)
    return f"worst deviation {worst:.2f} sigma"


def check_interference() -> str:
    for phi in photonic.phase_grid(32):
        bare = photonic.simulate(Layout.BARE_MZI, phi)
        assert abs(bare.prob("D1") - math.cos(phi / 2) ** 2) <= 1e-9
        for layout in (Layout.MZI_POL_WPI, Layout.MZI_TIMEBIN_WPI):
            d = photonic.simulate(layout, phi)
            assert abs(d.prob("D1") - 0.5) <= 1e-9 and abs(d.prob("D2") - 0.5) <= 1e-9
    return "32-point grid"


SELFTEST_CHECKS: list[tuple[str, Callable[[], Optional[str]]]] = [
    ("unitarity and involutions", check_unitarity),
    ("eraser output states", check_eraser_states),
    ("overlaps", check_overlaps),
    ("branch probability completeness", check_branch_completeness),
    ("decode correctness", check_decode_correctness),
    ("discarded mode is random", check_discarded_mode_is_random),
    ("sift purity", check_sift_purity),
    ("determinism", check_determinism),
    ("oracle vs Monte Carlo", check_oracle_vs_monte_carlo),
    ("interference curves", check_interference),
]


def selftest() -> list[Check]:
    return [_check(name, fn) for name, fn in SELFTEST_CHECKS]
