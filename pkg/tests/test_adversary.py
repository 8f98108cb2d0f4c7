"""Attack models against an exact oracle and an independent density-matrix model."""
import math
from fractions import Fraction

import numpy as np
import pytest

from eraserqkd.adversary import (
    ALL_STRATEGIES,
    AttackKind,
    AttackStrategy,
    Target,
    apply_attack,
    attack_branches,
    exact_mode_qber,
    mode_table,
    overall_qber,
    to_fraction,
)
from eraserqkd.protocol.parties import AliceSettings, Eraser, alice_prepare_circuit
from eraserqkd.protocol.session import SessionConfig, empirical_qber, run_session

# ---- independent oracle: 4x4 matrices written out by hand, |QF> with Q high ----

_H1 = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
_X1 = np.array([[0, 1], [1, 0]])
_Z1 = np.diag([1, -1])
_I1 = np.eye(2)
HQ, HF = np.kron(_H1, _I1), np.kron(_I1, _H1)
XF, ZQ = np.kron(_I1, _X1), np.kron(_Z1, _I1)
CNOT_QF = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
BOB_U = {"NONE": np.eye(4), "A": HF, "B": HQ @ CNOT_QF}


def _alice(bit, wpi, fill=0):
    v = np.zeros(4)
    v[fill] = 1
    u = HQ @ (ZQ if bit else np.eye(4)) @ (CNOT_QF if wpi else np.eye(4)) @ HQ
    return u @ v


def _decode(mode, q, f):
    return {"NONE": q, "A": int(q != f), "B": int(q == f)}[mode]


def _eve(rho, label):
    if label == "NONE":
        return rho
    if label.startswith("INTERCEPT_Z"):
        target = label[len("INTERCEPT_Z("):-1]
        qubits = {"Q": [0], "F": [1], "BOTH": [0, 1]}[target]
        for qubit in qubits:
            out = np.zeros_like(rho)
            for b in (0, 1):
                p = np.diag([float(((i >> (1 - qubit)) & 1) == b) for i in range(4)])
                out = out + p @ rho @ p
            rho = out
        return rho
    variant = label[-2]
    probe = BOB_U[variant] @ rho @ BOB_U[variant].conj().T
    out = np.zeros_like(rho)
    for i in range(4):
        guess = _decode(variant, i >> 1, i & 1)
        v = _alice(guess, True)
        out = out + probe[i, i].real * np.outer(v, v.conj())
    return out


def density_qber(label, bit, mode):
    fills = (0, 1) if mode == "NONE" else (0,)
    wrong = 0.0
    for fill in fills:
        v = _alice(bit, mode != "NONE", fill)
        rho = _eve(np.outer(v, v.conj()), label)
        rho = BOB_U[mode] @ rho @ BOB_U[mode].conj().T
        for i in range(4):
            if _decode(mode, i >> 1, i & 1) != bit:
                wrong += rho[i, i].real / len(fills)
    return wrong


_MODES = {"NONE": Eraser.NONE, "A": Eraser.CIRCUIT_A, "B": Eraser.CIRCUIT_B}


@pytest.mark.parametrize("strategy", ALL_STRATEGIES, ids=lambda s: s.label)
@pytest.mark.parametrize("mode", ["NONE", "A", "B"])
@pytest.mark.parametrize("bit", [0, 1])
def test_exact_oracle_agrees_with_density_matrix(strategy, mode, bit):
    expected = density_qber(strategy.label, bit, mode)
    assert float(exact_mode_qber(strategy, bit, _MODES[mode])) == pytest.approx(expected, abs=1e-12)


# frozen after agreement with the density-matrix model above
FROZEN = {
    "NONE": (0, 0, 0),
    "INTERCEPT_Z(Q)": (0, 0, Fraction(1, 2)),
    "INTERCEPT_Z(F)": (0, Fraction(1, 2), Fraction(1, 2)),
    "INTERCEPT_Z(BOTH)": (0, Fraction(1, 2), Fraction(1, 2)),
    "INTERCEPT_ERASER(A)": (Fraction(1, 2), 0, 0),
    "INTERCEPT_ERASER(B)": (Fraction(1, 2), 0, 0),
}


@pytest.mark.parametrize("strategy", ALL_STRATEGIES, ids=lambda s: s.label)
def test_frozen_mode_table(strategy):
    for bit in (0, 1):
        got = tuple(exact_mode_qber(strategy, bit, e) for e in (Eraser.NONE, Eraser.CIRCUIT_A, Eraser.CIRCUIT_B))
        assert got == FROZEN[strategy.label]


@pytest.mark.parametrize("label, uniform, a_only, b_only", [
    ("NONE", 0, 0, 0),
    ("INTERCEPT_Z(Q)", Fraction(1, 8), 0, Fraction(1, 4)),
    ("INTERCEPT_Z(F)", Fraction(1, 4), Fraction(1, 4), Fraction(1, 4)),
    ("INTERCEPT_Z(BOTH)", Fraction(1, 4), Fraction(1, 4), Fraction(1, 4)),
    ("INTERCEPT_ERASER(A)", Fraction(1, 4), Fraction(1, 4), Fraction(1, 4)),
    ("INTERCEPT_ERASER(B)", Fraction(1, 4), Fraction(1, 4), Fraction(1, 4)),
])
def test_overall_qber_by_policy(label, uniform, a_only, b_only):
    s = AttackStrategy.parse(label)
    assert overall_qber(s, {Eraser.CIRCUIT_A: 0.5, Eraser.CIRCUIT_B: 0.5}) == uniform
    assert overall_qber(s, {Eraser.CIRCUIT_A: 1}) == a_only
    assert overall_qber(s, {Eraser.CIRCUIT_B: 1}) == b_only


def test_mode_table_shape():
    rows = mode_table()
    assert len(rows) == len(ALL_STRATEGIES) * 3 * 2
    assert list(rows[0]) == ["strategy", "eraser_variant", "mode", "alice_bit", "qber"]
    assert all(isinstance(r["qber"], Fraction) for r in rows)


@pytest.mark.parametrize("text", ["NONE", "INTERCEPT_Z(Q)", "INTERCEPT_Z(BOTH)", "INTERCEPT_ERASER(B)"])
def test_parse_label_round_trip(text):
    assert AttackStrategy.parse(text).label == text


@pytest.mark.parametrize("text", ["", "INTERCEPT_Z", "INTERCEPT_Z(X)", "NONE(Q)", "INTERCEPT_ERASER(C)"])
def test_parse_rejects(text):
    with pytest.raises(ValueError):
        AttackStrategy.parse(text)


def test_strategy_validation():
    with pytest.raises(ValueError):
        AttackStrategy(AttackKind.INTERCEPT_Z)
    with pytest.raises(ValueError):
        AttackStrategy(AttackKind.NONE, targets=Target.Q)


def test_to_fraction():
    assert to_fraction(0.125) == Fraction(1, 8)
    assert to_fraction(0.25 + 1e-15) == Fraction(1, 4)
    with pytest.raises(ArithmeticError):
        to_fraction(math.pi)


def test_intercept_z_both_collapses_to_basis_state():
    state = alice_prepare_circuit(AliceSettings(0, wpi=True))
    out = apply_attack(state, AttackStrategy.intercept_z("BOTH"), np.random.default_rng(0))
    assert np.count_nonzero(np.abs(out.disturbed_state.amps) > 1e-12) == 1
    assert out.evan_guess in (0, 1)


def test_no_attack_passes_state_through():
    state = alice_prepare_circuit(AliceSettings(1, wpi=True))
    out = apply_attack(state, AttackStrategy.none(), np.random.default_rng(0))
    assert out.evan_guess is None and out.disturbed_state is state


def test_eraser_attack_learns_bit_in_entangled_mode():
    for bit in (0, 1):
        state = alice_prepare_circuit(AliceSettings(bit, wpi=True))
        branches = attack_branches(state, AttackStrategy.intercept_eraser("A"))
        assert [(round(p, 12), o.evan_guess) for p, o in branches] == [(1.0, bit)]


@pytest.mark.parametrize("strategy", ALL_STRATEGIES, ids=lambda s: s.label)
def test_attack_branches_sum_to_one(strategy):
    for wpi in (False, True):
        state = alice_prepare_circuit(AliceSettings(1, wpi))
        assert sum(p for p, _ in attack_branches(state, strategy)) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("strategy", ALL_STRATEGIES[1:], ids=lambda s: s.label)
def test_every_attack_is_visible_under_uniform_policy(strategy):
    assert overall_qber(strategy, {Eraser.CIRCUIT_A: 1, Eraser.CIRCUIT_B: 1}) > 0


@pytest.mark.parametrize("strategy", [AttackStrategy.intercept_z("Q"), AttackStrategy.intercept_z("BOTH"),
                                      AttackStrategy.intercept_eraser("A")], ids=lambda s: s.label)
def test_monte_carlo_matches_oracle_per_mode(strategy):
    _, records = run_session(SessionConfig(20000, seed=31, attack=strategy))
    for eraser in (Eraser.NONE, Eraser.CIRCUIT_A, Eraser.CIRCUIT_B):
        errors, n = empirical_qber(records, eraser.value)
        p = float(sum(exact_mode_qber(strategy, b, eraser) for b in (0, 1)) / 2)
        if p == 0:
            assert errors == 0
        else:
            assert abs(errors / n - p) <= 5 * math.sqrt(p * (1 - p) / n)
