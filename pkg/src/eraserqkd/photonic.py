"""Single-photon amplitude tracking through Mach-Zehnder layouts.

A photon is a set of coherent branches labeled by (path, polarization tag,
time bin). Elements act linearly on branches; branches landing on the same
label are merged coherently. Beam splitters use the real Hadamard convention

    out0 = (in0 + in1) / sqrt(2)
    out1 = (in0 - in1) / sqrt(2)

so that, with phase phi in arm 2, detector D1 sees cos^2(phi/2).

Polarization tags are linear polarizations at 0, 45, 90 and 135 degrees plus
NONE for a polarization-free source. An absorbing polarizer on a NONE branch
tags it with the polarizer's angle without loss; on a polarized branch it
projects (amplitude times cos of the angle difference) and the rest is
absorbed.
"""
from __future__ import annotations

import cmath
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

_SQRT1_2 = 1 / math.sqrt(2)
PRUNE = 1e-15

SOURCE = "in"
VACUUM = "vac"


class LayoutError(ValueError):
    """Element refers to an unknown path or cannot act on the branch it meets."""


class PolTag(enum.Enum):
    NONE = None
    H = 0
    D45 = 45
    V = 90
    A135 = 135

    @classmethod
    def from_angle(cls, angle: int) -> PolTag:
        try:
            tag = cls(angle % 180)
        except ValueError:
            raise LayoutError(f"polarizer angle must be one of 0, 45, 90, 135 degrees, got {angle}") from None
        return tag

    def jones(self) -> tuple[float, float]:
        rad = math.radians(self.value)
        return (math.cos(rad), math.sin(rad))


def _projection(onto: PolTag, pol: PolTag) -> float:
    """<onto|pol> for linear polarizations."""
    return math.cos(math.radians(onto.value - pol.value))


@dataclass(frozen=True)
class PhotonBranch:
    path: str
    pol: PolTag
    time_bin: int
    amp: complex


Key = tuple[str, PolTag, int]


@dataclass(frozen=True)
class PhotonState:
    amps: Mapping[Key, complex]
    paths: frozenset[str]
    detectors: frozenset[str] = frozenset()

    @classmethod
    def source(cls, pol: PolTag = PolTag.NONE) -> PhotonState:
        """One photon entering port ``in`` of the first beam splitter."""
        return cls({(SOURCE, pol, 0): 1.0 + 0j}, frozenset({SOURCE, VACUUM}))

    @property
    def branches(self) -> list[PhotonBranch]:
        return [PhotonBranch(p, pol, t, a) for (p, pol, t), a in self.amps.items()]

    def total_probability(self) -> float:
        return sum(abs(a) ** 2 for a in self.amps.values())


@dataclass(frozen=True)
class BeamSplitter:
    inputs: tuple[str, str]
    outputs: tuple[str, str]


@dataclass(frozen=True)
class Phase:
    path: str
    phi: float


@dataclass(frozen=True)
class Delay:
    path: str
    bins: int = 1


@dataclass(frozen=True)
class PolarizerAbsorb:
    path: str
    angle: int


@dataclass(frozen=True)
class PolarizingBS:
    """Routes the ``angle`` component to outputs[0] and the orthogonal one to outputs[1]."""

    path: str
    outputs: tuple[str, str]
    angle: int = 45


@dataclass(frozen=True)
class Relabel:
    path: str
    detector: str


OpticalElement = Union[BeamSplitter, Phase, Delay, PolarizerAbsorb, PolarizingBS, Relabel]


def _require(state: PhotonState, *paths: str) -> None:
    for p in paths:
        if p not in state.paths:
            raise LayoutError(f"unknown path {p!r} (open paths: {sorted(state.paths)})")


def _merge(out: dict[Key, complex], key: Key, amp: complex) -> None:
    out[key] = out.get(key, 0j) + amp


def _pruned(amps: dict[Key, complex]) -> dict[Key, complex]:
    return {k: a for k, a in amps.items() if abs(a) > PRUNE}


def propagate(state: PhotonState, element: OpticalElement) -> PhotonState:
    out: dict[Key, complex] = {}
    paths = set(state.paths)
    detectors = state.detectors

    if isinstance(element, BeamSplitter):
        a, b = element.inputs
        c, d = element.outputs
        _require(state, a, b)
        for (p, pol, t), amp in state.amps.items():
            if p == a:
                _merge(out, (c, pol, t), amp * _SQRT1_2)
                _merge(out, (d, pol, t), amp * _SQRT1_2)
            elif p == b:
                _merge(out, (c, pol, t), amp * _SQRT1_2)
                _merge(out, (d, pol, t), -amp * _SQRT1_2)
            else:
                _merge(out, (p, pol, t), amp)
        paths -= {a, b}
        paths |= {c, d}

    elif isinstance(element, Phase):
        _require(state, element.path)
        shift = cmath.exp(1j * element.phi)
        for (p, pol, t), amp in state.amps.items():
            _merge(out, (p, pol, t), amp * shift if p == element.path else amp)

    elif isinstance(element, Delay):
        _require(state, element.path)
        for (p, pol, t), amp in state.amps.items():
            _merge(out, (p, pol, t + element.bins if p == element.path else t), amp)

    elif isinstance(element, PolarizerAbsorb):
        _require(state, element.path)
        axis = PolTag.from_angle(element.angle)
        for (p, pol, t), amp in state.amps.items():
            if p != element.path:
                _merge(out, (p, pol, t), amp)
            elif pol is PolTag.NONE:
                _merge(out, (p, axis, t), amp)
            else:
                _merge(out, (p, axis, t), amp * _projection(axis, pol))

    elif isinstance(element, PolarizingBS):
        _require(state, element.path)
        first = PolTag.from_angle(element.angle)
        second = PolTag.from_angle(element.angle + 90)
        for (p, pol, t), amp in state.amps.items():
            if p != element.path:
                _merge(out, (p, pol, t), amp)
                continue
            if pol is PolTag.NONE:
                raise LayoutError(f"polarizing beam splitter on {p!r} met an unpolarized branch")
            _merge(out, (element.outputs[0], first, t), amp * _projection(first, pol))
            _merge(out, (element.outputs[1], second, t), amp * _projection(second, pol))
        paths.discard(element.path)
        paths |= set(element.outputs)

    elif isinstance(element, Relabel):
        _require(state, element.path)
        for (p, pol, t), amp in state.amps.items():
            _merge(out, (element.detector if p == element.path else p, pol, t), amp)
        paths.discard(element.path)
        paths.add(element.detector)
        detectors = detectors | {element.detector}

    else:
        raise TypeError(f"not an optical element: {element!r}")

    return PhotonState(_pruned(out), frozenset(paths), detectors)


def run(elements: Iterable[OpticalElement], source: PhotonState | None = None) -> PhotonState:
    state = source if source is not None else PhotonState.source()
    for element in elements:
        state = propagate(state, element)
    return state


@dataclass(frozen=True)
class DetectionDistribution:
    entries: dict[tuple[str, int], float]
    absorbed: float

    def prob(self, detector: str, time_bin: int | None = None) -> float:
        return sum(p for (d, t), p in self.entries.items()
                   if d == detector and (time_bin is None or t == time_bin))

    def detector_totals(self) -> dict[str, float]:
        totals: dict[str, float] = {}
        for (d, _), p in self.entries.items():
            totals[d] = totals.get(d, 0.0) + p
        return totals

    def detected(self) -> float:
        return sum(self.entries.values())


def detect(state: PhotonState) -> DetectionDistribution:
    """Detection probabilities per (detector, time bin).

    Polarized amplitudes reaching the same detector and time bin are added as
    Jones vectors before squaring; for mutually orthogonal tags this is the
    incoherent sum over polarization. Polarization-free amplitude adds its own
    orthogonal component. Light left on a non-detector path counts as lost.
    """
    fields: dict[tuple[str, int], list[complex]] = {}
    for (p, pol, t), amp in state.amps.items():
        if p not in state.detectors:
            continue
        v = fields.setdefault((p, t), [0j, 0j, 0j])
        if pol is PolTag.NONE:
            v[2] += amp
        else:
            jx, jy = pol.jones()
            v[0] += amp * jx
            v[1] += amp * jy
    entries = {key: sum(abs(c) ** 2 for c in v) for key, v in sorted(fields.items())}
    entries = {k: p for k, p in entries.items() if p > PRUNE}
    absorbed = max(0.0, 1.0 - sum(entries.values()))
    return DetectionDistribution(entries, absorbed)


# --- layouts ----------------------------------------------------------------

class Tagging(enum.Enum):
    """How the sender marks which arm the photon took."""

    NONE = "NONE"
    POLARIZATION = "POLARIZATION"
    TIMEBIN = "TIMEBIN"


class EraserOptics(enum.Enum):
    """What the receiver puts between the two channels and the detectors."""

    NONE = "NONE"
    TIMEBIN = "TIMEBIN"
    PBS = "PBS"
    ABSORB = "ABSORB"


class Layout(enum.Enum):
    BARE_MZI = "BARE_MZI"
    MZI_POL_WPI = "MZI_POL_WPI"
    MZI_TIMEBIN_WPI = "MZI_TIMEBIN_WPI"
    ERASER_TIMEBIN = "ERASER_TIMEBIN"
    ERASER_PBS = "ERASER_PBS"
    ERASER_ABSORB = "ERASER_ABSORB"


_LAYOUT_PARTS = {
    Layout.BARE_MZI: (Tagging.NONE, EraserOptics.NONE),
    Layout.MZI_POL_WPI: (Tagging.POLARIZATION, EraserOptics.NONE),
    Layout.MZI_TIMEBIN_WPI: (Tagging.TIMEBIN, EraserOptics.NONE),
    Layout.ERASER_TIMEBIN: (Tagging.TIMEBIN, EraserOptics.TIMEBIN),
    Layout.ERASER_PBS: (Tagging.POLARIZATION, EraserOptics.PBS),
    Layout.ERASER_ABSORB: (Tagging.POLARIZATION, EraserOptics.ABSORB),
}

# Time bin in which the second interferometer of the time-bin eraser interferes.
INTERFERING_BIN = 1


def interferometer(phi: float, tagging: Tagging = Tagging.NONE,
                   arm_angles: tuple[int, int] = (0, 90)) -> list[OpticalElement]:
    """The sender's half: BS1, optional arm tagging, phase, BS2 onto channels A and B.

    ``arm_angles`` are the polarizer angles in arms 1 and 2 under polarization
    tagging; equal angles leave the arms indistinguishable.
    """
    if not math.isfinite(phi):
        raise LayoutError("phase must be finite")
    elements: list[OpticalElement] = [BeamSplitter((SOURCE, VACUUM), ("1", "2"))]
    if tagging is Tagging.POLARIZATION:
        elements += [PolarizerAbsorb("1", arm_angles[0]), PolarizerAbsorb("2", arm_angles[1])]
    elements.append(Phase("2", phi))
    if tagging is Tagging.TIMEBIN:
        elements.append(Delay("2"))
    elements.append(BeamSplitter(("1", "2"), ("A", "B")))
    return elements


def receiver(optics: EraserOptics = EraserOptics.NONE) -> list[OpticalElement]:
    """The receiving half, from channels A and B to the detectors."""
    if optics is EraserOptics.NONE:
        return [Relabel("A", "D1"), Relabel("B", "D2")]
    if optics is EraserOptics.TIMEBIN:
        return [
            Delay("B"),
            BeamSplitter(("A", "B"), ("C", "E")),
            Relabel("C", "D1"),
            Relabel("E", "D2"),
        ]
    if optics is EraserOptics.PBS:
        # D1/D3 take the 45 degree output of each splitter, D2/D4 the 135 degree one.
        return [
            PolarizingBS("A", ("A45", "A135"), 45),
            PolarizingBS("B", ("B45", "B135"), 45),
            Relabel("A45", "D1"),
            Relabel("A135", "D2"),
            Relabel("B45", "D3"),
            Relabel("B135", "D4"),
        ]
    if optics is EraserOptics.ABSORB:
        return [
            PolarizerAbsorb("A", 45),
            PolarizerAbsorb("B", 45),
            Relabel("A", "D1"),
            Relabel("B", "D2"),
        ]
    raise LayoutError(f"unknown eraser optics {optics!r}")


def build_layout(layout: Layout | str, phi: float) -> list[OpticalElement]:
    tagging, optics = _LAYOUT_PARTS[Layout(layout)]
    return interferometer(phi, tagging) + receiver(optics)


def simulate(layout: Layout | str, phi: float) -> DetectionDistribution:
    return detect(run(build_layout(layout, phi)))


def _swap_hv(element: OpticalElement) -> OpticalElement:
    if isinstance(element, PolarizerAbsorb) and element.angle % 180 in (0, 90):
        return PolarizerAbsorb(element.path, (element.angle + 90) % 180)
    return element


def mixture(dists: Sequence[DetectionDistribution], weights: Sequence[float]) -> DetectionDistribution:
    entries: dict[tuple[str, int], float] = {}
    absorbed = 0.0
    for dist, w in zip(dists, weights):
        for key, p in dist.entries.items():
            entries[key] = entries.get(key, 0.0) + w * p
        absorbed += w * dist.absorbed
    return DetectionDistribution(dict(sorted(entries.items())), absorbed)


def unpolarized_run(layout: Layout | str | Sequence[OpticalElement], phi: float = 0.0) -> DetectionDistribution:
    """Equal classical mixture of the two source polarizations.

    A horizontally polarized source photon leaves arm 1 tagged H and arm 2
    tagged V; a vertically polarized one gets the opposite assignment. The
    two deterministic runs are averaged.
    """
    elements = build_layout(layout, phi) if isinstance(layout, (Layout, str)) else list(layout)
    if not any(isinstance(e, (PolarizerAbsorb, PolarizingBS)) for e in elements):
        warnings.warn("layout has no polarizing elements; the unpolarized mixture is trivial",
                      stacklevel=2)
    h_run = detect(run(elements))
    v_run = detect(run([_swap_hv(e) for e in elements]))
    return mixture([h_run, v_run], [0.5, 0.5])


def visibility(series: Sequence[float]) -> float:
    hi, lo = max(series), min(series)
    return 0.0 if hi + lo <= 0 else (hi - lo) / (hi + lo)


@dataclass(frozen=True)
class Sweep:
    phis: list[float]
    detectors: list[str]
    dists: list[DetectionDistribution] = field(repr=False)

    def series(self, detector: str, time_bin: int | None = None) -> list[float]:
        return [d.prob(detector, time_bin) for d in self.dists]

    def time_bins(self) -> list[int]:
        return sorted({t for d in self.dists for _, t in d.entries})


def phase_grid(points: int) -> list[float]:
    """``points`` equally spaced phases on [0, 2*pi)."""
    if points < 2:
        raise ValueError("a sweep needs at least 2 grid points")
    return [2 * math.pi * k / points for k in range(points)]


def sweep(layout: Layout | str, points: int) -> Sweep:
    phis = phase_grid(points)
    states = [run(build_layout(layout, phi)) for phi in phis]
    return Sweep(phis, sorted(states[0].detectors), [detect(s) for s in states])
