"""Step phases and their compactly supported smooth versions.

A :class:`StepPhase` is piecewise constant with values in {0, pi, pi/2,
3pi/2}: multiples of pi on the left of the split point p (so the
multiplier exp(ig) is +-1) and odd multiples of pi/2 on the right (so it
is +-i).

A :class:`SmoothPhase` is a chain of segments covering [0, 1]. A level
segment is constant; a ramp segment moves from one value to the next
through the flat step :func:`~annihilator.smooth.flat_step`, whose
derivatives all vanish at both ends, so any such chain is C-infinity. An
optional :class:`~annihilator.smooth.CorrectionBasis` adds a linear
combination of compact bumps on top.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .smooth import MAX_ORDER, CorrectionBasis, flat_step

LEFT_LEVELS = (np.pi, 0.0)              # interval m even, m odd
RIGHT_LEVELS = (1.5 * np.pi, 0.5 * np.pi)


@dataclass(frozen=True)
class StepPhase:
    """Piecewise constant phase; ``levels[i]`` holds on [knots[i], knots[i+1])."""

    knots: tuple
    levels: tuple
    split: float = None

    def __post_init__(self):
        k = tuple(float(v) for v in self.knots)
        lv = tuple(float(v) for v in self.levels)
        if len(k) != len(lv) + 1 or any(q <= p for p, q in zip(k, k[1:])):
            raise ValueError("knots must be increasing with one more entry than levels")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "levels", lv)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.levels) - 1)
        return np.asarray(self.levels)[idx]

    def min_gap(self):
        return float(np.min(np.diff(self.knots)))

    def segments_on(self, lo, hi):
        """(start, end, level) of the constant pieces inside [lo, hi]."""
        out = []
        for a, b, v in zip(self.knots[:-1], self.knots[1:], self.levels):
            if a >= lo - 1e-15 and b <= hi + 1e-15:
                out.append((a, b, v))
        return out


def build_g0(left, right):
    """Four-level step phase from the Hobby-Rice partitions of [0, p] and [p, 1].

    Interval number m (counting from 0) on the left gets pi when m is even
    and 0 when odd; on the right 3pi/2 when even and pi/2 when odd. This
    turns the two alternating-sign identities into the real and imaginary
    parts of a single vanishing integral.
    """
    p = left.interval[1]
    if right.interval[0] != p:
        raise ValueError(f"partitions do not share the split point: {p} vs {right.interval[0]}")
    knots = list(left.edges) + list(right.edges[1:])
    levels = [LEFT_LEVELS[m % 2] for m in range(left.r + 1)]
    levels += [RIGHT_LEVELS[m % 2] for m in range(right.r + 1)]
    return StepPhase(tuple(knots), tuple(levels), split=p)


@dataclass(frozen=True)
class Segment:
    """Constant (start == stop) or flat-step ramp from ``start`` to ``stop`` over [x0, x1]."""

    x0: float
    x1: float
    start: float
    stop: float

    @property
    def is_level(self):
        return self.start == self.stop

    def value(self, x, order=0):
        t = (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0)
        if self.is_level:
            return np.full(t.shape, self.start if order == 0 else 0.0)
        return (order == 0) * self.start + (self.stop - self.start) * flat_step(t, order) / (self.x1 - self.x0) ** order

    def to_dict(self):
        return {"type": "level" if self.is_level else "ramp",
                "from": self.start, "to": self.stop, "x0": self.x0, "x1": self.x1}


def level(value, x0, x1):
    return Segment(x0, x1, value, value)


def ramp(start, stop, x0, x1):
    return Segment(x0, x1, start, stop)


@dataclass(frozen=True)
class SmoothPhase:
    segments: tuple
    correction: CorrectionBasis = None
    epsilon: float = 0.0
    _starts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("a phase needs at least one segment")
        if segs[0].x0 != 0.0 or segs[-1].x1 != 1.0:
            raise ValueError("segments must cover [0, 1]")
        for s, t in zip(segs, segs[1:]):
            if s.x1 != t.x0:
                raise ValueError(f"segments leave a gap or overlap at {s.x1} / {t.x0}")
        if any(s.x1 <= s.x0 for s in segs):
            raise ValueError("segments must have positive length")
        object.__setattr__(self, "_starts", np.array([s.x0 for s in segs]))

    @classmethod
    def zero(cls):
        return cls((level(0.0, 0.0, 1.0),))

    @property
    def knots(self):
        pts = [s.x0 for s in self.segments] + [1.0]
        if self.correction is not None:
            pts += list(self.correction.knots)
        return np.unique(pts)

    @property
    def u(self):
        return np.zeros(0) if self.correction is None else self.correction.u

    def base(self, x, order=0):
        """Segment part only (no bump correction)."""
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._starts, x, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty(x.shape)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.segments[i].value(x[mask], order)
        return out

    def derivative(self, x, order=0):
        out = self.base(x, order)
        if self.correction is not None and len(self.correction):
            out = out + self.correction.evaluate(x, order)
        return out

    def __call__(self, x):
        return self.derivative(x, 0)

    def with_correction(self, basis):
        return SmoothPhase(self.segments, basis, self.epsilon)

    def scaled(self, factor):
        """The phase multiplied by a constant (e.g. -1 to conjugate the multiplier)."""
        segs = [Segment(s.x0, s.x1, factor * s.start, factor * s.stop) for s in self.segments]
        corr = None if self.correction is None else self.correction.with_u(factor * self.correction.u)
        return SmoothPhase(segs, corr, self.epsilon)

    def rescaled(self, a, b):
        """Segments and bumps of this phase mapped affinely from [0, 1] onto [a, b].

        The result is only a list of pieces on [a, b]; combine with
        :func:`concatenate` to get a phase on [0, 1] again.
        """
        segs = [Segment(a + (b - a) * s.x0, a + (b - a) * s.x1, s.start, s.stop) for s in self.segments]
        segs[0] = Segment(a, segs[0].x1, segs[0].start, segs[0].stop)
        segs[-1] = Segment(segs[-1].x0, b, segs[-1].start, segs[-1].stop)
        corr = None if self.correction is None else self.correction.rescaled(a, b)
        return segs, corr, self.epsilon * (b - a)

    def to_dict(self):
        out = {"segments": [s.to_dict() for s in self.segments], "epsilon": self.epsilon}
        corr = self.correction.to_dict() if self.correction is not None else {"bumps": [], "u": []}
        out["correction"] = corr
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data):
        segs = [Segment(float(s["x0"]), float(s["x1"]), float(s["from"]), float(s["to"]))
                for s in data["segments"]]
        corr = data.get("correction")
        basis = CorrectionBasis.from_dict(corr) if corr and corr.get("bumps") else None
        return cls(segs, basis, float(data.get("epsilon", 0.0)))


def concatenate(parts):
    """Join ``(segments, correction, eps)`` pieces from :meth:`SmoothPhase.rescaled`."""
    segs, bumps, u, eps0, eps = [], [], [], [], []
    for s, corr, e in parts:
        segs.extend(s)
        eps.append(e)
        if corr is not None:
            bumps.extend(corr.bumps)
            u.extend(corr.u)
            eps0.append(corr.eps0)
    basis = CorrectionBasis(bumps, min(eps0), u) if bumps else None
    return SmoothPhase(segs, basis, min(e for e in eps if e > 0) if any(e > 0 for e in eps) else 0.0)


def mollify(step, eps):
    """Replace every jump of ``step`` by a flat-step ramp of half-width ``eps``.

    The phase is also brought down to 0 at both ends: it is 0 on [0, eps/2],
    ramps to the first level on [eps/2, 3 eps/2], and symmetrically at 1,
    so the result vanishes identically near 0 and 1. Outside the ramps the
    result equals ``step`` exactly.
    """
    k = step.knots
    lv = step.levels
    if not 0 < eps < 0.5 * step.min_gap():
        raise ValueError(f"eps={eps} must lie in (0, {0.5 * step.min_gap()})")
    delta = 0.5 * eps
    starts = [k[0] + delta + eps] + [x + eps for x in k[1:-1]]
    ends = [x - eps for x in k[1:-1]] + [k[-1] - delta - eps]
    if any(e <= s for s, e in zip(starts, ends)):
        raise ValueError(f"eps={eps} too large for the end intervals of the step phase")
    segs = [level(0.0, 0.0, delta), ramp(0.0, lv[0], delta, delta + eps)]
    for i, value in enumerate(lv):
        segs.append(level(value, starts[i], ends[i]))
        if i + 1 < len(lv):
            segs.append(ramp(value, lv[i + 1], ends[i], starts[i + 1]))
    segs += [ramp(lv[-1], 0.0, 1.0 - delta - eps, 1.0 - delta), level(0.0, 1.0 - delta, 1.0)]
    return SmoothPhase(tuple(segs), None, eps)


def eval_phase(phase, x, order=0):
    """g or one of its first four derivatives at ``x`` (scalar or array)."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0) | (xa > 1)):
        raise DomainError("phase is defined on [0, 1]")
    out = phase.derivative(xa, order) if order else phase(xa)
    return float(out) if np.ndim(out) == 0 else out


def one_sided_jumps(phase, max_order=MAX_ORDER):
    """Largest mismatch between the segment formulas meeting at each knot.

    Returns ``{order: max |left limit - right limit|}`` evaluated from the
    analytic segment formulas on each side (bumps are added on both sides,
    and they are smooth everywhere).
    """
    out = {k: 0.0 for k in range(max_order + 1)}
    for s, t in zip(phase.segments, phase.segments[1:]):
        x = np.array([s.x1])
        for k in range(max_order + 1):
            out[k] = max(out[k], float(abs(s.value(x, k)[0] - t.value(x, k)[0])))
    return out


def derivative_continuity(phase, max_order=MAX_ORDER, h=None):
    """Relative mismatch between finite differences and analytic derivatives at every knot.

    For each structural knot x and order k = 1..max_order, the central
    difference of g^(k-1) over [x - h, x + h] is compared with the analytic
    g^(k) at x. The mismatch is scaled by
    max(1, |analytic|). Also folds in :func:`one_sided_jumps`. The default
    h is 1e-6, shrunk to a thousandth of the closest knot spacing so that
    narrow ramps and bumps stay resolved.
    """
    worst = max(one_sided_jumps(phase, max_order).values())
    knots = np.unique(phase.knots)
    if h is None:
        gaps = np.diff(knots)
        gaps = gaps[gaps > 1e-12]
        h = min(1e-6, 1e-3 * float(gaps.min())) if gaps.size else 1e-6
    knots = knots[(knots - h >= 0) & (knots + h <= 1)]
    for k in range(1, max_order + 1):
        fd = (phase.derivative(knots + h, k - 1) - phase.derivative(knots - h, k - 1)) / (2 * h)
        an = phase.derivative(knots, k)
        scale = np.maximum(1.0, np.abs(an))
        if knots.size:
            worst = max(worst, float(np.max(np.abs(fd - an) / scale)))
    return worst


def samples_csv(phase, n):
    """Dense samples ``x,g,re_exp,im_exp`` at n uniform points of [0, 1]."""
    x = np.linspace(0.0, 1.0, n)
    g = phase(x)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "g", "re_exp", "im_exp"])
    for xi, gi in zip(x, g):
        writer.writerow([repr(float(xi)), repr(float(gi)), repr(float(np.cos(gi))), repr(float(np.sin(gi)))])
    return buf.getvalue()


def derivative_samples_csv(phase, n):
    """Samples ``x,g,dg`` for plotting the phase and its slope."""
    x = np.linspace(0.0, 1.0, n)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "g", "dg"])
    for row in zip(x, phase(x), phase.derivative(x, 1)):
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
