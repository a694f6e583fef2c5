"""C-infinity building blocks: the flat step and the compact bump.

Both are composed as ``outer(inner(t))`` with elementary inner functions,
so their derivatives up to order four follow from Faa di Bruno's formula.
Values that underflow next to the support ends are set to exactly zero.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.special import expit

MAX_ORDER = 4


def _chain(outer, inner, order):
    """Derivative of ``outer(inner(t))`` given outer[k] = O^(k)(inner(t)) and inner[k] = I^(k)(t)."""
    o, i = outer, inner
    if order == 0:
        return o[0]
    if order == 1:
        return o[1] * i[1]
    if order == 2:
        return o[2] * i[1] ** 2 + o[1] * i[2]
    if order == 3:
        return o[3] * i[1] ** 3 + 3 * o[2] * i[1] * i[2] + o[1] * i[3]
    if order == 4:
        return (o[4] * i[1] ** 4 + 6 * o[3] * i[1] ** 2 * i[2]
                + o[2] * (3 * i[2] ** 2 + 4 * i[1] * i[3]) + o[1] * i[4])
    raise ValueError(f"derivative order must be in 0..{MAX_ORDER}")


def flat_step(t, order=0):
    """The smooth step psi(t) = B(t) / (B(t) + B(1 - t)), B(t) = exp(-1/t).

    psi is 0 for t <= 0 and 1 for t >= 1, and every derivative vanishes at
    both ends. On (0, 1) it equals the logistic function of
    ``1/(1-t) - 1/t``.
    """
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    if order == 0:
        out = np.where(t >= 1, 1.0, 0.0)
    else:
        out = np.zeros_like(t)
    if not np.any(inside):
        return out
    ti = t[inside]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        z = 1.0 / (1.0 - ti) - 1.0 / ti
        s, sc = expit(z), expit(-z)
        s1 = s * sc
        outer = [s, s1, s1 * (sc - s), s1 * (1 - 6 * s1), s1 * (sc - s) * (1 - 12 * s1)]
        inner = [z] + [factorial(k) * (1.0 / (1.0 - ti) ** (k + 1) - (-1.0) ** k / ti ** (k + 1))
                       for k in range(1, order + 1)]
        val = _chain(outer, inner, order)
    out[inside] = np.where(np.isfinite(val), val, 0.0)
    return out


def bump_profile(s, order=0):
    """exp(-1 / (1 - s**2)) for |s| < 1, else 0, and its s-derivatives."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    if not np.any(inside):
        return out
    si = s[inside]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        inner = [-0.5 * factorial(k) * (1.0 / (1.0 - si) ** (k + 1) + (-1.0) ** k / (1.0 + si) ** (k + 1))
                 for k in range(0, order + 1)]
        e = np.exp(inner[0])
        val = _chain([e] * (MAX_ORDER + 1), inner + [None] * (MAX_ORDER - order), order)
    out[inside] = np.where(np.isfinite(val), val, 0.0)
    return out


@dataclass(frozen=True)
class Bump:
    """amplitude * exp(-1/(1 - s^2)) with s = (x - center) / half_width."""

    center: float
    half_width: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order=0):
        s = (np.asarray(x, dtype=float) - self.center) / self.half_width
        return self.amplitude * bump_profile(s, order) / self.half_width ** order

    def rescaled(self, a, b):
        """The same bump after mapping [0, 1] affinely onto [a, b]."""
        return Bump(a + (b - a) * self.center, (b - a) * self.half_width, self.amplitude)

    def to_dict(self):
        return {"center": self.center, "half_width": self.half_width, "amplitude": self.amplitude}


@dataclass(frozen=True)
class CorrectionBasis:
    """2n bumps (first half left of the split point) and their coefficients."""

    bumps: tuple
    eps0: float = 0.0
    u: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))
        u = np.zeros(len(self.bumps)) if self.u is None else np.asarray(self.u, dtype=float).copy()
        if u.shape != (len(self.bumps),):
            raise ValueError("u must have one coefficient per bump")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    def __len__(self):
        return len(self.bumps)

    @property
    def knots(self):
        return np.array([e for b in self.bumps for e in b.support])

    def with_u(self, u):
        return CorrectionBasis(self.bumps, self.eps0, u)

    def matrix(self, x, order=0):
        """Bump values (or derivatives), shape ``(len(bumps), len(x))``."""
        x = np.asarray(x, dtype=float)
        if not self.bumps:
            return np.zeros((0, x.size))
        return np.stack([b.derivative(x, order) for b in self.bumps])

    def evaluate(self, x, order=0, u=None):
        coeffs = self.u if u is None else np.asarray(u, dtype=float)
        if not self.bumps:
            return np.zeros(np.shape(x))
        return coeffs @ self.matrix(x, order)

    def rescaled(self, a, b):
        return CorrectionBasis([bm.rescaled(a, b) for bm in self.bumps], self.eps0 * (b - a), self.u)

    def to_dict(self):
        return {"bumps": [b.to_dict() for b in self.bumps], "eps0": self.eps0, "u": self.u.tolist()}

    @classmethod
    def from_dict(cls, data):
        bumps = [Bump(float(b["center"]), float(b["half_width"]), float(b.get("amplitude", 1.0)))
                 for b in data.get("bumps", [])]
        return cls(bumps, float(data.get("eps0", 0.0)), data.get("u"))
