"""Canonical coordinates and the angle primitives shared by both problems.

Every region predicate depends on a candidate point only through its axial
coordinate ``z1`` along the line from ``x1_star`` to ``x2_star`` and its
transverse radius ``u``.  This module builds the rigid motion that puts the
minimizers at ``(-r, 0, ..., 0)`` and ``(r, 0, ..., 0)`` and provides the
angle functions evaluated in that frame.

Inputs are assumed to be of order one after canonicalization; callers working
at very different scales should rescale (the region scales linearly with the
minimizers and the gradient bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfig, InvalidConfig, UndefinedAtMinimizer

DEGENERACY_TOL = 1e-12
CLAMP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    """Problem data: two minimizers, their moduli and the gradient bound.

    Attributes:
        x1_star: minimizer of f1.
        x2_star: minimizer of f2.
        sigma1: strong-convexity modulus of f1.
        sigma2: strong-convexity modulus of f2.
        grad_bound: the gradient norm bound L.
    """

    x1_star: np.ndarray
    x2_star: np.ndarray
    sigma1: float
    sigma2: float
    grad_bound: float

    def __post_init__(self):
        x1 = np.atleast_1d(np.asarray(self.x1_star, dtype=float)).copy()
        x2 = np.atleast_1d(np.asarray(self.x2_star, dtype=float)).copy()
        if x1.ndim != 1 or x1.shape != x2.shape:
            raise InvalidConfig("minimizers must be vectors of equal length")
        if x1.size < 2:
            raise InvalidConfig("ambient dimension must be at least 2")
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
            raise InvalidConfig("minimizers must be finite")
        for name in ("sigma1", "sigma2", "grad_bound"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidConfig(f"{name} must be finite and positive, got {value}")
            object.__setattr__(self, name, value)
        if np.linalg.norm(x2 - x1) < DEGENERACY_TOL:
            raise DegenerateConfig("x1_star and x2_star coincide")
        x1.flags.writeable = False
        x2.flags.writeable = False
        object.__setattr__(self, "x1_star", x1)
        object.__setattr__(self, "x2_star", x2)

    @property
    def dim(self) -> int:
        return self.x1_star.size

    @property
    def r(self) -> float:
        """Half of the distance between the minimizers."""
        return 0.5 * float(np.linalg.norm(self.x2_star - self.x1_star))

    @property
    def min_sigma(self) -> float:
        return min(self.sigma1, self.sigma2)

    def swapped(self) -> "ProblemConfig":
        """The same problem with the roles of f1 and f2 exchanged."""
        return ProblemConfig(self.x2_star, self.x1_star, self.sigma2, self.sigma1, self.grad_bound)

    def scaled(self, t: float) -> "ProblemConfig":
        """Scale minimizers and gradient bound by ``t`` (moduli fixed)."""
        return ProblemConfig(t * self.x1_star, t * self.x2_star, self.sigma1, self.sigma2,
                             t * self.grad_bound)

    def to_dict(self) -> dict:
        return {
            "x1_star": self.x1_star.tolist(),
            "x2_star": self.x2_star.tolist(),
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "grad_bound": self.grad_bound,
        }


@dataclass(frozen=True, eq=False)
class CanonicalFrame:
    """Rigid motion ``z = rotation @ (x + translation)``.

    Attributes:
        rotation: proper orthogonal matrix sending the minimizer axis to e1.
        translation: vector added before rotating (minus the midpoint).
        half_distance: r, half the distance between the minimizers.
    """

    rotation: np.ndarray
    translation: np.ndarray
    half_distance: float

    def forward(self, x):
        """Map original coordinates to canonical ones (rows of ``x`` allowed)."""
        x = np.asarray(x, dtype=float)
        return (x + self.translation) @ self.rotation.T

    def inverse(self, z):
        """Map canonical coordinates back to the original frame."""
        z = np.asarray(z, dtype=float)
        return z @ self.rotation - self.translation

    def plane_to_original(self, z1, y):
        """Lift points of the canonical (z1, z2) plane back to the original frame."""
        z1 = np.asarray(z1, dtype=float)
        y = np.asarray(y, dtype=float)
        n = self.rotation.shape[0]
        z = np.zeros(z1.shape + (n,))
        z[..., 0] = z1
        z[..., 1] = y
        return self.inverse(z)


@dataclass(frozen=True)
class ReducedPoint:
    """A point described by its axial coordinate and transverse radius."""

    z1: float
    u: float

    def __post_init__(self):
        if self.u < 0:
            raise ValueError(f"transverse radius must be nonnegative, got {self.u}")

    def distances(self, r: float) -> tuple[float, float]:
        """Distances (d1, d2) to the canonical minimizers (-r, 0) and (r, 0)."""
        return math.hypot(self.z1 + r, self.u), math.hypot(self.z1 - r, self.u)

    def mirrored(self) -> "ReducedPoint":
        return ReducedPoint(-self.z1, self.u)


def _householder(n: int, w: np.ndarray) -> np.ndarray:
    w = w / np.linalg.norm(w)
    return np.eye(n) - 2.0 * np.outer(w, w)


def canonical_frame(config: ProblemConfig) -> CanonicalFrame:
    """Build the rigid motion sending x1_star to (-r, 0, ...) and x2_star to (r, 0, ...).

    Two Householder reflections are composed so the result has determinant +1.
    The first maps the unit axis onto -sign(v0) e1 (the numerically stable
    choice); the second either flips e1 or flips the last coordinate.  In more
    than two dimensions the rotation about the axis is arbitrary, which does
    not matter because all predicates depend on (z1, u) only.
    """
    x1, x2 = config.x1_star, config.x2_star
    diff = x2 - x1
    dist = float(np.linalg.norm(diff))
    if dist < DEGENERACY_TOL:
        raise DegenerateConfig("x1_star and x2_star coincide")
    n = diff.size
    v = diff / dist
    if np.allclose(v, np.eye(n)[0], rtol=0.0, atol=1e-15):
        rotation = np.eye(n)
    else:
        sign = 1.0 if v[0] >= 0 else -1.0
        e1 = np.eye(n)[0]
        h1 = _householder(n, v + sign * e1)  # v -> -sign * e1
        if sign > 0:
            h2 = _householder(n, e1)  # -e1 -> e1
        else:
            h2 = _householder(n, np.eye(n)[-1])  # keeps e1, fixes the determinant
        rotation = h2 @ h1
    midpoint = 0.5 * (x1 + x2)
    return CanonicalFrame(rotation=rotation, translation=-midpoint, half_distance=0.5 * dist)


def reduce(x, frame: CanonicalFrame) -> ReducedPoint:
    """Reduce an ambient point to its (z1, u) coordinates."""
    z = frame.forward(np.asarray(x, dtype=float))
    return ReducedPoint(float(z[0]), float(np.linalg.norm(z[1:])))


def reduce_many(x, frame: CanonicalFrame) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``reduce`` over the rows of ``x``."""
    z = frame.forward(np.atleast_2d(np.asarray(x, dtype=float)))
    return z[:, 0], np.linalg.norm(z[:, 1:], axis=1)


def distances(z1, u, r):
    """Vectorized (d1, d2) in reduced coordinates."""
    return np.hypot(z1 + r, u), np.hypot(z1 - r, u)


def clamped_arccos(x, tol: float = CLAMP_TOL):
    """arccos with arguments clamped to [-1, 1].

    Raises:
        ValueError: if any argument overshoots the interval by more than ``tol``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + tol):
        raise ValueError("arccos argument outside [-1, 1] beyond tolerance")
    return np.arccos(np.clip(x, -1.0, 1.0))


def alpha_arrays(z1, u, r):
    """Angles between x - x_i* and the minimizer axis, vectorized.

    Computed with atan2 on (u, z1 -/+ r), which equals the arccos of the
    direction cosines but stays accurate near 0 and pi.
    """
    u = np.abs(u)
    return np.arctan2(u, z1 + r), np.arctan2(u, z1 - r)


def alpha_angles(p: ReducedPoint, r: float) -> tuple[float, float]:
    """Return (alpha1, alpha2) for a reduced point.

    Raises:
        UndefinedAtMinimizer: if ``p`` coincides with either minimizer.
    """
    d1, d2 = p.distances(r)
    if d1 < DEGENERACY_TOL or d2 < DEGENERACY_TOL:
        raise UndefinedAtMinimizer("alpha angles are undefined at the minimizers")
    a1, a2 = alpha_arrays(p.z1, p.u, r)
    return float(a1), float(a2)


def psi(alpha1: float, alpha2: float) -> float:
    """Angle between x - x1* and x2* - x, i.e. pi - (alpha2 - alpha1)."""
    return math.pi - (alpha2 - alpha1)
