"""Compact convex bodies with an interior distance-to-boundary.

Three variants are supported: n-dimensional balls, rotated 2D boxes given by
center, half widths and angle, and bounded polytopes given as ``A x <= b``.
Each body exposes a vectorized ``depth`` that equals the distance to the
boundary for points inside and is negative outside.  Queries are pure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InvalidConfig, NonpositiveBound, OutsideBody

CONTAINS_TOL = 1e-9


class ConvexBody:
    """Common interface of the three body variants."""

    dim: int

    def depth(self, x) -> np.ndarray:
        """Distance to the boundary inside, negative outside (rows of ``x``)."""
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class Ball(ConvexBody):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float)).copy()
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        radius = float(self.radius)
        if not math.isfinite(radius) or radius <= 0:
            raise InvalidConfig("ball radius must be positive")
        object.__setattr__(self, "radius", radius)

    @property
    def dim(self):
        return self.center.size

    def depth(self, x):
        x = _as_points(x, self.dim)
        return self.radius - np.linalg.norm(x - self.center, axis=-1)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def diameter(self):
        return 2.0 * self.radius

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box2D(ConvexBody):
    """Rectangle ``|xi_k| <= s_k`` where ``xi = R(-theta) (x - center)``."""

    center: np.ndarray
    half_widths: np.ndarray
    theta: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).copy()
        s = np.asarray(self.half_widths, dtype=float).copy()
        if c.shape != (2,) or s.shape != (2,):
            raise InvalidConfig("box2d needs a 2D center and two half widths")
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise InvalidConfig("box half widths must be positive")
        theta = float(self.theta)
        if not (-1e-12 <= theta <= math.pi / 4 + 1e-12):
            raise InvalidConfig("box angle must lie in [0, pi/4]")
        c.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_widths", s)
        object.__setattr__(self, "theta", theta)

    dim = 2

    def to_local(self, x):
        """Coordinates in the box frame."""
        x = _as_points(x, 2) - self.center
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.stack([c * x[..., 0] + s * x[..., 1], -s * x[..., 0] + c * x[..., 1]], axis=-1)

    def depth(self, x):
        xi = self.to_local(x)
        return np.minimum(self.half_widths[0] - np.abs(xi[..., 0]),
                          self.half_widths[1] - np.abs(xi[..., 1]))

    def vertices(self):
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        s1, s2 = self.half_widths
        local = np.array([[s1, s2], [-s1, s2], [-s1, -s2], [s1, -s2]])
        return local @ rot.T + self.center

    def bounding_box(self):
        v = self.vertices()
        return v.min(axis=0), v.max(axis=0)

    def diameter(self):
        return 2.0 * float(np.linalg.norm(self.half_widths))

    def to_dict(self):
        return {"type": "box2d", "center": self.center.tolist(),
                "half_widths": self.half_widths.tolist(), "theta": self.theta}


@dataclass(frozen=True, eq=False)
class Polytope(ConvexBody):
    """Intersection of half-spaces ``normals @ x <= offsets``.

    Boundedness and a nonempty interior are checked at construction with
    small linear programs (support function along +-e_i, Chebyshev radius).
    """

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float)).copy()
        if A.shape[0] != b.size:
            raise InvalidConfig("polytope needs one offset per normal")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms <= 0):
            raise InvalidConfig("polytope normals must be nonzero")
        n = A.shape[1]
        for i in range(n):
            for sign in (1.0, -1.0):
                c = np.zeros(n)
                c[i] = -sign
                res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
                if res.status == 3:
                    raise InvalidConfig("polytope is unbounded")
                if res.status != 0:
                    raise InvalidConfig(f"polytope support probe failed: {res.message}")
        # Chebyshev center: maximize t subject to a_i x + t |a_i| <= b_i
        c = np.zeros(n + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=np.hstack([A, norms[:, None]]), b_ub=b,
                      bounds=[(None, None)] * n + [(0, None)], method="highs")
        if res.status != 0 or -res.fun <= 1e-12:
            raise InvalidConfig("polytope has an empty interior")
        A.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "_norms", norms)
        object.__setattr__(self, "_vertices", self._enumerate_vertices())

    @property
    def dim(self):
        return self.normals.shape[1]

    @classmethod
    def axis_box(cls, lower, upper) -> "Polytope":
        """Axis-aligned box in any dimension."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        eye = np.eye(lower.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    def depth(self, x):
        x = _as_points(x, self.dim)
        slack = (self.offsets - x @ self.normals.T) / self._norms
        return slack.min(axis=-1)

    def _enumerate_vertices(self):
        A, b, n = self.normals, self.offsets, self.dim
        found = []
        for rows in itertools.combinations(range(A.shape[0]), n):
            sub = A[list(rows)]
            if abs(np.linalg.det(sub)) < 1e-12:
                continue
            v = np.linalg.solve(sub, b[list(rows)])
            if np.all(A @ v <= b + 1e-9 * (1 + np.abs(b))):
                if not any(np.allclose(v, w, atol=1e-9) for w in found):
                    found.append(v)
        verts = np.array(found)
        if n == 2:
            centroid = verts.mean(axis=0)
            order = np.argsort(np.arctan2(verts[:, 1] - centroid[1], verts[:, 0] - centroid[0]))
            verts = verts[order]
        return verts

    def vertices(self):
        """Vertices (counter-clockwise in 2D)."""
        return self._vertices.copy()

    def bounding_box(self):
        return self._vertices.min(axis=0), self._vertices.max(axis=0)

    def diameter(self):
        v = self._vertices
        return float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)))

    def to_dict(self):
        return {"type": "polytope", "normals": self.normals.tolist(),
                "offsets": self.offsets.tolist()}


def body_from_dict(spec: dict) -> ConvexBody:
    """Build a body from its config-file description."""
    try:
        kind = spec["type"]
        if kind == "ball":
            return Ball(spec["center"], spec["radius"])
        if kind == "box2d":
            return Box2D(spec["center"], spec["half_widths"], spec.get("theta", 0.0))
        if kind == "polytope":
            return Polytope(spec["normals"], spec["offsets"])
    except KeyError as exc:
        raise InvalidConfig(f"body description is missing key {exc}") from None
    raise InvalidConfig(f"unknown body type {spec.get('type')!r}")


def contains(body: ConvexBody, x) -> bool:
    """Closed-set membership with tolerance 1e-9."""
    return bool(body.depth(np.asarray(x, dtype=float)) >= -CONTAINS_TOL)


def distance_to_boundary(body: ConvexBody, x) -> float:
    """Infimum distance from an interior point to the boundary of ``body``.

    Raises:
        OutsideBody: if ``x`` is not in the body.
    """
    depth = float(body.depth(np.asarray(x, dtype=float)))
    if depth < -CONTAINS_TOL:
        raise OutsideBody(f"point {np.asarray(x).tolist()} lies outside the body")
    return max(depth, 0.0)


def single_function_gradient_cap(sigma: float, bound: float, body: ConvexBody, x) -> float:
    """Largest gradient norm a sigma-strongly convex function can have at ``x``
    when its gradient is bounded by ``bound`` on the whole body."""
    return bound - sigma * distance_to_boundary(body, x)


@dataclass(frozen=True, eq=False)
class ShrunkBound:
    """Position-dependent bound ``L - min_sigma * d(x, boundary)`` inside a body."""

    base_bound: float
    min_sigma: float
    body: ConvexBody

    def values(self, x):
        """Vectorized shrunk bound; NaN outside the body."""
        depth = self.body.depth(x)
        return np.where(depth >= -CONTAINS_TOL,
                        self.base_bound - self.min_sigma * np.maximum(depth, 0.0), np.nan)

    def __call__(self, x) -> float:
        return shrunk_bound(self, x)


def shrunk_bound(sb: ShrunkBound, x) -> float:
    """Evaluate the shrunk bound at a point of the body.

    Raises:
        OutsideBody: if ``x`` is outside the body.
        NonpositiveBound: if the value is <= 1e-12.
    """
    value = sb.base_bound - sb.min_sigma * distance_to_boundary(sb.body, x)
    if value <= 1e-12:
        raise NonpositiveBound(f"shrunk bound {value:.6g} is not positive at {np.asarray(x).tolist()}")
    return value
