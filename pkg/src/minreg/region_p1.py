"""Region containing the minimizer when the gradients are bounded at the minimizer.

A point is kept when it lies in both closed balls of radius L / sigma_i around
the minimizers and the two admissible gradient cones can still cancel, i.e.
``phi1 + phi2 >= psi``.  The boundary of that set, when the half-distance is
small enough, is the zero set of :func:`t_n_residual` plus the two minimizers.

Sign convention of the residual: negative on the feasible side, positive on
the infeasible side (the midpoint between the minimizers is always feasible).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .errors import NotOnBallBoundary, OutOfBall, UndefinedAtMinimizer
from .geometry import (
    CLAMP_TOL,
    DEGENERACY_TOL,
    ProblemConfig,
    ReducedPoint,
    alpha_arrays,
    distances,
)

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class P1Membership:
    """Outcome of the membership test for one point.

    ``phi1``, ``phi2`` and ``psi`` are None when the point is outside the ball
    intersection or is one of the minimizers; ``slack`` is NaN at the
    minimizers and uses phi_i = 0 for out-of-ball distances otherwise.
    """

    in_H: bool
    angle_ok: bool
    in_M_hat: bool
    phi1: Optional[float]
    phi2: Optional[float]
    psi: Optional[float]
    slack: float

    def to_dict(self) -> dict:
        out = asdict(self)
        if not math.isfinite(out["slack"]):
            out["slack"] = None
        return out


@dataclass(frozen=True)
class DerivedParams:
    """Constants derived from the problem data.

    Attributes:
        gamma1: L^2 / sigma1^2.
        gamma2: L^2 / sigma2^2.
        beta: sigma2 / sigma1.
        lambda1: axial threshold on the boundary of ball 1.
        lambda2: axial threshold on the boundary of ball 2.
        chi1: L / (sigma1 r).
    """

    gamma1: float
    gamma2: float
    beta: float
    lambda1: float
    lambda2: float
    chi1: float


# ---------------------------------------------------------------------------
# vectorized kernels (also used by region_p2 and the tracer, with an array bound)


def angle_slack_arrays(z1, u, r, sigma1, sigma2, bound):
    """phi1 + phi2 - psi with out-of-ball cosines clamped to 1."""
    d1, d2 = distances(z1, u, r)
    phi1 = np.arccos(np.clip(sigma1 * d1 / bound, -1.0, 1.0))
    phi2 = np.arccos(np.clip(sigma2 * d2 / bound, -1.0, 1.0))
    a1, a2 = alpha_arrays(z1, u, r)
    return phi1 + phi2 - (np.pi - (a2 - a1))


def residual_arrays(z1, u, r, sigma1, sigma2, bound):
    """The angle-equality residual, NaN at the minimizers and outside either ball."""
    z1 = np.asarray(z1, dtype=float)
    u = np.abs(np.asarray(u, dtype=float))
    d1, d2 = distances(z1, u, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv1 = 1.0 / (d1 * d1)
        inv2 = 1.0 / (d2 * d2)
        k1 = (sigma1 / bound) ** 2
        k2 = (sigma2 / bound) ** 2
        q1 = inv1 - k1
        q2 = inv2 - k2
        # boundary points may come out slightly negative
        q1 = np.where((q1 < 0) & (q1 > -CLAMP_TOL * k1), 0.0, q1)
        q2 = np.where((q2 < 0) & (q2 > -CLAMP_TOL * k2), 0.0, q2)
        res = ((z1 - r) * (z1 + r) + u * u) * inv1 * inv2 + sigma1 * sigma2 / bound**2 \
            - np.sqrt(q1) * np.sqrt(q2)
    bad = (d1 < DEGENERACY_TOL) | (d2 < DEGENERACY_TOL) | (q1 < 0) | (q2 < 0)
    return np.where(bad, np.nan, res)


def feasible_mask(z1, u, r, sigma1, sigma2, bound, tol=MEMBERSHIP_TOL):
    """Membership indicator in residual form (vectorized).

    Points inside both balls (up to ``tol``) with a nonpositive residual are
    feasible; the minimizers themselves follow the closed-form endpoint rule,
    which reduces to "inside both balls".
    """
    z1 = np.asarray(z1, dtype=float)
    u = np.abs(np.asarray(u, dtype=float))
    d1, d2 = distances(z1, u, r)
    in_h = (d1 <= bound / sigma1 + tol) & (d2 <= bound / sigma2 + tol)
    at_min = (d1 < DEGENERACY_TOL) | (d2 < DEGENERACY_TOL)
    with np.errstate(invalid="ignore"):
        res = residual_arrays(z1, u, r, sigma1, sigma2, bound)
        ok = res <= 0.0
    return in_h & (at_min | ok)


def membership_arrays(z1, u, r, sigma1, sigma2, bound, tol=MEMBERSHIP_TOL, slack_tol=None):
    """Vectorized (in_H, angle_ok, slack) using the angle form of the test."""
    if slack_tol is None:
        slack_tol = tol
    z1 = np.asarray(z1, dtype=float)
    u = np.abs(np.asarray(u, dtype=float))
    d1, d2 = distances(z1, u, r)
    in_h = (d1 <= bound / sigma1 + tol) & (d2 <= bound / sigma2 + tol)
    at_min = (d1 < DEGENERACY_TOL) | (d2 < DEGENERACY_TOL)
    slack = angle_slack_arrays(z1, u, r, sigma1, sigma2, bound)
    slack = np.where(at_min, np.nan, slack)
    angle_ok = at_min | (slack >= -slack_tol)
    return in_h, angle_ok, slack


# ---------------------------------------------------------------------------
# scalar API


def phi_tilde(p: ReducedPoint, which: int, sigma: float, bound: float, r: float) -> float:
    """Largest admissible angle between grad f_i and the ray from x_i* to p.

    Args:
        p: reduced point.
        which: 1 or 2, selecting the minimizer.
        sigma: modulus of f_which.
        bound: gradient bound (L, or the shrunk bound of the constrained problem).
        r: half-distance of the canonical frame.

    Raises:
        OutOfBall: if sigma * d_i / bound exceeds 1 by more than 1e-9.
    """
    d1, d2 = p.distances(r)
    d = d1 if which == 1 else d2
    ratio = sigma * d / bound
    if ratio > 1.0 + CLAMP_TOL:
        raise OutOfBall(f"sigma*d/bound = {ratio:.12g} > 1: not a possible minimizer")
    return math.acos(min(max(ratio, -1.0), 1.0))


def in_H(p: ReducedPoint, config: ProblemConfig, tol: float = MEMBERSHIP_TOL) -> bool:
    """Whether ``p`` lies in both closed gradient balls."""
    d1, d2 = p.distances(config.r)
    L = config.grad_bound
    return d1 <= L / config.sigma1 + tol and d2 <= L / config.sigma2 + tol


def in_M_hat(p: ReducedPoint, config: ProblemConfig, tol: float = MEMBERSHIP_TOL,
             slack_tol: Optional[float] = None) -> P1Membership:
    """Test the two necessary conditions for ``p`` to minimize f1 + f2.

    Args:
        p: point in the canonical frame of ``config``.
        config: problem data.
        tol: tolerance on the ball inequalities.
        slack_tol: tolerance on the angle inequality (defaults to ``tol``).
    """
    if slack_tol is None:
        slack_tol = tol
    r, L = config.r, config.grad_bound
    s1, s2 = config.sigma1, config.sigma2
    d1, d2 = p.distances(r)
    inside = in_H(p, config, tol)
    if d1 < DEGENERACY_TOL or d2 < DEGENERACY_TOL:
        # x1* is a boundary point iff r <= L/(2 sigma2), i.e. iff it lies in H
        return P1Membership(inside, True, inside, None, None, None, math.nan)
    slack = float(angle_slack_arrays(p.z1, p.u, r, s1, s2, L))
    angle_ok = slack >= -slack_tol
    if inside:
        phi1 = math.acos(min(s1 * d1 / L, 1.0))
        phi2 = math.acos(min(s2 * d2 / L, 1.0))
        a1, a2 = alpha_arrays(p.z1, p.u, r)
        psi = math.pi - (float(a2) - float(a1))
    else:
        phi1 = phi2 = psi = None
    return P1Membership(inside, angle_ok, inside and angle_ok, phi1, phi2, psi, slack)


def t_n_residual(p: ReducedPoint, config: ProblemConfig, bound: Optional[float] = None) -> float:
    """Signed residual of the boundary equation; zero exactly on the angle-equality locus.

    Negative inside the angle-feasible region, positive outside.

    Raises:
        UndefinedAtMinimizer: at either minimizer.
        OutOfBall: outside either ball of radius bound / sigma_i.
    """
    if bound is None:
        bound = config.grad_bound
    r = config.r
    d1, d2 = p.distances(r)
    if d1 < DEGENERACY_TOL or d2 < DEGENERACY_TOL:
        raise UndefinedAtMinimizer("the angle-equality residual is undefined at the minimizers")
    if config.sigma1 * d1 / bound > 1.0 + CLAMP_TOL or config.sigma2 * d2 / bound > 1.0 + CLAMP_TOL:
        raise OutOfBall("residual requested outside the gradient balls")
    res = residual_arrays(p.z1, p.u, r, config.sigma1, config.sigma2, bound)
    return float(res)


def derived_params(config: ProblemConfig) -> DerivedParams:
    """Compute gamma_i, beta, the two axial thresholds and chi1."""
    L, s1, s2, r = config.grad_bound, config.sigma1, config.sigma2, config.r
    gamma1 = L * L / (s1 * s1)
    gamma2 = L * L / (s2 * s2)
    beta = s2 / s1
    lambda1 = (1 + beta) / (1 + 2 * beta) * gamma1 / (2 * r) - r / (1 + 2 * beta)
    lambda2 = -(1 + beta) / (2 + beta) * gamma2 / (2 * r) + beta * r / (2 + beta)
    return DerivedParams(gamma1, gamma2, beta, lambda1, lambda2, L / (s1 * r))


def _threshold_margin(config: ProblemConfig) -> float:
    """lambda1 - (L/sigma1 - r) rewritten in terms of chi1 (scaled by 1/r).

    Nonnegative whenever chi1 >= 2, and zero only at chi1 == 2.
    """
    dp = derived_params(config)
    chi, beta = dp.chi1, dp.beta
    return 0.5 * (1 + beta) / (1 + 2 * beta) * chi * chi - 1 / (1 + 2 * beta) - (chi - 1)


def boundary_ball_angle_violation(p: ReducedPoint, config: ProblemConfig,
                                  ball: Optional[int] = None) -> bool:
    """On the boundary of a gradient ball, whether the angle condition fails.

    On the boundary of ball ``i`` one has phi_i = 0, and the test
    ``phi_j < psi`` is evaluated in cosine form,
    ``sigma_j d_j / L > -cos(alpha2 - alpha1)``, which is exact there and
    stays meaningful when the point is outside the other ball.

    Args:
        p: point on the boundary of ball 1 or ball 2.
        config: problem data.
        ball: which ball; detected automatically when omitted.

    Raises:
        NotOnBallBoundary: if ``p`` is not within 1e-9 of the chosen sphere.
    """
    r, L = config.r, config.grad_bound
    d1, d2 = p.distances(r)
    on1 = abs(d1 - L / config.sigma1) < MEMBERSHIP_TOL
    on2 = abs(d2 - L / config.sigma2) < MEMBERSHIP_TOL
    if ball is None:
        ball = 1 if on1 else 2 if on2 else 0
    if (ball == 1 and not on1) or (ball == 2 and not on2) or ball not in (1, 2):
        raise NotOnBallBoundary("point is not on the requested ball boundary")
    if d1 < DEGENERACY_TOL or d2 < DEGENERACY_TOL:
        return False
    cos_gap = ((p.z1 + r) * (p.z1 - r) + p.u * p.u) / (d1 * d2)
    other = config.sigma2 * d2 / L if ball == 1 else config.sigma1 * d1 / L
    return other > -cos_gap


def separation_allows_tracing(config: ProblemConfig) -> bool:
    """Whether r <= (L/2) min(1/sigma1, 1/sigma2), so the boundary is the angle-equality locus plus the minimizers."""
    L = config.grad_bound
    return config.r <= 0.5 * L * min(1 / config.sigma1, 1 / config.sigma2) + 1e-12


def endpoint_is_boundary(config: ProblemConfig, which: int) -> bool:
    """Whether minimizer ``which`` belongs to the boundary of the region."""
    sigma_other = config.sigma2 if which == 1 else config.sigma1
    return config.r <= config.grad_bound / (2 * sigma_other) + MEMBERSHIP_TOL


def hat_h_bounding_box(config: ProblemConfig) -> tuple[float, float, float]:
    """(z_lo, z_hi, u_max) of the ball intersection in canonical coordinates."""
    r, L = config.r, config.grad_bound
    R1, R2 = L / config.sigma1, L / config.sigma2
    z_lo = max(-r - R1, r - R2)
    z_hi = min(-r + R1, r + R2)
    return z_lo, z_hi, min(R1, R2)


def plane_grid(config: ProblemConfig, resolution: int, pad: float = 0.02):
    """Grid axes (z1, y) covering the ball intersection in the canonical plane.

    The grid has ``resolution`` cells per axis, is symmetric about the center
    of the box, and contains the row ``y = 0``; with an even resolution and
    equal moduli it also contains the column ``z1 = 0``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    z_lo, z_hi, u_max = hat_h_bounding_box(config)
    center = 0.5 * (z_lo + z_hi)
    half_z = 0.5 * (z_hi - z_lo) * (1 + pad)
    half_y = u_max * (1 + pad)
    z1 = center + np.linspace(-half_z, half_z, resolution + 1)
    y = np.linspace(-half_y, half_y, resolution + 1)
    if resolution % 2 == 0:
        y[resolution // 2] = 0.0
        if abs(center) < 1e-12:
            z1[resolution // 2] = 0.0
    return z1, y
