"""Region containing the minimizer when the gradients are bounded on a convex body.

Inside the body the gradient bound tightens to the shrunk bound
``L - min(sigma1, sigma2) * d(x, boundary)``, and the unconstrained conditions are
re-evaluated with that position-dependent bound.  The resulting set sits
inside the unconstrained region for every point of the body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .convex_sets import (
    CONTAINS_TOL,
    ConvexBody,
    ShrunkBound,
    contains,
    distance_to_boundary,
    shrunk_bound,
)
from .errors import InvalidConfig, OutsideBody
from .geometry import ProblemConfig, canonical_frame, reduce
from .region_p1 import (
    MEMBERSHIP_TOL,
    feasible_mask,
    membership_arrays,
    plane_grid,
    t_n_residual,
    separation_allows_tracing,
)

MAX_REPORTED_POINTS = 50


@dataclass(frozen=True)
class P2Membership:
    in_C: bool
    l_tilde: Optional[float]
    in_J: bool
    angle_ok: bool
    in_N_hat: bool
    slack: float

    def to_dict(self) -> dict:
        out = asdict(self)
        if not math.isfinite(out["slack"]):
            out["slack"] = None
        return out


@dataclass
class PreconditionReport:
    """Grid evidence for the hypotheses of the constrained boundary characterization.

    The interior of the existential set cannot be tested directly; the grid
    checks the strict ball inequalities with the shrunk bound (a superset
    condition), so ``applicable`` is a grid-verified claim at ``resolution``.
    """

    r_condition: bool
    grid_inclusion_checked: bool
    violating_points: list = field(default_factory=list)
    verdict: str = "inconclusive"
    resolution: int = 0
    n_violations: int = 0
    nonpositive_bound: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def check_minimizers_inside(config: ProblemConfig, body: ConvexBody) -> None:
    if body.dim != config.dim:
        raise InvalidConfig("body and minimizers live in different dimensions")
    for name, x in (("x1_star", config.x1_star), ("x2_star", config.x2_star)):
        if not contains(body, x):
            raise InvalidConfig(f"{name} is not inside the constraint body")


def in_N_hat(x, config: ProblemConfig, body: ConvexBody, tol: float = MEMBERSHIP_TOL,
             slack_tol: Optional[float] = None) -> P2Membership:
    """Necessary conditions for ``x`` (original frame) to minimize f1 + f2 on the body.

    Raises:
        OutsideBody: if ``x`` is not in the body.
        InvalidConfig: if a minimizer is not in the body.
    """
    check_minimizers_inside(config, body)
    x = np.asarray(x, dtype=float)
    if not contains(body, x):
        raise OutsideBody(f"point {x.tolist()} lies outside the body")
    l_tilde = config.grad_bound - config.min_sigma * distance_to_boundary(body, x)
    if l_tilde <= 1e-12:
        return P2Membership(True, None, False, False, False, math.nan)
    p = reduce(x, canonical_frame(config))
    in_j, angle_ok, slack = membership_arrays(p.z1, p.u, config.r, config.sigma1,
                                              config.sigma2, l_tilde, tol, slack_tol)
    in_j, angle_ok = bool(in_j), bool(angle_ok)
    return P2Membership(True, l_tilde, in_j, angle_ok, in_j and angle_ok, float(slack))


def t_n_residual_tilde(x, config: ProblemConfig, body: ConvexBody) -> float:
    """Angle-equality residual with the bound replaced by the shrunk bound at ``x``."""
    sb = ShrunkBound(config.grad_bound, config.min_sigma, body)
    bound = shrunk_bound(sb, x)
    return t_n_residual(reduce(x, canonical_frame(config)), config, bound)


def plane_arrays(z1, y, config: ProblemConfig, body: ConvexBody, frame=None):
    """Shrunk bound and membership mask on canonical-plane points (2D problems).

    Returns:
        (l_tilde, mask): l_tilde is NaN outside the body; mask marks members.
    """
    if frame is None:
        frame = canonical_frame(config)
    x = frame.plane_to_original(z1, y)
    lt = ShrunkBound(config.grad_bound, config.min_sigma, body).values(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        positive = lt > 1e-12
        safe = np.where(positive, lt, 1.0)
        mask = positive & feasible_mask(z1, np.abs(y), config.r, config.sigma1,
                                        config.sigma2, safe)
    return lt, mask


def constrained_tracing_precondition(config: ProblemConfig, body: ConvexBody,
                          grid_resolution: int = 512) -> PreconditionReport:
    """Check the hypotheses of the constrained boundary characterization on a grid.

    Every grid point of the unconstrained region must lie in the body with a
    positive shrunk bound and satisfy ``|x - x_i*| < l_tilde(x) / sigma_i``
    strictly.  Grid points of that region outside the body count as
    violations, since the shrunk bound is undefined there.
    """
    report = PreconditionReport(r_condition=separation_allows_tracing(config),
                            grid_inclusion_checked=False, resolution=grid_resolution)
    if not report.r_condition:
        report.verdict = "not_applicable"
        report.note = "half-distance exceeds (L/2) min(1/sigma1, 1/sigma2)"
        return report
    if config.dim != 2 or body.dim != 2:
        report.note = "grid check is only implemented for planar problems"
        return report
    try:
        check_minimizers_inside(config, body)
    except InvalidConfig as exc:
        report.verdict = "not_applicable"
        report.note = str(exc)
        return report

    frame = canonical_frame(config)
    z1, y = plane_grid(config, grid_resolution)
    Z, Y = np.meshgrid(z1, y)
    in_m = feasible_mask(Z, np.abs(Y), config.r, config.sigma1, config.sigma2, config.grad_bound)
    zs, ys = Z[in_m], Y[in_m]
    if zs.size == 0:
        report.note = "no grid point fell inside the unconstrained region"
        return report
    x = frame.plane_to_original(zs, ys)
    depth = body.depth(x)
    inside = depth >= -CONTAINS_TOL
    lt = config.grad_bound - config.min_sigma * np.maximum(depth, 0.0)
    d1 = np.linalg.norm(x - config.x1_star, axis=1)
    d2 = np.linalg.norm(x - config.x2_star, axis=1)
    positive = inside & (lt > 1e-12)
    strict = positive & (d1 < lt / config.sigma1) & (d2 < lt / config.sigma2)
    bad = ~strict
    report.grid_inclusion_checked = True
    report.nonpositive_bound = bool(np.any(inside & ~positive))
    report.n_violations = int(bad.sum())
    report.violating_points = x[bad][:MAX_REPORTED_POINTS].tolist()
    if report.n_violations:
        report.verdict = "not_applicable"
        report.note = (f"{report.n_violations} grid points of the unconstrained region fail the "
                       "strict shrunk-ball test")
    else:
        report.verdict = "applicable"
        report.note = (f"grid-verified at resolution {grid_resolution}; evidence, not proof "
                       "(the shrunk-ball set contains the existential set)")
    return report
