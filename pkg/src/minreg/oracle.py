"""Ground truth by sampling: random strongly convex pairs and their true minimizers.

Witness functions are quadratics ``f(x) = 1/2 (x - x*)^T A (x - x*)`` with a
spectrum in ``[sigma, kappa * sigma]``, optionally plus ``c ||x - x*||^4``.
Samples that violate the gradient bound of the problem are out of model and
are filtered out, never counted as violations.

Every sample draws from its own Philox stream keyed by ``(seed, index)``, and
samples are processed in fixed-size chunks, so the statistics do not depend
on the number of worker threads.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull, QhullError

from .convex_sets import Ball, Box2D, ConvexBody, Polytope
from .errors import InvalidConfig, NoConvergence
from .geometry import ProblemConfig, canonical_frame, reduce_many
from .region_p1 import feasible_mask, membership_arrays, plane_grid
from .region_p2 import check_minimizers_inside, plane_arrays

CHUNK_SIZE = 256
INTERIOR_MARGIN = 1e-6
DEFAULT_SLACK_TOL = 1e-7
MAX_VIOLATION_RECORDS = 100


# ---------------------------------------------------------------------------
# witness functions


@dataclass(frozen=True, eq=False)
class QuadraticFn:
    """``f(x) = 1/2 (x - minimizer)^T matrix (x - minimizer)``, strongly convex with ``sigma``."""

    matrix: np.ndarray
    minimizer: np.ndarray
    sigma: float

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        x = np.asarray(self.minimizer, dtype=float)
        if A.shape != (x.size, x.size):
            raise InvalidConfig("matrix and minimizer dimensions differ")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * (1 + np.abs(A).max())):
            raise InvalidConfig("matrix must be symmetric")
        lam = np.linalg.eigvalsh(0.5 * (A + A.T))[0]
        if lam < self.sigma * (1 - 1e-12):
            raise InvalidConfig(f"smallest eigenvalue {lam:.6g} is below sigma {self.sigma:.6g}")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "minimizer", x)
        object.__setattr__(self, "sigma", float(self.sigma))

    def value(self, x):
        v = np.asarray(x, dtype=float) - self.minimizer
        return 0.5 * np.einsum("...i,ij,...j->...", v, self.matrix, v)

    def grad(self, x):
        return (np.asarray(x, dtype=float) - self.minimizer) @ self.matrix.T

    def hessian(self, x=None):
        return self.matrix.copy()

    def to_dict(self):
        return {"matrix": self.matrix.tolist(), "minimizer": self.minimizer.tolist(),
                "sigma": self.sigma, "quartic_coeff": 0.0}


@dataclass(frozen=True, eq=False)
class QuarticFn:
    """A quadratic plus ``quartic_coeff * ||x - minimizer||^4``; same modulus and minimizer."""

    base: QuadraticFn
    quartic_coeff: float = 0.0

    def __post_init__(self):
        if not self.quartic_coeff >= 0:
            raise InvalidConfig("quartic coefficient must be nonnegative")

    @property
    def matrix(self):
        return self.base.matrix

    @property
    def minimizer(self):
        return self.base.minimizer

    @property
    def sigma(self):
        return self.base.sigma

    def value(self, x):
        v = np.asarray(x, dtype=float) - self.minimizer
        return self.base.value(x) + self.quartic_coeff * np.sum(v * v, axis=-1) ** 2

    def grad(self, x):
        v = np.asarray(x, dtype=float) - self.minimizer
        sq = np.sum(v * v, axis=-1, keepdims=True)
        return self.base.grad(x) + 4 * self.quartic_coeff * sq * v

    def hessian(self, x):
        v = np.asarray(x, dtype=float) - self.minimizer
        n = v.size
        return self.matrix + 4 * self.quartic_coeff * (v @ v * np.eye(n) + 2 * np.outer(v, v))

    def to_dict(self):
        out = self.base.to_dict()
        out["quartic_coeff"] = float(self.quartic_coeff)
        return out


def _as_quartic(f):
    return f if isinstance(f, QuarticFn) else QuarticFn(f, 0.0)


# ---------------------------------------------------------------------------
# sampling


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_or_rng)))


def _spd_from_draws(gauss, unif, sigma, kappa):
    """Batched ``Q diag(d) Q^T`` with Q from a sign-fixed QR of ``gauss``."""
    q, rr = np.linalg.qr(gauss)
    signs = np.sign(np.diagonal(rr, axis1=-2, axis2=-1))
    signs = np.where(signs == 0, 1.0, signs)
    q = q * signs[..., None, :]
    d = sigma * (1.0 + (kappa - 1.0) * unif)
    A = np.einsum("...ik,...k,...jk->...ij", q, d, q)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    if kappa == 1:
        A = np.broadcast_to(sigma * np.eye(gauss.shape[-1]), A.shape).copy()
    return A


def sample_spd(sigma: float, kappa: float, n: int, seed_or_rng=0) -> np.ndarray:
    """Random symmetric matrix with spectrum in ``[sigma, kappa * sigma]``.

    ``kappa == 1`` returns exactly ``sigma * I``.
    """
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    rng = _rng(seed_or_rng)
    gauss = rng.standard_normal((n, n))
    unif = rng.uniform(size=n)
    return _spd_from_draws(gauss, unif, sigma, kappa)


# ---------------------------------------------------------------------------
# minimizers


def sum_minimizer_quadratic(f1: QuadraticFn, f2: QuadraticFn) -> np.ndarray:
    """Closed-form minimizer ``(A1 + A2)^{-1} (A1 x1* + A2 x2*)``."""
    A = f1.matrix + f2.matrix
    b = f1.matrix @ f1.minimizer + f2.matrix @ f2.minimizer
    return np.linalg.solve(A, b)


def _batched_terms(x, A, xs, c):
    v = x - xs
    sq = np.einsum("bi,bi->b", v, v)
    Av = np.einsum("bij,bj->bi", A, v)
    value = 0.5 * np.einsum("bi,bi->b", v, Av) + c * sq * sq
    grad = Av + 4 * (c * sq)[:, None] * v
    return value, grad, v, sq


def _batched_newton(A1, x1, c1, A2, x2, c2, tol, max_iter):
    """Damped Newton on f1 + f2 for a batch; converged samples are frozen."""
    B, n = x1.shape
    x = np.linalg.solve(A1 + A2, (np.einsum("bij,bj->bi", A1, x1)
                                  + np.einsum("bij,bj->bi", A2, x2))[..., None])[..., 0]
    eye = np.eye(n)

    def evaluate(idx, pts):
        v1, g1, w1, s1 = _batched_terms(pts, A1[idx], x1[idx], c1[idx])
        v2, g2, w2, s2 = _batched_terms(pts, A2[idx], x2[idx], c2[idx])
        return v1 + v2, g1 + g2, (w1, s1, w2, s2)

    all_idx = np.arange(B)
    fval, g, aux = evaluate(all_idx, x)
    gnorm = np.linalg.norm(g, axis=1)
    for _ in range(max_iter):
        active = np.flatnonzero(gnorm >= tol)
        if active.size == 0:
            return x
        w1, s1, w2, s2 = (a[active] for a in aux)
        H = (A1[active] + A2[active]
             + 4 * c1[active, None, None] * (s1[:, None, None] * eye + 2 * np.einsum("bi,bj->bij", w1, w1))
             + 4 * c2[active, None, None] * (s2[:, None, None] * eye + 2 * np.einsum("bi,bj->bij", w2, w2)))
        step = -np.linalg.solve(H, g[active][..., None])[..., 0]
        slope = np.einsum("bi,bi->b", g[active], step)
        t = np.ones(active.size)
        xa, fa, ga = x[active], fval[active], gnorm[active]
        new_x, new_f, new_g = xa.copy(), fa.copy(), g[active].copy()
        pending = np.ones(active.size, dtype=bool)
        for _ in range(60):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            trial = xa[idx] + t[idx, None] * step[idx]
            tf, tg, _ = evaluate(active[idx], trial)
            ok = (tf <= fa[idx] + 1e-4 * t[idx] * slope[idx]) | (np.linalg.norm(tg, axis=1) < ga[idx])
            acc = idx[ok]
            new_x[acc], new_f[acc], new_g[acc] = trial[ok], tf[ok], tg[ok]
            pending[acc] = False
            t[idx[~ok]] *= 0.5
        stalled = pending
        x[active], fval[active], g[active] = new_x, new_f, new_g
        _, _, aux_new = evaluate(active, new_x)
        for a, b in zip(aux, aux_new):
            a[active] = b
        gnorm[active] = np.linalg.norm(new_g, axis=1)
        if np.any(stalled & (gnorm[active] >= tol)):
            break
    if np.any(gnorm >= tol):
        raise NoConvergence(f"Newton did not reach gradient norm {tol:g} "
                            f"(worst {gnorm.max():.3g})")
    return x


def minimize_sum_iterative(f1, f2, tol: float = 1e-9, max_iter: int = 10000) -> np.ndarray:
    """Minimize ``f1 + f2`` by damped Newton, warm-started at the quadratic closed form.

    Raises:
        NoConvergence: if the gradient norm stays above ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    f1, f2 = _as_quartic(f1), _as_quartic(f2)
    x = _batched_newton(f1.matrix[None], f1.minimizer[None], np.array([f1.quartic_coeff]),
                        f2.matrix[None], f2.minimizer[None], np.array([f2.quartic_coeff]),
                        tol, max_iter)
    return x[0]


# ---------------------------------------------------------------------------
# gradient caps on a body


def _ball_max_linear_image(A, v0, rho):
    """max ||A (v0 + w)|| over ||w|| <= rho for symmetric positive definite A."""
    a, Q = np.linalg.eigh(A)
    a2 = a * a
    vt = Q.T @ v0
    top = a2.max()
    vnorm = float(np.linalg.norm(vt))
    if vnorm == 0.0:
        return float(rho * np.sqrt(top))

    def excess(mu):
        w = a2 * vt / (mu - a2)
        return float(w @ w) - rho * rho

    def objective(w):
        return float(np.linalg.norm(a * (vt + w)))

    hi = top + 2 * top * vnorm / rho
    lo = top * (1 + 1e-14) + 1e-300
    candidates = []
    if excess(lo) > 0:
        mu = brentq(excess, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
        candidates.append(objective(a2 * vt / (mu - a2)))
    # hard case: put the remaining radius on the top eigenvector (any feasible
    # w is a valid candidate, so this never overestimates)
    is_top = np.isclose(a2, top, rtol=1e-12, atol=0)
    w = np.zeros_like(vt)
    w[~is_top] = a2[~is_top] * vt[~is_top] / (top - a2[~is_top])
    rest = rho * rho - float(w @ w)
    if rest >= 0:
        k = int(np.flatnonzero(is_top)[0])
        for sign in (1.0, -1.0):
            ww = w.copy()
            ww[k] = sign * math.sqrt(rest)
            candidates.append(objective(ww))
    return max(candidates)


def max_gradient_on_body(A, minimizer, body: ConvexBody) -> float:
    """Exact ``max_{x in body} ||A (x - minimizer)||`` for a quadratic.

    The maximum of a convex function over a polytope sits at a vertex; on a
    ball it is found from the secular equation of the trust-region problem.
    """
    if isinstance(body, Ball):
        return _ball_max_linear_image(np.asarray(A, dtype=float),
                                      body.center - np.asarray(minimizer, dtype=float), body.radius)
    if isinstance(body, (Box2D, Polytope)):
        v = body.vertices() - minimizer
        return float(np.linalg.norm(v @ np.asarray(A).T, axis=1).max())
    raise TypeError(f"unsupported body {type(body).__name__}")


# ---------------------------------------------------------------------------
# containment runs


@dataclass
class ContainmentStats:
    """Outcome of a containment run.

    Attributes:
        samples: number of sampled pairs.
        valid: pairs that satisfy the gradient hypotheses.
        contained: valid pairs whose minimizer is in the region.
        violations: records of valid pairs whose minimizer is not.
        contained_p1: for constrained runs, valid minimizers also in the
            unconstrained region.
    """

    samples: int
    valid: int
    contained: int
    violations: list = field(default_factory=list)
    contained_p1: Optional[int] = None
    valid_minimizers: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {"samples": self.samples, "valid": self.valid, "contained": self.contained,
               "violations": self.violations}
        if self.contained_p1 is not None:
            out["contained_p1"] = self.contained_p1
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def worker_count(threads: Optional[int] = None) -> int:
    """Threads requested, capped by ``MINREG_THREADS`` when set."""
    if threads is None:
        threads = os.cpu_count() or 1
    cap = os.environ.get("MINREG_THREADS")
    if cap:
        threads = min(threads, max(1, int(cap)))
    return max(1, int(threads))


def _draw_chunk(seed, start, stop, n):
    """Per-sample streams: two Gaussian n x n blocks, two spectra, quartic draws."""
    g = np.empty((stop - start, 2, n, n))
    e = np.empty((stop - start, 2, n))
    extra = np.empty((stop - start, 3))
    for k, i in enumerate(range(start, stop)):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, i])))
        g[k, 0] = rng.standard_normal((n, n))
        e[k, 0] = rng.uniform(size=n)
        g[k, 1] = rng.standard_normal((n, n))
        e[k, 1] = rng.uniform(size=n)
        extra[k] = rng.uniform(size=3)
    return g, e, extra


def _run_chunks(func, n_samples, threads):
    bounds = [(s, min(s + CHUNK_SIZE, n_samples)) for s in range(0, n_samples, CHUNK_SIZE)]
    workers = worker_count(threads)
    if workers == 1 or len(bounds) <= 1:
        return [func(s, e) for s, e in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: func(*b), bounds))


def _pair_record(index, A1, A2, c1, c2, config, x_hat, detail):
    return {
        "index": int(index),
        "f1": {"matrix": A1.tolist(), "minimizer": config.x1_star.tolist(),
               "sigma": config.sigma1, "quartic_coeff": float(c1)},
        "f2": {"matrix": A2.tolist(), "minimizer": config.x2_star.tolist(),
               "sigma": config.sigma2, "quartic_coeff": float(c2)},
        "x_hat": x_hat.tolist(),
        "membership": detail,
    }


def _merge(parts, n_samples, dim, with_p1=False):
    minimizers = [p["minimizers"] for p in parts if len(p["minimizers"])]
    violations = [v for p in parts for v in p["violations"]][:MAX_VIOLATION_RECORDS]
    return ContainmentStats(
        samples=n_samples,
        valid=sum(p["valid"] for p in parts),
        contained=sum(p["contained"] for p in parts),
        violations=violations,
        contained_p1=sum(p["contained_p1"] for p in parts) if with_p1 else None,
        valid_minimizers=np.vstack(minimizers) if minimizers else np.empty((0, dim)),
    )


def verify_containment_p1(config: ProblemConfig, n_samples: int, kappa: float = 10.0,
                          quartic_fraction: float = 0.25, seed: int = 0,
                          slack_tol: float = DEFAULT_SLACK_TOL,
                          threads: Optional[int] = None) -> ContainmentStats:
    """Sample pairs, keep those with ``||grad f1(x_hat)|| <= L``, test membership.

    A fraction ``quartic_fraction`` of the pairs get quartic terms with
    coefficients uniform in ``[0, sigma_i / (2r)^2]``.
    """
    n, r = config.dim, config.r
    frame = canonical_frame(config)
    s = np.array([config.sigma1, config.sigma2])

    def chunk(start, stop):
        g, e, extra = _draw_chunk(seed, start, stop, n)
        A1 = _spd_from_draws(g[:, 0], e[:, 0], config.sigma1, kappa)
        A2 = _spd_from_draws(g[:, 1], e[:, 1], config.sigma2, kappa)
        quartic = extra[:, 0] < quartic_fraction
        c1 = np.where(quartic, extra[:, 1] * s[0] / (2 * r) ** 2, 0.0)
        c2 = np.where(quartic, extra[:, 2] * s[1] / (2 * r) ** 2, 0.0)
        m = stop - start
        x1 = np.broadcast_to(config.x1_star, (m, n))
        x2 = np.broadcast_to(config.x2_star, (m, n))
        x_hat = _batched_newton(A1, x1, c1, A2, x2, c2, 1e-9, 10000)
        _, g1, _, _ = _batched_terms(x_hat, A1, x1, c1)
        gn = np.linalg.norm(g1, axis=1)
        valid = gn <= config.grad_bound
        z1, u = reduce_many(x_hat, frame)
        in_h, angle_ok, slack = membership_arrays(z1, u, r, config.sigma1, config.sigma2,
                                                  config.grad_bound, slack_tol=slack_tol)
        member = in_h & angle_ok
        bad = np.flatnonzero(valid & ~member)
        violations = [
            _pair_record(start + k, A1[k], A2[k], c1[k], c2[k], config, x_hat[k],
                         {"in_H": bool(in_h[k]), "angle_ok": bool(angle_ok[k]),
                          "slack": float(slack[k]), "grad_norm": float(gn[k])})
            for k in bad
        ]
        return {"valid": int(valid.sum()), "contained": int((valid & member).sum()),
                "contained_p1": 0, "violations": violations, "minimizers": x_hat[valid]}

    return _merge(_run_chunks(chunk, n_samples, threads), n_samples, n)


def verify_containment_p2(config: ProblemConfig, body: ConvexBody, n_samples: int,
                          kappa: float = 1.5, seed: int = 0,
                          slack_tol: float = DEFAULT_SLACK_TOL,
                          threads: Optional[int] = None) -> ContainmentStats:
    """Constrained analogue of :func:`verify_containment_p1` with quadratic witnesses.

    A pair is valid when both gradients are bounded by L on the whole body
    and the unconstrained minimizer of the sum is at least 1e-6 inside it.
    """
    check_minimizers_inside(config, body)
    n, r, L = config.dim, config.r, config.grad_bound
    frame = canonical_frame(config)

    def chunk(start, stop):
        g, e, _ = _draw_chunk(seed, start, stop, n)
        A1 = _spd_from_draws(g[:, 0], e[:, 0], config.sigma1, kappa)
        A2 = _spd_from_draws(g[:, 1], e[:, 1], config.sigma2, kappa)
        b = np.einsum("bij,j->bi", A1, config.x1_star) + np.einsum("bij,j->bi", A2, config.x2_star)
        x_hat = np.linalg.solve(A1 + A2, b[..., None])[..., 0]
        cap1 = np.array([max_gradient_on_body(A, config.x1_star, body) for A in A1])
        cap2 = np.array([max_gradient_on_body(A, config.x2_star, body) for A in A2])
        depth = body.depth(x_hat)
        valid = (cap1 <= L) & (cap2 <= L) & (depth > INTERIOR_MARGIN)
        lt = L - config.min_sigma * np.maximum(depth, 0.0)
        safe = np.where(lt > 1e-12, lt, 1.0)
        z1, u = reduce_many(x_hat, frame)
        in_j, angle_ok, slack = membership_arrays(z1, u, r, config.sigma1, config.sigma2, safe,
                                                  slack_tol=slack_tol)
        member = (lt > 1e-12) & in_j & angle_ok
        in_h, ok1, _ = membership_arrays(z1, u, r, config.sigma1, config.sigma2, L,
                                         slack_tol=slack_tol)
        bad = np.flatnonzero(valid & ~member)
        violations = [
            _pair_record(start + k, A1[k], A2[k], 0.0, 0.0, config, x_hat[k],
                         {"in_J": bool(in_j[k]), "angle_ok": bool(angle_ok[k]),
                          "slack": float(slack[k]), "l_tilde": float(lt[k]),
                          "in_M_hat": bool(in_h[k] & ok1[k])})
            for k in bad
        ]
        return {"valid": int(valid.sum()), "contained": int((valid & member).sum()),
                "contained_p1": int((valid & in_h & ok1).sum()),
                "violations": violations, "minimizers": x_hat[valid]}

    return _merge(_run_chunks(chunk, n_samples, threads), n_samples, n, with_p1=True)


def check_pair(f1, f2, config: ProblemConfig, body: Optional[ConvexBody] = None,
               slack_tol: float = DEFAULT_SLACK_TOL) -> dict:
    """Validity and membership for one explicit pair of witness functions."""
    f1, f2 = _as_quartic(f1), _as_quartic(f2)
    x_hat = minimize_sum_iterative(f1, f2, tol=1e-12)
    frame = canonical_frame(config)
    z1, u = reduce_many(x_hat, frame)
    L = config.grad_bound
    if body is None:
        valid = bool(np.linalg.norm(f1.grad(x_hat)) <= L * (1 + 1e-12))
        bound = L
    else:
        caps = [max_gradient_on_body(f.matrix, f.minimizer, body) for f in (f1, f2)]
        depth = float(body.depth(x_hat))
        valid = all(c <= L for c in caps) and depth > INTERIOR_MARGIN
        bound = L - config.min_sigma * max(depth, 0.0)
    in_h, angle_ok, slack = membership_arrays(z1, u, config.r, config.sigma1, config.sigma2,
                                              bound, slack_tol=slack_tol)
    return {"x_hat": x_hat, "valid": valid, "contained": bool(in_h[0] and angle_ok[0]),
            "slack": float(slack[0])}


# ---------------------------------------------------------------------------
# conservatism


def conservatism_report(config: ProblemConfig, body: Optional[ConvexBody] = None,
                        n_samples: int = 20000, grid_resolution: int = 512,
                        kappa: float = 20.0, seed: int = 0,
                        threads: Optional[int] = None) -> dict:
    """Area of the convex hull of observed minimizers relative to the region area."""
    if config.dim != 2:
        raise InvalidConfig("the conservatism report needs a planar problem")
    frame = canonical_frame(config)
    z1, y = plane_grid(config, grid_resolution)
    Z, Y = np.meshgrid(z1, y)
    if body is None:
        mask = feasible_mask(Z, np.abs(Y), config.r, config.sigma1, config.sigma2, config.grad_bound)
        stats = verify_containment_p1(config, n_samples, kappa=kappa, seed=seed, threads=threads)
    else:
        _, mask = plane_arrays(Z, Y, config, body, frame)
        stats = verify_containment_p2(config, body, n_samples, kappa=kappa, seed=seed,
                                      threads=threads)
    cell = float((z1[1] - z1[0]) * (y[1] - y[0]))
    region_area = float(mask.sum()) * cell
    pts = frame.forward(stats.valid_minimizers) if stats.valid else np.empty((0, 2))
    try:
        hull_area = float(ConvexHull(pts).volume) if len(pts) >= 3 else 0.0
    except QhullError:
        hull_area = 0.0
    return {"region_area": region_area, "hull_area": hull_area,
            "ratio": hull_area / region_area if region_area > 0 else math.nan,
            "valid_samples": stats.valid, "samples": stats.samples}
