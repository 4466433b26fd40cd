"""Acceptance criteria AC1 to AC10, one test per criterion.

Run ``pytest tests/test_acceptance.py`` (or this file as a script); the
terminal summary prints one PASS/FAIL line per criterion.
"""

import json
import math
import sys
import time

import numpy as np
import pytest

from minreg.cli import main
from minreg.convex_sets import Ball, Box2D, Polytope, distance_to_boundary
from minreg.geometry import ProblemConfig, ReducedPoint, canonical_frame, reduce
from minreg.oracle import (
    QuadraticFn,
    check_pair,
    sum_minimizer_quadratic,
    verify_containment_p1,
    verify_containment_p2,
)
from minreg.region_p1 import boundary_ball_angle_violation, derived_params, in_M_hat, \
    t_n_residual
from minreg.tracer import BoundaryPolyline, hausdorff_distance, trace_p1, trace_p2

pytestmark = pytest.mark.acceptance

NEAR_PAIR = ProblemConfig([-1.0, 0.0], [1.0, 0.0], 1.0, 1.0, 10.0)
BODIES = {
    "circle": Ball([0.0, 1.0], 5.0),
    "box": Box2D([0.0, 1.0], [5.0, 5.0], math.pi / 4),
}


def test_ac1_intro_counterexample():
    start = time.perf_counter()
    sigma = (3 - math.sqrt(5)) / 2
    # f1 = x^2 - xy + y^2/2 and f2 = x^2 + xy + y^2/2 - 4x - 2y, up to constants
    f1 = QuadraticFn([[2.0, -1.0], [-1.0, 1.0]], [0.0, 0.0], sigma)
    f2 = QuadraticFn([[2.0, 1.0], [1.0, 1.0]], [2.0, 0.0], sigma)
    x = sum_minimizer_quadratic(f1, f2)
    assert np.allclose(x, [1.0, 1.0], rtol=0, atol=1e-10)
    # distance to the segment from (0,0) to (2,0) is 1, so x is off the hull
    assert abs(x[1]) > 0.5
    config = ProblemConfig([0.0, 0.0], [2.0, 0.0], sigma, sigma, 1.0)
    assert in_M_hat(reduce(x, canonical_frame(config)), config).in_M_hat
    assert check_pair(f1, f2, config)["contained"]
    assert time.perf_counter() - start < 1.0


def test_ac2_containment_unconstrained():
    start = time.perf_counter()
    configs = [
        ProblemConfig([-4.0, 0.0], [4.0, 0.0], 1.0, 1.0, 10.0),
        ProblemConfig([-4.0, 0.0], [4.0, 0.0], 2.0, 1.0, 10.0),
        ProblemConfig([-4.0, 0.0], [4.0, 0.0], 1.0, 3.0, 10.0),
        ProblemConfig([-2.0, 1.0, 2.0], [2.0, -1.0, 0.0], 1.0, 1.0, 10.0),
    ]
    for k, config in enumerate(configs):
        quad = verify_containment_p1(config, 10000, kappa=10, quartic_fraction=0.0, seed=k,
                                     slack_tol=1e-7)
        quart = verify_containment_p1(config, 2500, kappa=10, quartic_fraction=1.0,
                                      seed=100 + k, slack_tol=1e-7)
        for stats in (quad, quart):
            assert stats.violations == []
            assert stats.valid == stats.contained > 0
    assert time.perf_counter() - start < 30.0


# spectra are kept narrow so the body-wide gradient cap passes for most draws
@pytest.mark.parametrize("name,kappa", [("circle", 1.5), ("box", 1.2)])
def test_ac3_containment_constrained(name, kappa):
    start = time.perf_counter()
    stats = verify_containment_p2(NEAR_PAIR, BODIES[name], 5000, kappa=kappa, seed=7)
    assert stats.valid >= 5000
    assert stats.violations == []
    assert stats.contained == stats.valid
    assert stats.contained_p1 == stats.valid
    assert time.perf_counter() - start < 60.0


def test_ac4_minimizer_endpoints():
    L, eps = 10.0, 1e-3
    for sigma2 in (0.5, 1.0, 1.5, 2.0, 3.0):
        for r in (0.5, 1.5, 2.5, 3.5, 5.0):
            config = ProblemConfig([-r, 0.0], [r, 0.0], 1.0, sigma2, L)
            if r <= L / (2 * sigma2):
                assert in_M_hat(ReducedPoint(-r, 0.0), config).in_M_hat
                assert in_M_hat(ReducedPoint(-r + eps, 0.0), config).in_M_hat
                assert not in_M_hat(ReducedPoint(-r - eps, 0.0), config).in_M_hat
            else:
                assert not in_M_hat(ReducedPoint(-r, 0.0), config).in_M_hat


def test_ac5_ball_boundary_thresholds():
    rng = np.random.default_rng(5)
    configs = [(1, 1, 4), (2, 1, 2), (1, 3, 1), (1, 1, 7), (1, 2, 4), (0.5, 1.5, 3)]
    for s1, s2, r in configs:
        config = ProblemConfig([-r, 0.0], [r, 0.0], s1, s2, 10.0)
        dp = derived_params(config)
        for ball, lam, center, radius in ((1, dp.lambda1, -r, 10 / s1),
                                          (2, dp.lambda2, r, 10 / s2)):
            t = rng.uniform(0, math.pi, 1000)
            agree = 0
            for z1, u in zip(center + radius * np.cos(t), radius * np.sin(t)):
                got = boundary_ball_angle_violation(ReducedPoint(z1, u), config, ball)
                agree += got == (z1 < lam if ball == 1 else z1 > lam)
            assert agree == 1000


def test_ac6_threshold_equality_case():
    for s1, s2 in ((1.0, 1.0), (2.0, 2.0)):
        L = 10.0
        r = L / (2 * s1)
        config = ProblemConfig([-r, 0.0], [r, 0.0], s1, s2, L)
        lam1 = derived_params(config).lambda1
        assert abs(lam1 - (L / s1 - r)) < 1e-12 and abs(lam1 - r) < 1e-12
    dp = derived_params(ProblemConfig([-4.0, 0.0], [4.0, 0.0], 1.0, 1.0, 10.0))
    assert abs(dp.lambda1 - 7.0) < 1e-12 and abs(dp.lambda2 + 7.0) < 1e-12


def _mirror(p, sz, sy):
    return BoundaryPolyline(p.vertices * [sz, sy], p.residuals, p.closed, p.includes_minimizers)


def _bisect_extent(config):
    lo, hi = 1.0, 10.0 - 1e-9
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_n_residual(ReducedPoint(0.0, mid), config) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_ac7_unconstrained_boundary():
    config = ProblemConfig([-4.0, 0.0], [4.0, 0.0], 1.0, 1.0, 10.0)
    start = time.perf_counter()
    p = trace_p1(config, 512)
    elapsed = time.perf_counter() - start
    assert p.closed and p.includes_minimizers
    for m in ([-4.0, 0.0], [4.0, 0.0]):
        assert np.any(np.all(p.vertices == m, axis=1))
    h = max(p.metadata["grid_spacing"])
    assert hausdorff_distance(p, _mirror(p, -1, 1)) < h
    assert hausdorff_distance(p, _mirror(p, 1, -1)) < h
    assert p.max_residual < 1e-8
    assert abs(np.abs(p.vertices[:, 1]).max() - _bisect_extent(config)) < 1e-6
    assert elapsed < 10.0


@pytest.mark.parametrize("name", ["circle", "box"])
def test_ac8_constrained_boundary(name):
    body = BODIES[name]
    start = time.perf_counter()
    inner = trace_p2(NEAR_PAIR, body, 512)
    outer = trace_p1(NEAR_PAIR, 512)
    elapsed = time.perf_counter() - start
    frame = canonical_frame(NEAR_PAIR)
    x = frame.plane_to_original(inner.vertices[:, 0], inner.vertices[:, 1])
    for xi in x:
        assert in_M_hat(reduce(xi, frame), NEAR_PAIR).in_M_hat
    depth = body.depth(x)
    off = depth > 1e-9
    assert np.all(NEAR_PAIR.grad_bound - NEAR_PAIR.min_sigma * depth[off] < NEAR_PAIR.grad_bound)
    # away from the shared minimizers the inner curve is strictly inside
    d1 = np.linalg.norm(x - NEAR_PAIR.x1_star, axis=1)
    d2 = np.linalg.norm(x - NEAR_PAIR.x2_star, axis=1)
    away = np.minimum(d1, d2) > 1e-3
    slack = np.array([in_M_hat(reduce(xi, frame), NEAR_PAIR).slack for xi in x[away]])
    assert np.all(slack > 0)
    assert np.abs(inner.vertices[:, 1]).max() < np.abs(outer.vertices[:, 1]).max()
    assert elapsed < 20.0


def _dense_boundary(body, n=20000):
    if isinstance(body, Ball):
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return body.center + body.radius * np.column_stack([np.cos(t), np.sin(t)])
    v = body.vertices()
    k = n // len(v)
    return np.vstack([a + np.linspace(0, 1, k, endpoint=False)[:, None] * (b - a)
                      for a, b in zip(v, np.roll(v, -1, axis=0))])


def test_ac9_distance_oracle():
    rng = np.random.default_rng(9)
    angles = np.sort(rng.uniform(0, 2 * np.pi, 6))
    bodies = [Ball([0.5, -0.5], 2.0)]
    bodies += [Box2D([0.0, 1.0], [3.0, 1.0], t) for t in (0.0, math.pi / 8, math.pi / 4)]
    bodies.append(Polytope(np.column_stack([np.cos(angles), np.sin(angles)]),
                           rng.uniform(1.0, 3.0, 6)))
    for body in bodies:
        boundary = _dense_boundary(body)
        lo, hi = body.bounding_box()
        pts = rng.uniform(lo, hi, size=(4000, 2))
        pts = pts[body.depth(pts) > 0][:100]
        assert len(pts) == 100
        dense = np.min(np.linalg.norm(pts[:, None] - boundary[None], axis=-1), axis=1)
        exact = np.array([distance_to_boundary(body, x) for x in pts])
        assert np.max(np.abs(dense - exact)) < 2e-3 * body.diameter()


def test_ac10_determinism(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"problem": "p1", "x1_star": [-4, 0], "x2_star": [4, 0],
                               "sigma1": 1, "sigma2": 1, "grad_bound": 10, "seed": 11}))
    blobs = []
    for k, threads in enumerate(("1", "1", "8")):
        monkeypatch.setenv("MINREG_THREADS", threads)
        out = tmp_path / f"stats{k}.json"
        assert main(["verify", "--config", str(cfg), "--samples", "5000", "--threads", "8",
                     "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    capsys.readouterr()
    assert blobs[0] == blobs[1] == blobs[2]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
