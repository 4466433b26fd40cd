"""Boundary extraction by marching squares plus bisection refinement.

The membership indicator is sampled on a grid of the canonical (z1, y) plane
(``u = |y|``), contoured with marching squares, and each contour vertex is
then pushed onto the true boundary by bisecting along the grid edge it sits
on.  The two minimizers are inserted analytically, because the boundary has
a corner there and grid recovery is ill-conditioned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from skimage import measure

from .convex_sets import ConvexBody
from .errors import (
    ConstrainedTracingRefused,
    InvalidConfig,
    NonpositiveBound,
    ResolutionTooCoarse,
    SeparationTooLarge,
)
from .geometry import CanonicalFrame, ProblemConfig, canonical_frame
from .region_p1 import (
    endpoint_is_boundary,
    feasible_mask,
    plane_grid,
    residual_arrays,
    separation_allows_tracing,
)
from .region_p2 import constrained_tracing_precondition, plane_arrays

DEFAULT_RESOLUTION = 512
BISECTION_STEPS = 60
MIN_BOUNDARY_CELLS = 16


@dataclass
class BoundaryPolyline:
    """Ordered boundary vertices in the canonical (z1, y) plane.

    Attributes:
        vertices: (N, 2) array; the second column is the signed transverse
            coordinate, so the curve is closed in the plane.
        residuals: per-vertex |angle-equality residual|, NaN at the minimizers.
        closed: whether the last vertex connects back to the first.
        includes_minimizers: whether both minimizers are vertices.
        metadata: problem data, body, resolution and diagnostics.
    """

    vertices: np.ndarray
    residuals: np.ndarray
    closed: bool
    includes_minimizers: bool
    metadata: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        finite = self.residuals[np.isfinite(self.residuals)]
        return float(finite.max()) if finite.size else math.nan

    def original_vertices(self, frame: CanonicalFrame) -> np.ndarray:
        """Vertices mapped back to the original frame (planar problems)."""
        return frame.plane_to_original(self.vertices[:, 0], self.vertices[:, 1])

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1, axis=0)
        return v[:-1], v[1:]


def _point_segment_distances(points, a, b):
    """Distances from each point to the nearest of the segments a[k] -> b[k]."""
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    best = np.full(len(points), np.inf)
    for start in range(0, len(points), 512):
        p = points[start:start + 512, None, :]
        t = np.clip(np.einsum("pki,ki->pk", p - a[None], ab) / denom, 0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        best[start:start + 512] = np.linalg.norm(p - proj, axis=-1).min(axis=1)
    return best


def hausdorff_distance(p: BoundaryPolyline, q: BoundaryPolyline) -> float:
    """Symmetric Hausdorff distance between two polylines (vertex to segment)."""
    qa, qb = q.segments()
    pa, pb = p.segments()
    return float(max(_point_segment_distances(p.vertices, qa, qb).max(),
                     _point_segment_distances(q.vertices, pa, pb).max()))


def _bisect(indicator, inside, outside, steps=BISECTION_STEPS):
    a, b = inside.copy(), outside.copy()
    for _ in range(steps):
        mid = 0.5 * (a + b)
        m = indicator(mid[:, 0], mid[:, 1])
        a = np.where(m[:, None], mid, a)
        b = np.where(m[:, None], b, mid)
    return 0.5 * (a + b)


def _insert_point(vertices, point, closed):
    a = vertices if closed else vertices[:-1]
    b = np.roll(vertices, -1, axis=0) if closed else vertices[1:]
    ab = b - a
    denom = np.maximum(np.einsum("ki,ki->k", ab, ab), 1e-300)
    t = np.clip(np.einsum("ki,ki->k", point - a, ab) / denom, 0, 1)
    dist = np.linalg.norm(a + t[:, None] * ab - point, axis=1)
    k = int(np.argmin(dist))
    return np.insert(vertices, k + 1, point, axis=0)


def _trace(indicator, residual, z1, y, minimizers, endpoint_flags, metadata):
    """Shared marching-squares pipeline; see the module docstring."""
    Z, Y = np.meshgrid(z1, y)
    mask = indicator(Z, Y)
    contours = measure.find_contours(mask.astype(float), 0.5)
    if not contours:
        raise ResolutionTooCoarse("no boundary cells found")
    contour = max(contours, key=len)
    closed = bool(np.allclose(contour[0], contour[-1]))
    if closed:
        contour = contour[:-1]
    if len(contour) < MIN_BOUNDARY_CELLS:
        raise ResolutionTooCoarse(f"only {len(contour)} boundary cells found")

    rows, cols = contour[:, 0], contour[:, 1]
    on_row = np.abs(rows - np.round(rows)) < 1e-9
    r0 = np.where(on_row, np.round(rows), np.floor(rows)).astype(int)
    c0 = np.where(on_row, np.floor(cols), np.round(cols)).astype(int)
    r1 = np.where(on_row, r0, r0 + 1)
    c1 = np.where(on_row, c0 + 1, c0)
    m0, m1 = mask[r0, c0], mask[r1, c1]
    if np.any(m0 == m1):
        raise RuntimeError("marching squares produced an edge without a membership change")
    p0 = np.column_stack([z1[c0], y[r0]])
    p1 = np.column_stack([z1[c1], y[r1]])
    inside = np.where(m0[:, None], p0, p1)
    outside = np.where(m0[:, None], p1, p0)
    verts = _bisect(indicator, inside, outside)

    scale = 1.0 + float(np.max(np.abs(minimizers)))
    present = []
    for point in minimizers:
        near = np.linalg.norm(verts - point, axis=1) < 1e-9 * scale
        verts[near] = point
        present.append(bool(near.any()))
    for point, flag, found in zip(minimizers, endpoint_flags, present):
        if flag and not found:
            verts = _insert_point(verts, point, closed)
    # collapse consecutive duplicates created by snapping
    keep = np.ones(len(verts), dtype=bool)
    keep[1:] = np.any(verts[1:] != verts[:-1], axis=1)
    if closed and len(verts) > 1 and np.all(verts[0] == verts[-1]):
        keep[-1] = False
    verts = verts[keep]

    at_min = np.zeros(len(verts), dtype=bool)
    for point in minimizers:
        at_min |= np.all(verts == point, axis=1)
    with np.errstate(invalid="ignore"):
        res = np.abs(residual(verts[:, 0], verts[:, 1]))
    res[at_min] = np.nan
    includes = all(np.any(np.all(verts == p, axis=1)) for p in minimizers)

    hz = float(z1[1] - z1[0])
    hy = float(y[1] - y[0])
    metadata = dict(metadata)
    metadata.update({
        "grid_spacing": [hz, hy],
        "bounding_box": [float(z1[0]), float(y[0]), float(z1[-1]), float(y[-1])],
        "components": len(contours),
        "vertex_count": int(len(verts)),
        "minimizers": [list(map(float, p)) for p in minimizers],
        "undefined_residuals": int(np.sum(~np.isfinite(res) & ~at_min)),
    })
    poly = BoundaryPolyline(verts, res, closed, includes, metadata)
    poly.metadata["max_residual"] = poly.max_residual
    return poly


def trace_p1(config: ProblemConfig, resolution: int = DEFAULT_RESOLUTION) -> BoundaryPolyline:
    """Trace the boundary of the unconstrained region in the canonical plane.

    For ambient dimension above 2 the result is the meridian of a surface of
    revolution about the minimizer axis (recorded in the metadata).

    Raises:
        SeparationTooLarge: if the half-distance is too large for the
            boundary to be the angle-equality locus plus the minimizers; use
            ``in_M_hat`` (membership-only mode) instead.
        ResolutionTooCoarse: if fewer than 16 boundary cells are found.
    """
    if not separation_allows_tracing(config):
        raise SeparationTooLarge(
            f"r = {config.r:g} exceeds (L/2) min(1/sigma_i) = "
            f"{0.5 * config.grad_bound / max(config.sigma1, config.sigma2):g}; "
            "boundary tracing is not supported, use membership-only mode")
    r, s1, s2, L = config.r, config.sigma1, config.sigma2, config.grad_bound
    z1, y = plane_grid(config, resolution)

    def indicator(zz, yy):
        return feasible_mask(zz, np.abs(yy), r, s1, s2, L)

    def residual(zz, yy):
        return residual_arrays(zz, np.abs(yy), r, s1, s2, L)

    minimizers = np.array([[-r, 0.0], [r, 0.0]])
    flags = [endpoint_is_boundary(config, 1), endpoint_is_boundary(config, 2)]
    meta = {
        "problem": "p1",
        "config": config.to_dict(),
        "body": None,
        "resolution": resolution,
        "frame": "canonical",
        "geometry": "curve" if config.dim == 2 else "surface_of_revolution",
    }
    return _trace(indicator, residual, z1, y, minimizers, flags, meta)


def trace_p2(config: ProblemConfig, body: ConvexBody,
             resolution: int = DEFAULT_RESOLUTION) -> BoundaryPolyline:
    """Trace the boundary of the constrained region (planar problems only).

    Raises:
        ConstrainedTracingRefused: the grid check of the hypotheses failed; the
            report is attached as ``exc.report``.
        NonpositiveBound: the shrunk bound vanishes inside the unconstrained
            region (body too deep for this L); report attached.
    """
    if config.dim != 2:
        raise InvalidConfig("constrained tracing is restricted to planar problems")
    report = constrained_tracing_precondition(config, body, resolution)
    if report.verdict != "applicable":
        if report.nonpositive_bound:
            raise NonpositiveBound("the shrunk gradient bound is not positive inside the "
                                   "unconstrained region", report)
        raise ConstrainedTracingRefused(f"hypotheses not verified: {report.note}", report)
    frame = canonical_frame(config)
    r, s1, s2 = config.r, config.sigma1, config.sigma2
    z1, y = plane_grid(config, resolution)

    def indicator(zz, yy):
        return plane_arrays(zz, yy, config, body, frame)[1]

    def residual(zz, yy):
        lt, _ = plane_arrays(zz, yy, config, body, frame)
        return residual_arrays(zz, np.abs(yy), r, s1, s2, lt)

    minimizers = np.array([[-r, 0.0], [r, 0.0]])
    meta = {
        "problem": "p2",
        "config": config.to_dict(),
        "body": body.to_dict(),
        "resolution": resolution,
        "frame": "canonical",
        "geometry": "curve",
        "precondition": report.to_dict(),
    }
    poly = _trace(indicator, residual, z1, y, minimizers, [True, True], meta)
    inside_m = feasible_mask(poly.vertices[:, 0], np.abs(poly.vertices[:, 1]), r, s1, s2,
                             config.grad_bound)
    poly.metadata["all_vertices_in_M_hat"] = bool(inside_m.all())
    return poly


# ---------------------------------------------------------------------------
# output


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def emit(polyline: BoundaryPolyline, fmt: str, path, frame: CanonicalFrame = None) -> Path:
    """Write a polyline as CSV, JSON or SVG.

    CSV and JSON are always written in canonical coordinates.  SVG uses the
    original frame when ``frame`` is given (planar problems only).
    """
    path = Path(path)
    if fmt == "csv":
        lines = ["z1,u,residual"]
        for (z, u), res in zip(polyline.vertices, polyline.residuals):
            lines.append(f"{_fmt(z)},{_fmt(u)},{_fmt(res) if math.isfinite(res) else 'nan'}")
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "json":
        doc = {
            "vertices": polyline.vertices.tolist(),
            "residuals": [float(x) if math.isfinite(x) else None for x in polyline.residuals],
            "closed": polyline.closed,
            "metadata": {k: v for k, v in polyline.metadata.items()},
        }
        mr = doc["metadata"].get("max_residual")
        if mr is not None and not math.isfinite(mr):
            doc["metadata"]["max_residual"] = None
        path.write_text(json.dumps(doc, indent=1))
    elif fmt == "svg":
        path.write_text(_svg(polyline, frame))
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return path


def _svg(polyline: BoundaryPolyline, frame):
    minimizers = np.array(polyline.metadata.get("minimizers", []), dtype=float).reshape(-1, 2)
    if frame is not None:
        verts = polyline.original_vertices(frame)[:, :2]
        if len(minimizers):
            minimizers = frame.plane_to_original(minimizers[:, 0], minimizers[:, 1])[:, :2]
    else:
        verts = polyline.vertices
    # SVG's y axis points down
    pts = np.column_stack([verts[:, 0], -verts[:, 1]])
    marks = np.column_stack([minimizers[:, 0], -minimizers[:, 1]]) if len(minimizers) else minimizers
    allpts = np.vstack([pts, marks]) if len(marks) else pts
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    lo = lo - 0.1 * span
    span = span * 1.2
    stroke = 0.004 * float(span.max())
    d = "M " + " L ".join(f"{x:.10g} {y:.10g}" for x, y in pts)
    if polyline.closed:
        d += " Z"
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{lo[0]:.10g} {lo[1]:.10g} {span[0]:.10g} {span[1]:.10g}">',
        f'  <path d="{d}" fill="none" stroke="#1f4e9c" stroke-width="{stroke:.6g}"/>',
    ]
    for x, y in marks:
        out.append(f'  <circle class="minimizer" cx="{x:.10g}" cy="{y:.10g}" '
                   f'r="{3 * stroke:.6g}" fill="#c0392b"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
