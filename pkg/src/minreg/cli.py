"""Command-line front end.

Exit codes:
    0  success (member / hypotheses hold / no violations)
    1  ``member``: the point is not in the region
    2  malformed input (config, point, flags)
    3  ``trace``: the tracing hypotheses fail
    4  ``verify``: containment violations were found

Machine-readable JSON goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .convex_sets import body_from_dict, contains
from .errors import (
    MinRegError,
    NonpositiveBound,
    SeparationTooLarge,
    ConstrainedTracingRefused,
)
from .geometry import ProblemConfig, canonical_frame, reduce
from .oracle import DEFAULT_SLACK_TOL, conservatism_report, verify_containment_p1, \
    verify_containment_p2
from .region_p1 import in_M_hat
from .region_p2 import in_N_hat
from .tracer import DEFAULT_RESOLUTION, emit, trace_p1, trace_p2

EXIT_OK, EXIT_NOT_MEMBER, EXIT_INPUT, EXIT_HYPOTHESES, EXIT_VIOLATIONS = 0, 1, 2, 3, 4
FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    """Malformed run configuration."""


def _vector(value, name):
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None
    if not all(math.isfinite(v) for v in out):
        raise ConfigError(f"{name} must be finite")
    return out


def _positive(value, name):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number") from None
    if not (math.isfinite(out) and out > 0):
        raise ConfigError(f"{name} must be finite and positive")
    return out


@dataclass
class RunConfig:
    """Everything a command needs, in the original (user) frame."""

    problem: str
    x1_star: list
    x2_star: list
    sigma1: float
    sigma2: float
    grad_bound: float
    body: Optional[dict] = None
    resolution: int = DEFAULT_RESOLUTION
    seed: int = 0
    outputs: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {"problem", "x1_star", "x2_star", "sigma1", "sigma2", "grad_bound", "body",
                 "resolution", "seed", "outputs"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            problem = data["problem"]
            x1, x2 = data["x1_star"], data["x2_star"]
            s1, s2, L = data["sigma1"], data["sigma2"], data["grad_bound"]
        except KeyError as exc:
            raise ConfigError(f"config is missing key {exc}") from None
        if problem not in ("p1", "p2"):
            raise ConfigError("problem must be 'p1' or 'p2'")
        body = data.get("body")
        if problem == "p2" and body is None:
            raise ConfigError("problem p2 requires a body")
        if problem == "p1" and body is not None:
            raise ConfigError("problem p1 does not take a body")
        if body is not None and not isinstance(body, dict):
            raise ConfigError("body must be an object")
        resolution = data.get("resolution", DEFAULT_RESOLUTION)
        seed = data.get("seed", 0)
        if not isinstance(resolution, int) or isinstance(resolution, bool) or resolution < 2:
            raise ConfigError("resolution must be an integer >= 2")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        outputs = []
        for item in data.get("outputs", []):
            if isinstance(item, str):
                item = {"path": item}
            if not isinstance(item, dict) or "path" not in item:
                raise ConfigError("outputs entries must be paths or {path, format} objects")
            fmt = item.get("format") or Path(item["path"]).suffix.lstrip(".")
            if fmt not in FORMATS:
                raise ConfigError(f"unsupported output format {fmt!r}")
            outputs.append({"format": fmt, "path": str(item["path"])})
        return cls(problem, _vector(x1, "x1_star"), _vector(x2, "x2_star"),
                   _positive(s1, "sigma1"), _positive(s2, "sigma2"),
                   _positive(L, "grad_bound"), body, resolution, seed, outputs)

    def to_dict(self) -> dict:
        out = {
            "problem": self.problem,
            "x1_star": self.x1_star,
            "x2_star": self.x2_star,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "grad_bound": self.grad_bound,
            "resolution": self.resolution,
            "seed": self.seed,
            "outputs": self.outputs,
        }
        if self.body is not None:
            out["body"] = body_from_dict(self.body).to_dict()
        return out

    def problem_config(self) -> ProblemConfig:
        return ProblemConfig(self.x1_star, self.x2_star, self.sigma1, self.sigma2, self.grad_bound)

    def convex_body(self):
        return None if self.body is None else body_from_dict(self.body)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return RunConfig.from_dict(data)


def parse_point(text: str, dim: int) -> np.ndarray:
    parts = text.split(",")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"malformed point {text!r}") from None
    if len(values) != dim or not all(math.isfinite(v) for v in values):
        raise ConfigError(f"point must have {dim} finite coordinates")
    return np.array(values)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default)


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else x


# ---------------------------------------------------------------------------
# commands


def cmd_member(run: RunConfig, point_text: str, out=None) -> int:
    config = run.problem_config()
    point = parse_point(point_text, config.dim)
    if run.problem == "p1":
        record = in_M_hat(reduce(point, canonical_frame(config)), config).to_dict()
        member = record["in_M_hat"]
    else:
        body = run.convex_body()
        if not contains(body, point):
            record = {"in_C": False, "l_tilde": None, "in_J": False, "angle_ok": False,
                      "in_N_hat": False, "slack": None}
        else:
            record = in_N_hat(point, config, body).to_dict()
        member = record["in_N_hat"]
    record["problem"] = run.problem
    record["point"] = point.tolist()
    print(_dump(record), file=out or sys.stdout)
    return EXIT_OK if member else EXIT_NOT_MEMBER


def _targets(run: RunConfig, formats, out_dir, stem):
    if formats:
        return [(f, Path(out_dir) / f"{stem}.{f}") for f in formats]
    if run.outputs:
        return [(o["format"], Path(o["path"])) for o in run.outputs]
    return [(f, Path(out_dir) / f"{stem}.{f}") for f in ("csv", "svg")]


def _with_suffix_tag(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}{tag}{path.suffix}")


def cmd_trace(run: RunConfig, resolution=None, formats=None, out_dir=".", stem="boundary",
              out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    config = run.problem_config()
    frame = canonical_frame(config)
    resolution = resolution or run.resolution
    try:
        m_hat = trace_p1(config, resolution)
        n_hat = trace_p2(config, run.convex_body(), resolution) if run.problem == "p2" else None
    except SeparationTooLarge as exc:
        print(f"error: {exc}", file=err)
        print(_dump({"verdict": "not_applicable", "error": "SeparationTooLarge",
                     "hint": "use the member command (membership-only mode)"}), file=out)
        return EXIT_HYPOTHESES
    except (ConstrainedTracingRefused, NonpositiveBound) as exc:
        print(f"error: {exc}", file=err)
        print(_dump({"verdict": "not_applicable", "error": type(exc).__name__,
                     "report": exc.report.to_dict() if exc.report else None}), file=out)
        return EXIT_HYPOTHESES
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    written = []
    if n_hat is None:
        for fmt, path in _targets(run, formats, out_dir, f"{stem}_m_hat"):
            written.append(str(emit(m_hat, fmt, path, frame if fmt == "svg" else None)))
        main = m_hat
    else:
        for fmt, path in _targets(run, formats, out_dir, f"{stem}_n_hat"):
            written.append(str(emit(n_hat, fmt, path, frame if fmt == "svg" else None)))
            m_path = _with_suffix_tag(path, "_m_hat") if not path.stem.endswith("_n_hat") \
                else path.with_name(path.name.replace("_n_hat", "_m_hat"))
            written.append(str(emit(m_hat, fmt, m_path, frame if fmt == "svg" else None)))
        main = n_hat
    summary = {
        "problem": run.problem,
        "verdict": "applicable",
        "vertex_count": int(len(main.vertices)),
        "max_residual": _finite_or_none(main.max_residual),
        "files": written,
    }
    if n_hat is not None:
        summary["m_hat_vertex_count"] = int(len(m_hat.vertices))
        summary["m_hat_max_residual"] = _finite_or_none(m_hat.max_residual)
        summary["all_vertices_in_M_hat"] = n_hat.metadata["all_vertices_in_M_hat"]
    print(_dump(summary), file=out)
    return EXIT_OK


def cmd_verify(run: RunConfig, n_samples: int, seed=None, kappa=None,
               slack_tol: float = DEFAULT_SLACK_TOL, threads=None, out_path=None,
               out=None, err=None) -> int:
    config = run.problem_config()
    seed = run.seed if seed is None else seed
    if run.problem == "p1":
        stats = verify_containment_p1(config, n_samples, kappa=kappa or 10.0, seed=seed,
                                      slack_tol=slack_tol, threads=threads)
    else:
        stats = verify_containment_p2(config, run.convex_body(), n_samples, kappa=kappa or 1.5,
                                      seed=seed, slack_tol=slack_tol, threads=threads)
    text = stats.to_json()
    if out_path:
        Path(out_path).write_text(text + "\n")
    print(text, file=out or sys.stdout)
    if stats.violations:
        print(f"error: {len(stats.violations)} containment violations", file=err or sys.stderr)
        return EXIT_VIOLATIONS
    return EXIT_OK


def cmd_report(run: RunConfig, n_samples: int, seed=None, kappa=None, resolution=None,
               threads=None, out=None) -> int:
    result = conservatism_report(run.problem_config(), run.convex_body(), n_samples=n_samples,
                                 grid_resolution=resolution or run.resolution,
                                 kappa=kappa or (20.0 if run.problem == "p1" else 1.5),
                                 seed=run.seed if seed is None else seed, threads=threads)
    print(_dump({k: _finite_or_none(v) if isinstance(v, float) else v
                 for k, v in result.items()}), file=out or sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minreg", description=__doc__.split("\n")[0],
                                     epilog="Worker threads are capped by MINREG_THREADS.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        return p

    p = common(sub.add_parser("member", help="test a point for membership"))
    p.add_argument("--point", required=True, help='comma separated coordinates, e.g. "0,0"')

    p = common(sub.add_parser("trace", help="trace the region boundary"))
    p.add_argument("--resolution", type=int)
    p.add_argument("--format", action="append", choices=FORMATS,
                   help="output format (repeatable); default: config outputs or csv+svg")
    p.add_argument("--out-dir", default=".")

    for name, helptext in (("verify", "empirical containment check"),
                           ("report", "conservatism diagnostic")):
        p = common(sub.add_parser(name, help=helptext))
        p.add_argument("--samples", type=int, default=10000)
        p.add_argument("--seed", type=int)
        p.add_argument("--kappa", type=float)
        p.add_argument("--threads", type=int)
        if name == "verify":
            p.add_argument("--slack-tol", type=float, default=DEFAULT_SLACK_TOL,
                           help="allowed negative angle slack")
            p.add_argument("--out", help="also write the stats JSON here")
        else:
            p.add_argument("--resolution", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        run = load_config(args.config)
        if args.command == "member":
            return cmd_member(run, args.point)
        if args.command == "trace":
            return cmd_trace(run, args.resolution, args.format, args.out_dir,
                             stem=Path(args.config).stem)
        if getattr(args, "samples", 1) < 1:
            raise ConfigError("--samples must be positive")
        if args.command == "verify":
            return cmd_verify(run, args.samples, args.seed, args.kappa, args.slack_tol,
                              args.threads, args.out)
        return cmd_report(run, args.samples, args.seed, args.kappa, args.resolution, args.threads)
    except (ConfigError, MinRegError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
