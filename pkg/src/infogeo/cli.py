"""Command-line front end.

::

    infogeo <simulate|fit|region|geodesics|curvature|loglik|render> --config PATH
            [--data PATH] [--out DIR] [--seed U64] [--resolution N]

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
Every output file is written to a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .exceptions import ConfigError, InfogeoError
from .geometry import Design, MetricField, curve_length, geodesic_fan
from .gridscan import ScalarGrid, curvature_grid, loglik_grid
from .likelihood import (
    Dataset,
    MleResult,
    chi2_quantile,
    default_box,
    mle,
    trace_confidence_contour,
)
from .render import render_svg
from .synth import generate

COMMANDS = ("simulate", "fit", "region", "geodesics", "curvature", "loglik", "render")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


class _Context:
    def __init__(self, args):
        self.args = args
        self.cfg: ExperimentConfig = load_config(args.config)
        self.out = Path(args.out if args.out is not None else self.cfg.out_dir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError("--out", f"cannot create {self.out}: {exc.strerror}") from None
        self.resolution = args.resolution if args.resolution is not None else self.cfg.resolution

    def data(self) -> Dataset:
        path = Path(self.args.data) if self.args.data else self.out / "data.csv"
        try:
            data = Dataset.from_csv(path, species=self.cfg.spec.species)
        except OSError as exc:
            raise ConfigError("--data", f"cannot read {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError("--data", f"{path}: {exc}") from None
        return data

    def mle(self, data) -> MleResult:
        path = Path(self.args.mle) if getattr(self.args, "mle", None) else self.out / "mle.json"
        if path.exists():
            return _load_mle(path, self.cfg)
        if getattr(self.args, "mle", None):
            raise ConfigError("--mle", f"cannot read {path}")
        return _fit(self.cfg, data)

    def box(self, data=None, mle_result=None):
        if self.cfg.box is not None:
            return self.cfg.box_array()
        if data is None:
            raise ConfigError("analysis.box", "required for this command")
        return default_box(self.cfg.spec, data, mle_result, self.cfg.alpha)


def _fit(cfg, data):
    return mle(
        cfg.spec, data, start=cfg.start_point(), bounds=cfg.box_array(),
        multistart=cfg.multistart,
    )


def _load_mle(path, cfg):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        theta = cfg.spec.coerce(doc["theta_hat"])
        return MleResult(
            theta, float(doc["loglik"]), int(doc["iterations"]), bool(doc["converged"]),
            int(doc.get("n_evaluations", 0)), warnings=tuple(doc.get("warnings", ())),
        )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError("--mle", f"cannot use {path}: {exc}") from None


def cmd_simulate(ctx):
    seed = ctx.args.seed if ctx.args.seed is not None else ctx.cfg.seed
    data = generate(ctx.cfg.synth(seed))
    write_atomic(ctx.out / "data.csv", data.to_csv())
    return [ctx.out / "data.csv"]


def cmd_fit(ctx):
    data = ctx.data()
    result = _fit(ctx.cfg, data)
    doc = result.to_dict()
    doc["names"] = list(ctx.cfg.inferred)
    doc["loglik_at_start"] = _finite_or_none(result.loglik_at_start)
    write_atomic(ctx.out / "mle.json", _json(doc))
    return [ctx.out / "mle.json"]


def cmd_region(ctx):
    data = ctx.data()
    res = ctx.mle(data)
    box = ctx.box(data, res)
    contour = trace_confidence_contour(ctx.cfg.spec, data, res, ctx.cfg.alpha, box)
    summary = {
        "names": list(contour.names),
        "alpha": contour.alpha,
        "delta": chi2_quantile(ctx.cfg.spec.nu, contour.alpha),
        "level": contour.level,
        "closed": contour.closed,
        "open_region": contour.open_region,
        "reason": contour.reason,
        "n_points": int(len(contour.points)),
        "max_abs_residual": float(np.max(np.abs(contour.residuals))) if len(contour.points) else None,
        "theta_hat": res.theta_hat.as_dict(),
        "box": np.asarray(contour.box).tolist(),
    }
    write_atomic(ctx.out / "region.csv", contour.to_csv())
    write_atomic(ctx.out / "summary.json", _json(summary))
    return [ctx.out / "region.csv", ctx.out / "summary.json"]


def cmd_geodesics(ctx):
    data = ctx.data()
    res = ctx.mle(data)
    spec = ctx.cfg.spec
    metric = MetricField.from_model(spec, Design.from_dataset(data))
    length = math.sqrt(chi2_quantile(spec.nu, ctx.cfg.alpha))
    curves = geodesic_fan(metric, res.theta_hat, length, n=ctx.cfg.geodesics)
    lines = ["curve_id,t,theta1,theta2"]
    summary = []
    for k, c in enumerate(curves):
        for t, (a, b) in zip(c.ts, c.params):
            lines.append(f"{k},{float(t)!r},{float(a)!r},{float(b)!r}")
        summary.append({
            "curve_id": k,
            "angle": c.angle,
            "truncated": c.truncated,
            "reason": c.reason,
            "length": curve_length(metric, c) if len(c.ts) > 1 else 0.0,
            "endpoint": [float(v) for v in c.endpoint],
        })
    doc = {"names": list(spec.inferred), "target_length": length, "curves": summary}
    write_atomic(ctx.out / "geodesics.csv", "\n".join(lines) + "\n")
    write_atomic(ctx.out / "geodesics.json", _json(doc))
    return [ctx.out / "geodesics.csv", ctx.out / "geodesics.json"]


def cmd_curvature(ctx):
    grid = curvature_grid(
        (ctx.cfg.spec, ctx.cfg.design), ctx.box(), ctx.resolution, n_jobs=ctx.cfg.n_jobs
    )
    write_atomic(ctx.out / "curvature.csv", grid.to_csv())
    write_atomic(ctx.out / "curvature.failures.json", grid.failures_json())
    return [ctx.out / "curvature.csv", ctx.out / "curvature.failures.json"]


def cmd_loglik(ctx):
    data = ctx.data()
    res = ctx.mle(data)
    grid = loglik_grid(ctx.cfg.spec, data, res, ctx.box(data, res), ctx.resolution, n_jobs=ctx.cfg.n_jobs)
    write_atomic(ctx.out / "loglik.csv", grid.to_csv())
    write_atomic(ctx.out / "loglik.failures.json", grid.failures_json())
    return [ctx.out / "loglik.csv", ctx.out / "loglik.failures.json"]


def _read_points(path, columns):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    idx = [header.index(c) for c in columns]
    return np.array([[float(r[i]) for i in idx] for r in rows]).reshape(-1, len(columns))


def cmd_render(ctx):
    args, out = ctx.args, ctx.out
    names = ctx.cfg.inferred
    if args.grid:
        grid_path = Path(args.grid)
    else:
        candidates = [out / "loglik.csv", out / "curvature.csv"]
        grid_path = next((p for p in candidates if p.exists()), candidates[0])
    try:
        grid = ScalarGrid.from_csv(grid_path, names=names, quantity=grid_path.stem)
    except OSError as exc:
        raise ConfigError("--grid", f"cannot read {grid_path}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError("--grid", f"{grid_path}: {exc}") from None

    region_path = Path(args.region) if args.region else out / "region.csv"
    region, closed = None, False
    if region_path.exists():
        region = _read_points(region_path, ("theta1", "theta2"))
        summary = out / "summary.json"
        if summary.exists():
            closed = bool(json.loads(summary.read_text(encoding="utf-8")).get("closed", False))
    geo_path = Path(args.geodesics) if args.geodesics else out / "geodesics.csv"
    curves = []
    if geo_path.exists():
        pts = _read_points(geo_path, ("curve_id", "theta1", "theta2"))
        for k in np.unique(pts[:, 0]):
            curves.append(pts[pts[:, 0] == k, 1:])
    mle_point = None
    if (out / "mle.json").exists():
        mle_point = _load_mle(out / "mle.json", ctx.cfg).theta_hat.values
    truth = ctx.cfg.truth_point.values
    svg = render_svg(
        grid, region=region, region_closed=closed, geodesics=curves, mle=mle_point,
        truth=truth, title=ctx.cfg.name, version=__version__,
    )
    write_atomic(out / "figure.svg", svg)
    return [out / "figure.svg"]


HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "region": cmd_region,
    "geodesics": cmd_geodesics,
    "curvature": cmd_curvature,
    "loglik": cmd_loglik,
    "render": cmd_render,
}


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _resolution(text):
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("resolution must be at least 2")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="infogeo",
        description="Likelihood inference and Fisher-metric geometry for two-parameter models.",
    )
    parser.add_argument("--version", action="version", version=f"infogeo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "simulate": "draw a synthetic dataset (data.csv)",
        "fit": "maximum-likelihood fit (mle.json)",
        "region": "trace the confidence contour (region.csv, summary.json)",
        "geodesics": "shoot a fan of geodesics from the MLE (geodesics.csv)",
        "curvature": "scalar curvature on a grid (curvature.csv)",
        "loglik": "normalised log-likelihood on a grid (loglik.csv)",
        "render": "draw a heatmap with overlays (figure.svg)",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, metavar="PATH", help="experiment JSON")
        p.add_argument("--data", metavar="PATH", help="dataset CSV (default OUT/data.csv)")
        p.add_argument("--out", metavar="DIR", help="output directory (default analysis.out_dir)")
        p.add_argument("--seed", type=_u64, metavar="U64", help="override design.seed")
        p.add_argument("--resolution", type=_resolution, metavar="N", help="override analysis.resolution")
        if name in ("region", "geodesics", "loglik"):
            p.add_argument("--mle", metavar="PATH", help="fit result (default OUT/mle.json, else refit)")
        if name == "render":
            p.add_argument("--grid", metavar="PATH", help="grid CSV (default OUT/loglik.csv)")
            p.add_argument("--region", metavar="PATH", help="contour CSV (default OUT/region.csv)")
            p.add_argument("--geodesics", metavar="PATH", help="geodesics CSV (default OUT/geodesics.csv)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ctx = _Context(args)
        written = HANDLERS[args.command](ctx)
    except ConfigError as exc:
        print(f"infogeo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfogeoError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"infogeo: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
