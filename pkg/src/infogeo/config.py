"""Experiment configuration: a single JSON document checked against a JSON Schema."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .exceptions import ConfigError, DomainError
from .geometry import Design
from .models import FAMILIES, ModelSpec
from .synth import SynthConfig

__all__ = ["ExperimentConfig", "load_config", "parse_config", "schema", "bundled_configs"]

DEFAULTS = {
    "alpha": 0.95,
    "resolution": 100,
    "geodesics": 20,
    "start": "truth",
    "multistart": False,
    "n_jobs": 1,
    "out_dir": ".",
}


def schema():
    """The configuration JSON Schema as a dict."""
    text = resources.files("infogeo").joinpath("config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def bundled_configs():
    """Mapping of bundled example name to its path."""
    root = resources.files("infogeo").joinpath("configs")
    return {p.name[: -len(".json")]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated experiment.

    ``truth`` holds every family parameter; ``spec.fixed`` takes the
    non-inferred truth values unless ``model.fixed`` overrides them.
    """

    name: str
    spec: ModelSpec
    truth: dict
    times: np.ndarray
    counts: np.ndarray
    seed: int
    alpha: float
    box: dict
    resolution: int
    geodesics: int
    start: object
    multistart: bool
    n_jobs: int
    out_dir: str

    @property
    def design(self) -> Design:
        return Design(self.times, self.counts, self.spec.species)

    def synth(self, seed=None) -> SynthConfig:
        return SynthConfig(self.spec, self.truth, self.times, self.counts,
                           self.seed if seed is None else seed)

    @property
    def truth_point(self):
        return self.spec.point([self.truth[n] for n in self.inferred])

    @property
    def inferred(self):
        return self.spec.inferred

    def start_point(self):
        if self.start == "truth":
            return self.truth_point
        if self.start == "center":
            return None
        return self.spec.coerce(dict(self.start))

    def box_array(self):
        if self.box is None:
            return None
        return np.array([self.box[n] for n in self.inferred], dtype=float)


def _path(parts):
    return ".".join(str(p) for p in parts) or "<root>"


def load_config(path) -> ExperimentConfig:
    """Read and validate a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(doc)


def parse_config(doc) -> ExperimentConfig:
    """Validate a configuration document and build the experiment."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_path(err.absolute_path), err.message)

    model = doc["model"]
    family = model["family"]
    fam = FAMILIES[family]
    inferred = tuple(model["inferred"])
    truth = {k: float(v) for k, v in doc["truth"].items()}
    for name in truth:
        if name not in fam.parameters:
            raise ConfigError(f"truth.{name}", f"not a parameter of {family} (expected {list(fam.parameters)})")
    for name in fam.parameters:
        if name not in truth:
            raise ConfigError("truth", f"missing value for {name!r}")
    for name, value in truth.items():
        lo, hi = fam.bounds[name]
        if name == "sigma":
            if not value >= 0:
                raise ConfigError("truth.sigma", f"must be non-negative, got {value}")
        elif not lo <= value <= hi:
            raise ConfigError(f"truth.{name}", f"{value} violates bound [{lo:g}, {hi:g}]")
    for name in inferred:
        if name not in fam.parameters:
            raise ConfigError("model.inferred", f"{name!r} is not a parameter of {family}")

    fixed = {n: truth[n] for n in fam.parameters if n not in inferred}
    for name, value in model.get("fixed", {}).items():
        if name in inferred:
            raise ConfigError(f"model.fixed.{name}", "parameter is also inferred")
        if name not in fam.parameters:
            raise ConfigError(f"model.fixed.{name}", f"not a parameter of {family}")
        fixed[name] = float(value)
    if fixed.get("sigma", 1.0) <= 0:
        raise ConfigError(
            "model.fixed.sigma",
            "the analysis needs a positive sigma; truth.sigma is 0, so set model.fixed.sigma",
        )
    try:
        spec = ModelSpec(family, fixed, inferred, model.get("species"), model.get("initial_conditions"))
    except DomainError as exc:
        raise ConfigError("model", str(exc)) from None

    design = doc["design"]
    times = np.array(design["times"], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ConfigError("design.times", "must be strictly increasing")
    counts = design["counts"]
    if isinstance(counts, list):
        if len(counts) != times.size:
            raise ConfigError("design.counts", f"needs {times.size} entries, got {len(counts)}")
        counts = np.array(counts, dtype=int)
    else:
        counts = np.full(times.size, int(counts))

    analysis = dict(DEFAULTS)
    analysis.update(doc.get("analysis", {}))
    box = analysis.get("box")
    if box is not None:
        bounds = spec.bounds()
        for i, name in enumerate(inferred):
            if name not in box:
                raise ConfigError("analysis.box", f"missing range for {name!r}")
            lo, hi = box[name]
            if not (lo < hi and math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigError(f"analysis.box.{name}", f"need finite lo < hi, got {[lo, hi]}")
            if lo < bounds[i, 0] or hi > bounds[i, 1]:
                raise ConfigError(
                    f"analysis.box.{name}",
                    f"{[lo, hi]} exceeds the bound [{bounds[i, 0]:g}, {bounds[i, 1]:g}]",
                )
        extra = set(box) - set(inferred)
        if extra:
            raise ConfigError("analysis.box", f"unknown parameters {sorted(extra)}")
        box = {n: (float(box[n][0]), float(box[n][1])) for n in inferred}
    start = analysis["start"]
    if isinstance(start, dict) and set(start) != set(inferred):
        raise ConfigError("analysis.start", f"needs exactly the inferred parameters {list(inferred)}")

    return ExperimentConfig(
        name=doc.get("name", family),
        spec=spec,
        truth=truth,
        times=times,
        counts=counts,
        seed=int(design.get("seed", 0)),
        alpha=float(analysis["alpha"]),
        box=box,
        resolution=int(analysis["resolution"]),
        geodesics=int(analysis["geodesics"]),
        start=start,
        multistart=bool(analysis["multistart"]),
        n_jobs=int(analysis["n_jobs"]),
        out_dir=str(analysis["out_dir"]),
    )
