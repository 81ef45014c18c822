import csv
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from infogeo.cli import EXIT_CONFIG, EXIT_OK, main, write_atomic
from infogeo.config import bundled_configs, load_config, schema
from infogeo.models import solve_forward

CONFIGS = bundled_configs()
ROOT = Path(__file__).resolve().parents[1]


def run(*argv):
    return main([str(a) for a in argv])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def leftovers(directory):
    return [p.name for p in Path(directory).iterdir() if p.name.endswith(".tmp")]


@pytest.fixture
def bad_config(tmp_path):
    def make(edit):
        doc = json.loads(CONFIGS["linear"].read_text())
        edit(doc)
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        return path

    return make


class TestConfigs:
    def test_docs_schema_matches_package(self):
        assert json.loads((ROOT / "docs" / "config.schema.json").read_text()) == schema()

    @pytest.mark.parametrize("name", sorted(CONFIGS))
    def test_bundled_configs_validate(self, name):
        jsonschema.validate(json.loads(CONFIGS[name].read_text()), schema())
        cfg = load_config(CONFIGS[name])
        assert cfg.name == name

    def test_expected_bundle(self):
        assert {"univariate-normal", "mvn-means", "logistic-mid-late", "logistic-early-mid-late",
                "sir-infected-only", "sir-all-species"} <= set(CONFIGS)


class TestSimulate:
    def test_logistic_rows(self, tmp_path):
        assert run("simulate", "--config", CONFIGS["logistic-early-mid-late"], "--out", tmp_path) == EXIT_OK
        rows = read_rows(tmp_path / "data.csv")
        assert len(rows) == 30
        assert list(rows[0]) == ["time", "species", "replicate", "value"]
        assert {r["species"] for r in rows} == {"C"}

    def test_sir_infected_only(self, tmp_path):
        assert run("simulate", "--config", CONFIGS["sir-infected-only"], "--out", tmp_path) == EXIT_OK
        rows = read_rows(tmp_path / "data.csv")
        assert len(rows) == 30
        assert {r["species"] for r in rows} == {"I"}

    def test_zero_sigma_gives_means(self, tmp_path, bad_config):
        def edit(doc):
            # Noise-free draws; the analysis model keeps a positive sigma.
            doc["model"]["fixed"] = {"sigma": doc["truth"]["sigma"]}
            doc["truth"]["sigma"] = 0.0
        assert run("simulate", "--config", bad_config(edit), "--out", tmp_path) == EXIT_OK
        cfg = load_config(CONFIGS["linear"])
        means = solve_forward(cfg.spec, cfg.truth_point, cfg.times).means[:, 0]
        rows = read_rows(tmp_path / "data.csv")
        for row in rows:
            j = int(np.flatnonzero(cfg.times == float(row["time"]))[0])
            assert float(row["value"]) == means[j]

    def test_seed_override(self, tmp_path):
        cfg = CONFIGS["linear"]
        run("simulate", "--config", cfg, "--out", tmp_path / "a")
        run("simulate", "--config", cfg, "--out", tmp_path / "b", "--seed", 7)
        assert (tmp_path / "a" / "data.csv").read_bytes() != (tmp_path / "b" / "data.csv").read_bytes()

    def test_no_temporary_files_left(self, tmp_path):
        run("simulate", "--config", CONFIGS["linear"], "--out", tmp_path)
        assert leftovers(tmp_path) == []


class TestErrors:
    @pytest.mark.parametrize(
        "edit, field",
        [
            (lambda d: d["design"].__setitem__("counts", 0), "design.counts"),
            (lambda d: d["analysis"].__setitem__("alpha", 1.5), "analysis.alpha"),
            (lambda d: d["design"].__setitem__("times", [0.5, 0.1]), "design.times"),
            (lambda d: d["model"].__setitem__("family", "gompertz"), "model.family"),
        ],
    )
    def test_invalid_config_exit_code(self, tmp_path, bad_config, capsys, edit, field):
        code = run("simulate", "--config", bad_config(edit), "--out", tmp_path / "o")
        assert code == EXIT_CONFIG
        assert field in capsys.readouterr().err

    def test_zero_truth_sigma_needs_analysis_sigma(self, tmp_path, bad_config, capsys):
        code = run("simulate", "--config", bad_config(lambda d: d["truth"].__setitem__("sigma", 0.0)),
                   "--out", tmp_path / "o")
        assert code == EXIT_CONFIG
        assert "model.fixed.sigma" in capsys.readouterr().err

    def test_missing_config(self, tmp_path, capsys):
        assert run("simulate", "--config", tmp_path / "nope.json") == EXIT_CONFIG
        assert "--config" in capsys.readouterr().err

    def test_missing_data(self, tmp_path, capsys):
        assert run("fit", "--config", CONFIGS["linear"], "--out", tmp_path) == EXIT_CONFIG
        assert "--data" in capsys.readouterr().err

    def test_bad_seed_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run("simulate", "--config", CONFIGS["linear"], "--seed", -1)
        assert exc.value.code == 2

    def test_atomic_write_cleans_up_on_failure(self, tmp_path):
        with pytest.raises(TypeError):
            write_atomic(tmp_path / "x.txt", object())
        assert not (tmp_path / "x.txt").exists()
        assert leftovers(tmp_path) == []


class TestPipeline:
    @pytest.fixture(scope="class")
    @staticmethod
    def uni_out(tmp_path_factory):
        out = tmp_path_factory.mktemp("uni")
        cfg = CONFIGS["univariate-normal"]
        for cmd in ("simulate", "fit", "region", "geodesics"):
            assert run(cmd, "--config", cfg, "--out", out) == EXIT_OK
        for cmd in ("curvature", "loglik"):
            assert run(cmd, "--config", cfg, "--out", out, "--resolution", 12) == EXIT_OK
        assert run("render", "--config", cfg, "--out", out) == EXIT_OK
        return out

    def test_mle_json(self, uni_out):
        doc = json.loads((uni_out / "mle.json").read_text())
        assert {"theta_hat", "loglik", "iterations", "converged", "names"} <= set(doc)
        assert doc["names"] == ["mu", "sigma"]
        assert doc["converged"] is True

    def test_region_summary(self, uni_out):
        doc = json.loads((uni_out / "summary.json").read_text())
        assert doc["closed"] is not doc["open_region"]
        assert doc["delta"] == pytest.approx(5.991464547, abs=1e-8)
        rows = read_rows(uni_out / "region.csv")
        assert len(rows) == doc["n_points"]
        # With this seed the +mu edge of the region, mu_hat + sigma_hat * sqrt(delta / N),
        # lies beyond the box, so the +theta_1 seed ray finds no crossing.
        mu, sigma = doc["theta_hat"]["mu"], doc["theta_hat"]["sigma"]
        assert mu + sigma * (doc["delta"] / 10) ** 0.5 > doc["box"][0][1]
        assert doc["reason"] == "no-crossing" and doc["n_points"] == 0

    def test_geodesics(self, uni_out):
        doc = json.loads((uni_out / "geodesics.json").read_text())
        assert len(doc["curves"]) == 20
        for c in doc["curves"]:
            assert c["length"] == pytest.approx(doc["target_length"], abs=1e-5)
        ids = {row["curve_id"] for row in read_rows(uni_out / "geodesics.csv")}
        assert len(ids) == 20

    def test_curvature_constant(self, uni_out):
        rows = read_rows(uni_out / "curvature.csv")
        assert len(rows) == 144
        values = np.array([float(r["value"]) for r in rows])
        np.testing.assert_allclose(values, -0.1, atol=1e-3)
        assert json.loads((uni_out / "curvature.failures.json").read_text())["failures"] == []

    def test_loglik_nonpositive(self, uni_out):
        values = np.array([float(r["value"]) for r in read_rows(uni_out / "loglik.csv")])
        assert values.size == 144
        assert values.max() <= 1e-6

    def test_svg_parses(self, uni_out):
        root = ET.parse(uni_out / "figure.svg").getroot()
        assert root.tag.endswith("svg")
        assert len(list(root.iter())) > 144

    def test_no_temporary_files(self, uni_out):
        assert leftovers(uni_out) == []

    def test_mvn_region_is_circle(self, tmp_path):
        cfg = CONFIGS["mvn-means"]
        for cmd in ("simulate", "fit", "region"):
            assert run(cmd, "--config", cfg, "--out", tmp_path) == EXIT_OK
        doc = json.loads((tmp_path / "summary.json").read_text())
        assert doc["closed"] and doc["max_abs_residual"] <= 1e-6
        center = np.array([doc["theta_hat"][n] for n in doc["names"]])
        pts = np.array([[float(r["theta1"]), float(r["theta2"])] for r in read_rows(tmp_path / "region.csv")])
        radius = np.linalg.norm(pts - center, axis=1)
        assert np.ptp(radius) <= 1e-3 * radius.mean()
