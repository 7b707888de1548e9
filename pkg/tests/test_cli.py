import csv
import json
import math

import numpy as np
import pytest

from rbbm.cli import EXIT_FAILED, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from rbbm.dataset import load_dataset
from rbbm.geometry import SegmentMap, rectangle, save_map


def run(*argv):
    return main([str(a) for a in argv])


def files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def primary(directory):
    return {k: v for k, v in files(directory).items() if "provenance" not in k}


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ref_net.csv"
    assert run("simulate", "--per-range", 2000, "--seed", 3, "--out", path) == EXIT_OK
    return path


@pytest.fixture(scope="module")
def multi(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "multi.csv"
    assert run("simulate", "--z-star", 3, "--z-star", 6, "--per-range", 800, "--seed", 4,
               "--out", path) == EXIT_OK
    return path


class TestSimulate:
    def test_output(self, data):
        ds = load_dataset(data, z_max=10.0)
        assert len(ds) == 2000
        assert set(np.unique(ds.z_star)) == {5.0}
        assert set(ds.cause) <= {"hit", "occluded", "random", "maxrange"}
        prov = json.loads(data.with_name(data.name + ".provenance.json").read_text())
        assert prov["command"] == "simulate" and prov["seed"] == 3

    def test_no_cause(self, tmp_path):
        out = tmp_path / "d.csv"
        assert run("simulate", "--per-range", 5, "--no-cause", "--out", out) == EXIT_OK
        assert next(csv.reader(out.open())) == ["z", "z_star"]

    def test_bad_count(self, tmp_path):
        assert run("simulate", "--per-range", 0, "--out", tmp_path / "d.csv") == EXIT_USAGE

    def test_bad_params(self, tmp_path):
        assert run("simulate", "--pi3", 0.9, "--pi4", 0.5, "--out",
                   tmp_path / "d.csv") == EXIT_USAGE


class TestLearn:
    @pytest.mark.parametrize("est", ["ml", "vb", "thrun"])
    def test_estimators(self, data, tmp_path, est):
        assert run("learn", "--data", data, "--estimator", est, "--out-dir", tmp_path) == EXIT_OK
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["estimator"] == est and rep["samples"] == 2000
        assert rep["d1_kl"] >= 0 and 0 <= rep["d2_hellinger"] <= math.sqrt(2)
        if est != "vb":
            assert rep["monotone"]
        rows = (tmp_path / "curve.csv").read_text().splitlines()
        assert rows[0] == "z,density" and len(rows) == 1002

    def test_ml_recovers(self, data, tmp_path):
        run("learn", "--data", data, "--out-dir", tmp_path)
        p = json.loads((tmp_path / "report.json").read_text())["params"]
        assert abs(p["pi3"] - 0.2) < 0.05

    def test_vb_needs_single_range(self, multi, tmp_path):
        assert run("learn", "--data", multi, "--estimator", "vb",
                   "--out-dir", tmp_path) == EXIT_USAGE

    def test_per_bucket(self, multi, tmp_path):
        assert run("learn", "--data", multi, "--estimator", "vb", "--per-bucket",
                   "--out-dir", tmp_path) == EXIT_OK
        rep = json.loads((tmp_path / "report.json").read_text())
        assert [b["z_star"] for b in rep["buckets"]] == [3.0, 6.0]
        assert (tmp_path / "curve.csv").read_text().startswith("z,density_0,density_1")

    def test_pooled_ml(self, multi, tmp_path):
        assert run("learn", "--data", multi, "--out-dir", tmp_path) == EXIT_OK

    def test_missing_file(self, tmp_path):
        assert run("learn", "--data", tmp_path / "nope.csv", "--out-dir", tmp_path) == EXIT_IO

    def test_malformed_file(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("z,z_star\n1.0,abc\n")
        assert run("learn", "--data", bad, "--out-dir", tmp_path / "o") == EXIT_IO

    def test_provenance_hash(self, data, tmp_path):
        import hashlib
        run("learn", "--data", data, "--iters", 2, "--out-dir", tmp_path)
        prov = json.loads((tmp_path / "provenance.json").read_text())
        assert prov["inputs"][str(data)] == hashlib.sha256(data.read_bytes()).hexdigest()


class TestValidate:
    def test_requires_seed(self, tmp_path):
        assert run("validate", "--out-dir", tmp_path) == EXIT_USAGE

    def test_report(self, tmp_path, capsys):
        code = run("validate", "--seed", 0, "--draws", 20000, "--bootstrap", 200,
                   "--out-dir", tmp_path)
        rep = json.loads((tmp_path / "validation.json").read_text())
        names = [c["name"] for c in rep["checks"]]
        assert names == ["occlusion_normalization", "series_identity", "occluded_count_pmf",
                         "closed_form_vs_numeric", "monte_carlo_vs_exact"]
        assert code == (EXIT_OK if rep["passed"] else EXIT_FAILED)
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 5 and all(l.startswith(("PASS", "FAIL")) for l in lines)
        rows = (tmp_path / "identity_sweep.csv").read_text().splitlines()
        assert len(rows) == 1 + 11 * 9


class TestScanmap:
    def test_default_scenario(self, tmp_path):
        assert run("scanmap", "--samples-L", 20, "--marginal-points", 101,
                   "--grid", "0.2,0.4,3,0.9,1.1,3", "--out-dir", tmp_path) == EXIT_OK
        names = set(files(tmp_path))
        assert {"scan.csv", "probability_map.csv", "log_probability_map.csv",
                "marginal_beam5_sample.csv", "marginal_beam5_gaussian.csv",
                "marginal_beam3_sample.csv", "provenance.json"} <= names
        rows = (tmp_path / "log_probability_map.csv").read_text().splitlines()
        assert len(rows) == 4

    def test_custom_map_and_scan(self, tmp_path):
        save_map(SegmentMap(rectangle(0, 0, 2, 2), 5.0), tmp_path / "map.json")
        (tmp_path / "scan.csv").write_text("angle,z\n-0.5,1.1\n0.0,1.0\n0.5,1.1\n")
        out = tmp_path / "out"
        assert run("scanmap", "--map", tmp_path / "map.json", "--scan", tmp_path / "scan.csv",
                   "--pose", "1,1,0", "--samples-L", 10, "--beams", "1",
                   "--mode", "dynamic_full_mixture", "--p-prime", 0.2, "--pi3", 0.05,
                   "--marginal-points", 51, "--grid", "0.8,1.2,3,0.8,1.2,3",
                   "--out-dir", out) == EXIT_OK
        assert (out / "marginal_beam1_sample.csv").exists()

    @pytest.mark.parametrize("extra", [["--samples-L", 1], ["--beams", "42"],
                                       ["--grid", "1,2,3"], ["--pose", "a,b,c"]])
    def test_usage_errors(self, tmp_path, extra):
        assert run("scanmap", *extra, "--out-dir", tmp_path) == EXIT_USAGE


class TestReproducibility:
    def check(self, tmp_path, argv):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run(*argv(d)) in (EXIT_OK, EXIT_FAILED)
        assert primary(a) and primary(a) == primary(b)
        # same arguments, same directory: the sidecar is identical too
        before = files(a)
        run(*argv(a))
        assert files(a) == before

    def test_simulate(self, tmp_path):
        def argv(d):
            d.mkdir(exist_ok=True)
            return ["simulate", "--per-range", 300, "--seed", 9, "--out", d / "d.csv"]
        self.check(tmp_path, argv)

    @pytest.mark.parametrize("est", ["ml", "vb", "thrun"])
    def test_learn(self, tmp_path, data, est):
        self.check(tmp_path, lambda d: ["learn", "--data", data, "--estimator", est,
                                        "--iters", 5, "--out-dir", d])

    def test_validate(self, tmp_path):
        self.check(tmp_path, lambda d: ["validate", "--seed", 1, "--draws", 5000,
                                        "--bootstrap", 50, "--out-dir", d])

    @pytest.mark.parametrize("jobs", [1, 3])
    def test_scanmap(self, tmp_path, jobs):
        self.check(tmp_path, lambda d: ["scanmap", "--samples-L", 10, "--marginal-points", 51,
                                        "--grid", "0.2,0.4,3,0.9,1.1,2", "--n-jobs", jobs,
                                        "--seed", 2, "--out-dir", d])

    def test_scanmap_jobs_do_not_matter(self, tmp_path):
        outs = []
        for jobs in (1, 4):
            d = tmp_path / str(jobs)
            run("scanmap", "--samples-L", 10, "--marginal-points", 51, "--grid",
                "0.2,0.4,3,0.9,1.1,2", "--n-jobs", jobs, "--out-dir", d)
            outs.append(primary(d))
        assert outs[0] == outs[1]


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("rbbm ")
