import json

import numpy as np
import pytest

from quatsync.cli import main
from quatsync.relative import synthesize_measurements, write_measurements_csv
from quatsync.simulate import polyhedron_fixture
from quatsync.solver import (
    AttitudeVector,
    ReferenceSet,
    build_relative_matrix,
    problem_to_json,
)

from helpers import random_unit_rows


def write_problem(path, attitudes, ref_indices=(0,)):
    o = build_relative_matrix(attitudes)
    refs = ReferenceSet(tuple(ref_indices),
                        tuple(attitudes[i] for i in ref_indices))
    path.write_text(json.dumps(problem_to_json(o, refs)))
    return o, refs


def write_truth(path, attitudes):
    path.write_text(json.dumps(
        {"attitudes": [[float(c) for c in row] for row in attitudes.data]}))


@pytest.fixture
def attitudes():
    return AttitudeVector(random_unit_rows(np.random.default_rng(0), 6))


class TestSolveCommand:
    def test_noiseless_problem(self, tmp_path, attitudes, capsys):
        problem = tmp_path / "problem.json"
        report_path = tmp_path / "report.json"
        write_problem(problem, attitudes)
        rc = main(["solve", "--input", str(problem), "--output", str(report_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "lambda1" in out
        report = json.loads(report_path.read_text())
        assert report["lambda1"] == pytest.approx(6.0, abs=1e-9)
        assert report["c1_value"] <= 1e-12
        assert report["gauge_fixed"] is True
        assert len(report["attitudes"]) == 6

    def test_with_truth_appends_validation(self, tmp_path, attitudes):
        problem = tmp_path / "problem.json"
        report_path = tmp_path / "report.json"
        truth = tmp_path / "truth.json"
        write_problem(problem, attitudes)
        write_truth(truth, attitudes)
        rc = main(["solve", "--input", str(problem), "--output", str(report_path),
                   "--truth", str(truth)])
        assert rc == 0
        report = json.loads(report_path.read_text())
        val = report["validation"]
        assert val["e_O"] == 0.0
        assert val["e_Q"] <= 1e-9
        assert val["weyl_ok"] is True

    def test_non_hermitian_matrix_rejected(self, tmp_path, attitudes):
        problem = tmp_path / "problem.json"
        o, refs = write_problem(problem, attitudes)
        obj = json.loads(problem.read_text())
        obj["relative"]["entries"][1] = [0.0, 0.0, 0.0, 1.0]  # break symmetry
        problem.write_text(json.dumps(obj))
        rc = main(["solve", "--input", str(problem),
                   "--output", str(tmp_path / "r.json")])
        assert rc == 2

    def test_malformed_json(self, tmp_path, capsys):
        problem = tmp_path / "problem.json"
        problem.write_text("{not json")
        rc = main(["solve", "--input", str(problem),
                   "--output", str(tmp_path / "r.json")])
        assert rc == 2
        assert "invalid JSON" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        rc = main(["solve", "--input", str(tmp_path / "nope.json"),
                   "--output", str(tmp_path / "r.json")])
        assert rc == 2

    def test_unreachable_tolerance_exits_3(self, tmp_path, attitudes):
        problem = tmp_path / "problem.json"
        write_problem(problem, attitudes)
        rc = main(["solve", "--input", str(problem),
                   "--output", str(tmp_path / "r.json"), "--tol", "1e-300"])
        assert rc == 3

    def test_reruns_byte_identical(self, tmp_path, attitudes):
        problem = tmp_path / "problem.json"
        write_problem(problem, attitudes)
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        assert main(["solve", "--input", str(problem), "--output", str(r1)]) == 0
        assert main(["solve", "--input", str(problem), "--output", str(r2)]) == 0
        assert r1.read_bytes() == r2.read_bytes()


class TestEstimateCommand:
    def test_identical_sensors_give_all_ones(self, tmp_path):
        csv_path = tmp_path / "m.csv"
        csv_path.write_text(
            "sensor,gx,gy,gz,hx,hy,hz\n"
            + "".join(f"{i},0,0,-9.81,20,0,-44\n" for i in range(3)))
        out = tmp_path / "problem.json"
        rc = main(["estimate", "--input", str(csv_path), "--output", str(out)])
        assert rc == 0
        obj = json.loads(out.read_text())
        assert obj["n"] == 3
        entries = np.asarray(obj["relative"]["entries"])
        np.testing.assert_allclose(entries[:, 0], 1.0, atol=1e-9)
        np.testing.assert_allclose(entries[:, 1:], 0.0, atol=1e-9)
        assert obj["references"] == [{"index": 0, "attitude": [1.0, 0.0, 0.0, 0.0]}]

    def test_missing_sensor_row(self, tmp_path, capsys):
        csv_path = tmp_path / "m.csv"
        csv_path.write_text("sensor,gx,gy,gz,hx,hy,hz\n0,0,0,1,1,0,0\n2,0,0,1,1,0,0\n")
        rc = main(["estimate", "--input", str(csv_path),
                   "--output", str(tmp_path / "p.json")])
        assert rc == 2
        assert "missing sensor" in capsys.readouterr().err

    def test_parallel_fields_unobservable(self, tmp_path, capsys):
        csv_path = tmp_path / "m.csv"
        csv_path.write_text("sensor,gx,gy,gz,hx,hy,hz\n"
                            "0,0,0,1,0,0,2\n1,0,0,1,0,0,2\n")
        rc = main(["estimate", "--input", str(csv_path),
                   "--output", str(tmp_path / "p.json")])
        assert rc == 2
        assert "unobservable" in capsys.readouterr().err

    def test_custom_reference_flag(self, tmp_path):
        q, g0, h0 = polyhedron_fixture()
        csv_path = tmp_path / "m.csv"
        write_measurements_csv(csv_path, synthesize_measurements(q, g0, h0))
        out = tmp_path / "problem.json"
        rc = main(["estimate", "--input", str(csv_path), "--output", str(out),
                   "--reference", "2=0,0,1,0"])
        assert rc == 0
        obj = json.loads(out.read_text())
        assert obj["references"] == [{"index": 2, "attitude": [0.0, 0.0, 1.0, 0.0]}]

    def test_invalid_reference_flag(self, tmp_path):
        csv_path = tmp_path / "m.csv"
        csv_path.write_text("sensor,gx,gy,gz,hx,hy,hz\n0,0,0,1,1,0,0\n")
        rc = main(["estimate", "--input", str(csv_path),
                   "--output", str(tmp_path / "p.json"), "--reference", "0=1,0,0"])
        assert rc == 2
        rc = main(["estimate", "--input", str(csv_path),
                   "--output", str(tmp_path / "p.json"), "--reference", "9=1,0,0,0"])
        assert rc == 2


class TestSimulateCommand:
    def test_zero_sigma_config(self, tmp_path):
        cfg = {"n_sensors": 5, "ref_indices": [0], "sigma_grid": [0.0],
               "trials_per_sigma": 3, "seed": 1}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "sweep.csv"
        rc = main(["simulate", "--input", str(cfg_path), "--output", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 4
        for line in lines[1:]:
            fields = line.split(",")
            assert float(fields[1]) == 0.0
            assert float(fields[2]) <= 1e-7  # e_Q in percent
        regression = json.loads((tmp_path / "sweep.regression.json").read_text())
        assert regression["slope"] is None
        assert "undefined" in regression["note"]

    def test_fixed_seed_reproducible_bytes(self, tmp_path):
        cfg = {"n_sensors": 6, "ref_indices": [0], "sigma_grid": [0.05, 0.1],
               "trials_per_sigma": 2, "seed": 9}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
        assert main(["simulate", "--input", str(cfg_path), "--output", str(out1)]) == 0
        assert main(["simulate", "--input", str(cfg_path), "--output", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert ((tmp_path / "s1.regression.json").read_bytes()
                == (tmp_path / "s2.regression.json").read_bytes())

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = {"n_sensors": 5, "ref_indices": [0], "sigma_grid": [0.1],
               "trials_per_sigma": 2, "seed": 1}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        base, override = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--input", str(cfg_path), "--output", str(base)]) == 0
        assert main(["simulate", "--input", str(cfg_path), "--output", str(override),
                     "--seed", "2"]) == 0
        assert base.read_bytes() != override.read_bytes()

    def test_invalid_config(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"n_sensors": 1, "ref_indices": [0],
                                        "sigma_grid": [0.1], "trials_per_sigma": 1}))
        rc = main(["simulate", "--input", str(cfg_path),
                   "--output", str(tmp_path / "s.csv")])
        assert rc == 2


class TestSpectrumCommand:
    def test_noiseless_spectrum(self, tmp_path, capsys):
        q = AttitudeVector(random_unit_rows(np.random.default_rng(1), 5))
        problem = tmp_path / "problem.json"
        write_problem(problem, q)
        rc = main(["spectrum", "--input", str(problem)])
        assert rc == 0
        out = capsys.readouterr().out
        values = [float(line) for line in out.splitlines()
                  if line.startswith("  ")]
        np.testing.assert_allclose(values, [5.0, 0, 0, 0, 0], atol=1e-9)
        assert "eigengap" in out

    def test_perturbed_top_below_n(self, tmp_path, capsys):
        from quatsync.simulate import NoiseModel, perturb_relative_matrix
        q = AttitudeVector(random_unit_rows(np.random.default_rng(2), 5))
        o_hat = perturb_relative_matrix(build_relative_matrix(q),
                                        NoiseModel(0.2, seed=3))
        problem = tmp_path / "problem.json"
        problem.write_text(json.dumps(problem_to_json(o_hat, ReferenceSet.empty())))
        rc = main(["spectrum", "--input", str(problem)])
        assert rc == 0
        out = capsys.readouterr().out
        top = [float(line) for line in out.splitlines() if line.startswith("  ")][0]
        assert top < 5.0

    def test_invalid_problem(self, tmp_path):
        problem = tmp_path / "problem.json"
        problem.write_text(json.dumps({"n": 2}))
        assert main(["spectrum", "--input", str(problem)]) == 2


class TestEndToEndFixture:
    def test_estimate_then_solve_recovers_fixture(self, tmp_path):
        q, g0, h0 = polyhedron_fixture()
        csv_path = tmp_path / "m.csv"
        write_measurements_csv(csv_path, synthesize_measurements(q, g0, h0))
        problem = tmp_path / "problem.json"
        report_path = tmp_path / "report.json"
        truth = tmp_path / "truth.json"
        write_truth(truth, q)
        assert main(["estimate", "--input", str(csv_path),
                     "--output", str(problem)]) == 0
        assert main(["solve", "--input", str(problem), "--output", str(report_path),
                     "--truth", str(truth)]) == 0
        report = json.loads(report_path.read_text())
        assert report["validation"]["e_Q"] <= 1e-8
        assert report["c1_value"] / 81.0 <= 1e-12
