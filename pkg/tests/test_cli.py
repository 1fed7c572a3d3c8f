import json

import numpy as np
import pytest

from pulsefront.cli import main
from pulsefront.config import parse_config
from pulsefront.errors import ConfigError

BASE = """
[coefficients]
b = 3.0
d1 = 2.0
d2 = 2.0

[harvest]
kind = linear
c = 0.5

[frontier]
mu1 = 0.1
mu2 = 0.1
h0 = 0.5

[initial]
amplitude1 = 0.2
amplitude2 = 0.2

[numerics]
horizon = 12
record_stride = 16
eigen_nodes = 96
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(BASE)
    return path


class TestParseConfig:
    def test_empty_file_gets_documented_defaults(self, tmp_path):
        path = tmp_path / "empty.ini"
        path.write_text("")
        cfg = parse_config(path)
        assert cfg.params.coeffs.constant_values()["b"] == 2.0
        assert cfg.params.harvest.kind == "linear"
        assert cfg.params.frontier.h0 == 2.0
        assert cfg.sim.dx == 0.05
        assert cfg.sim.horizon == 50
        assert cfg.eigen_nodes == 256
        assert cfg.resolved["numerics"]["dt"] == 1.0 / 64

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.ini")

    def test_dt_must_divide_period(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[numerics]\ndt = 0.3\n")
        with pytest.raises(ConfigError, match="divide the period"):
            parse_config(path)

    def test_unknown_keys_and_sections_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[coefficients]\nbb = 2.0\n\n[exotic]\nx = 1\n")
        with pytest.raises(ConfigError) as err:
            parse_config(path)
        text = str(err.value)
        assert "unknown key" in text and "unknown section" in text

    def test_all_violations_collected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[coefficients]\nb = -1\ntau = 0\n\n[frontier]\nh0 = -2\n")
        with pytest.raises(ConfigError) as err:
            parse_config(path)
        assert len(err.value.violations) >= 2

    def test_ricker_strict_rejected_lenient_warns(self, tmp_path):
        path = tmp_path / "ricker.ini"
        path.write_text("[harvest]\nkind = ricker\nr = 0.5\nb = 1.0\n")
        with pytest.raises(ConfigError, match="harvest-sublinearity"):
            parse_config(path, strict=True)
        cfg = parse_config(path, strict=False)
        assert any("harvest-sublinearity" in w for w in cfg.warnings)

    def test_coefficient_tables(self, tmp_path):
        path = tmp_path / "table.ini"
        path.write_text("[coefficients]\nb = 1.5, 2.5\n")
        cfg = parse_config(path)
        assert not cfg.params.coeffs.is_constant
        assert cfg.params.coeffs.slots == 2

    def test_kernel2_section(self, tmp_path):
        path = tmp_path / "two.ini"
        path.write_text("[kernel2]\nfamily = triangular\nsigma = 1.5\n")
        cfg = parse_config(path)
        assert cfg.params.k1.sigma == 1.0
        assert cfg.params.k2.sigma == 1.5

    def test_table_kernel_from_csv(self, tmp_path):
        xs = np.linspace(-1.2, 1.2, 241)
        vals = np.maximum(1.2 - np.abs(xs), 0.0)
        lines = "\n".join(f"{x},{v}" for x, v in zip(xs, vals))
        (tmp_path / "kern.csv").write_text(lines + "\n")
        path = tmp_path / "run.ini"
        path.write_text("[kernel]\nfamily = table\ntable = kern.csv\n")
        cfg = parse_config(path)
        assert cfg.params.k1.family == "table"
        assert cfg.params.k1.mass() == pytest.approx(1.0, abs=1e-12)
        assert cfg.params.k1.support == pytest.approx(1.2)

    def test_initial_profiles_from_csv(self, tmp_path):
        xs = np.linspace(-2.0, 2.0, 81)
        u1 = np.maximum(1 - (xs / 2.0) ** 2, 0.0)
        u2 = 0.5 * u1
        lines = "\n".join(f"{x},{a},{b}" for x, a, b in zip(xs, u1, u2))
        (tmp_path / "init.csv").write_text(lines + "\n")
        path = tmp_path / "run.ini"
        path.write_text("[initial]\nkind = csv\npath = init.csv\n")
        cfg = parse_config(path)
        s1, s2 = cfg.params.initial.sample(np.array([0.0, 3.0]))
        assert s1[0] == pytest.approx(1.0)
        assert s2[0] == pytest.approx(0.5)
        assert s1[1] == 0.0  # zero outside the tabulated range

    def test_missing_table_path_reported(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[kernel]\nfamily = table\n")
        with pytest.raises(ConfigError, match="table"):
            parse_config(path)


class TestSimulateCommand:
    def test_outputs_and_audit(self, config_file, tmp_path):
        out = tmp_path / "sim"
        code = main(["simulate", "--config", str(config_file),
                     "--out", str(out), "--audit"])
        assert code == 0
        assert (out / "trajectory.csv").exists()
        assert (out / "snap_0.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["run"]["audit"]["violations"] == 0
        assert summary["config"]["numerics"]["dx"] == 0.05
        assert summary["verdict"]["outcome"] in ("vanishing", "spreading", "undetermined")

    def test_byte_identical_reruns(self, config_file, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(config_file), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(config_file), "--out", str(out2)]) == 0
        assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()

    def test_fixed_mode(self, config_file, tmp_path):
        out = tmp_path / "fix"
        code = main(["simulate", "--config", str(config_file), "--out", str(out),
                     "--fixed", "-0.5", "0.5"])
        assert code == 0
        rows = (out / "trajectory.csv").read_text().splitlines()
        first = rows[1].split(",")
        assert float(first[1]) == -0.5 and float(first[2]) == 0.5

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[numerics]\ndt = 0.3\n")
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2

    def test_strict_ricker_exit_code(self, tmp_path):
        bad = tmp_path / "ricker.ini"
        bad.write_text("[harvest]\nkind = ricker\nr = 0.5\nb = 1.0\n")
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x"),
                     "--strict"]) == 2

    def test_audit_violation_exit_code(self, tmp_path):
        # a Ricker pulse lifting adults past the a-priori bound trips the audit
        cfg = tmp_path / "ricker.ini"
        cfg.write_text(
            "[harvest]\nkind = ricker\nr = 2.0\nb = 1.0\n\n"
            "[initial]\namplitude1 = 1.5\namplitude2 = 1.5\n\n"
            "[numerics]\nhorizon = 8\nrecord_stride = 4\n"
        )
        out = tmp_path / "sim"
        assert main(["simulate", "--config", str(cfg), "--out", str(out),
                     "--audit"]) == 4
        summary = json.loads((out / "summary.json").read_text())
        assert summary["run"]["audit"]["bound"] > 0


class TestEigenCommand:
    @pytest.mark.parametrize("mode", ["lambda0", "closed", "floquet", "bracket",
                                      "sensitivity"])
    def test_modes_write_json(self, config_file, tmp_path, mode):
        out = tmp_path / f"{mode}.json"
        assert main(["eigen", "--config", str(config_file), "--mode", mode,
                     "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        if mode == "bracket":
            assert payload["lower"] <= payload["upper"]
        elif mode == "sensitivity":
            assert payload["value"] < 0
        else:
            assert "lambda" in payload and "residual" in payload

    def test_closed_with_distinct_kernels_is_config_error(self, tmp_path):
        path = tmp_path / "two.ini"
        path.write_text("[kernel2]\nfamily = triangular\nsigma = 1.5\n")
        assert main(["eigen", "--config", str(path), "--mode", "closed",
                     "--out", str(tmp_path / "o.json")]) == 2

    def test_eigenfunction_csv(self, config_file, tmp_path):
        out = tmp_path / "eig.json"
        csv_path = tmp_path / "eig.csv"
        assert main(["eigen", "--config", str(config_file), "--mode", "floquet",
                     "--out", str(out), "--eigenfunction-csv", str(csv_path)]) == 0
        header = csv_path.read_text().splitlines()[0]
        assert header == "t,x,phi,psi"


class TestPeriodicCommand:
    def test_ode_logistic_csv(self, config_file, tmp_path):
        out = tmp_path / "sol.csv"
        assert main(["periodic", "--config", str(config_file), "--mode",
                     "ode-logistic", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,U1,U2"
        assert len(lines) > 10

    def test_spatial_csv(self, config_file, tmp_path):
        out = tmp_path / "sol.csv"
        assert main(["periodic", "--config", str(config_file), "--mode", "spatial",
                     "--direction", "from_upper", "--out", str(out)]) == 0
        assert out.read_text().splitlines()[0] == "t,x,U1,U2"


class TestClassifyCommand:
    def test_writes_verdict_and_prediction(self, config_file, tmp_path):
        out = tmp_path / "verdict.json"
        assert main(["classify", "--config", str(config_file), "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["prediction"]["outcome"] == "conditional"
        assert payload["verdict"]["outcome"] in ("vanishing", "undetermined")


class TestSweepCommand:
    def test_hprime_sweep_lambda_strictly_decreasing(self, config_file, tmp_path):
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(config_file), "--param", "hprime",
                     "--values", "0.2,0.4,0.6,0.8,1.0", "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        lams = [p["lambda"] for p in manifest["points"]]
        assert all(b < a for a, b in zip(lams, lams[1:]))
        assert (out / "point_000.json").exists()

    def test_length_sweep_lambda_strictly_decreasing(self, config_file, tmp_path):
        out = tmp_path / "sweepL"
        assert main(["sweep", "--config", str(config_file), "--param", "L",
                     "--values", "1.0,2.0,3.0,4.0,6.0", "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        lams = [p["lambda"] for p in manifest["points"]]
        assert all(b < a for a, b in zip(lams, lams[1:]))

    def test_empty_grid_rejected(self, config_file, tmp_path):
        assert main(["sweep", "--config", str(config_file), "--param", "hprime",
                     "--values", "", "--out", str(tmp_path / "s")]) == 2

    def test_failing_point_recorded_not_fatal(self, config_file, tmp_path):
        out = tmp_path / "sweep"
        # slope above 1 is rejected per point but the sweep completes
        assert main(["sweep", "--config", str(config_file), "--param", "hprime",
                     "--values", "0.5,1.5", "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert "lambda" in manifest["points"][0]
        assert "error" in manifest["points"][1]
