import csv
import json

import numpy as np
import pytest

from stringspec import InversionConfig, multistep, solve_forward
from stringspec.cli import main, read_spectrum
from stringspec.config import ConfigError, loads_config, parse_indices
from stringspec.presets import rho3


def write_cfg(tmp_path, body, name="exp.ini"):
    path = tmp_path / name
    path.write_text("[experiment]\n" + body)
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


CONSTANT = """density = constant
constant = 1.0
data = analytic
k = 10
m = 1
j = 10
n = 20
schedule = single
"""


class TestConfig:
    def test_defaults(self):
        cfg = loads_config("[experiment]\ndensity = rho1\n")
        inv = cfg.inversion_config()
        assert (inv.K, inv.M, inv.J, inv.N, inv.K1) == (7, 7, 15, 300, 15)
        assert inv.theta == 0.95

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigError, match="'nn'"):
            loads_config("[experiment]\nnn = 3\n")

    def test_bad_value_is_named(self):
        with pytest.raises(ConfigError, match="'k'"):
            loads_config("[experiment]\nk = seven\n")

    def test_invalid_dimensions(self):
        with pytest.raises(ConfigError):
            loads_config("[experiment]\nk = 7\nj = 5\n")

    def test_stage_sections_in_order(self):
        cfg = loads_config("[experiment]\ndensity = rho3\n[stage.2]\nn = 100\n[stage.1]\n"
                           "k = 3\nm = 3\nn = 20\n")
        stages = cfg.schedule_configs()
        assert [(s.K, s.M, s.N) for s in stages] == [(3, 3, 20), (7, 7, 100)]

    def test_indices(self):
        assert parse_indices("1,16,31") == (1, 16, 31)
        assert parse_indices("1:46:15") == (1, 16, 31, 46)

    def test_piecewise_density(self):
        cfg = loads_config("[experiment]\ndensity = piecewise\nbreakpoints = 0.5\nvalues = 1, 2\n")
        np.testing.assert_allclose(cfg.true_density()(np.array([0.25, 0.75])), [1, 2])


class TestForward:
    def test_rho1_spectrum(self, tmp_path):
        cfg = write_cfg(tmp_path, "density = rho1\n")
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        rows = read_rows(tmp_path / "o" / "spectrum.csv")
        assert rows[0] == ["k", "lambda"]
        assert rows[1][0] == "1" and float(rows[1][1]) == pytest.approx(11.6001, abs=5e-4)
        assert len(rows) - 1 == 79

    def test_constant_spectrum(self, tmp_path):
        cfg = write_cfg(tmp_path, CONSTANT)
        assert main(["forward", "--config", cfg, "--out", str(tmp_path)]) == 0
        lam = read_spectrum(tmp_path / "spectrum.csv").lambdas
        np.testing.assert_allclose(lam[:10], (np.arange(1, 11) * np.pi) ** 2, rtol=1e-15)


class TestInvert:
    def test_constant_recovery(self, tmp_path):
        cfg = write_cfg(tmp_path, CONSTANT)
        assert main(["invert", "--config", cfg, "--out", str(tmp_path)]) == 0
        result = json.loads((tmp_path / "result.json").read_text())
        assert result["coefficients"][0] == pytest.approx(1.0, abs=1e-6)
        assert result["residual_norm"] == "l2"

    def test_output_files(self, tmp_path):
        cfg = write_cfg(tmp_path, "density = rho3\nn = 100\n")
        rc = main(["invert", "--config", cfg, "--out", str(tmp_path), "--eigenvalue-check"])
        assert rc == 0
        assert read_rows(tmp_path / "density.csv")[0] == ["x", "rho_true", "rho_recon"]
        assert len(read_rows(tmp_path / "density.csv")) == 513
        assert read_rows(tmp_path / "residuals.csv")[0] == ["iter", "residual_norm"]
        eigs = read_rows(tmp_path / "eigs_compare.csv")
        assert eigs[0] == ["k", "lambda_data", "lambda_recon", "mismatch"]
        assert len(eigs) == 8
        k, d, r, m = eigs[1]
        assert float(m) == pytest.approx(float(d) - float(r), abs=1e-12)
        result = json.loads((tmp_path / "result.json").read_text())
        for key in ("coefficients", "converged", "iterations", "final_residual_norm",
                    "stop_reason", "L_tilde", "t", "stage_log"):
            assert key in result

    def test_file_round_trip_matches_memory(self, tmp_path):
        body = ("density = rho3\n[stage.1]\nk = 3\nm = 3\nn = 20\n"
                "[stage.2]\nk = 7\nm = 7\nn = 100\n")
        cfg = write_cfg(tmp_path, body)
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "f")]) == 0
        spec = str(tmp_path / "f" / "spectrum.csv")
        assert main(["invert", "--config", cfg, "--out", str(tmp_path / "i"),
                     "--spectrum", spec]) == 0
        from_file = json.loads((tmp_path / "i" / "result.json").read_text())["coefficients"]
        stages = [InversionConfig(K=3, M=3, J=15, N=20), InversionConfig(K=7, M=7, J=15, N=100)]
        in_memory = multistep(stages, solve_forward(rho3())).density.a
        np.testing.assert_array_equal(np.array(from_file), in_memory)

    def test_spectrum_only_input(self, tmp_path):
        (tmp_path / "s.csv").write_text(
            "k,lambda\n" + "".join(f"{k},{(k * np.pi) ** 2!r}\n" for k in range(1, 11)))
        cfg = write_cfg(tmp_path, "k = 10\nm = 1\nj = 10\nn = 20\nschedule = single\n")
        assert main(["invert", "--config", cfg, "--out", str(tmp_path),
                     "--spectrum", str(tmp_path / "s.csv")]) == 0
        assert read_rows(tmp_path / "density.csv")[0] == ["x", "rho_recon"]

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "density = rho3\nn = 50\nschedule = single\n"
                                  "backtracking = false\n")
        assert main(["invert", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "DivergedResidual" in capsys.readouterr().err


class TestOtherCommands:
    def test_malformed_config(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "density = rho1\nbogus_key = 1\n")
        assert main(["forward", "--config", cfg]) == 1
        assert "bogus_key" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["forward", "--config", str(tmp_path / "none.ini")]) == 1

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_traces(self, tmp_path):
        cfg = write_cfg(tmp_path, CONSTANT + "cheb_indices = 1:20:5\n")
        assert main(["traces", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "traces.csv")
        assert rows[0] == ["n", "r_true"] and [r[0] for r in rows[1:]] == ["1", "6", "11", "16"]
        meta = json.loads((tmp_path / "traces.json").read_text())
        assert meta["t"] == pytest.approx(0.95 * np.pi ** 2)

    def test_condnum(self, tmp_path):
        cfg = write_cfg(tmp_path, "m_max = 6\ncond_n = 300\n")
        assert main(["condnum", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "cond.csv")
        assert rows[0] == ["M", "cond"] and rows[1] == ["1", "1"]
        slope = json.loads((tmp_path / "condnum.json").read_text())["loglog_slope"]
        cfg2 = write_cfg(tmp_path, "m_max = 6\ncond_n = 600\n", "b.ini")
        assert main(["condnum", "--config", cfg2, "--out", str(tmp_path / "b")]) == 0
        slope2 = json.loads((tmp_path / "b" / "condnum.json").read_text())["loglog_slope"]
        assert abs(slope - slope2) <= 0.3

    def test_noise_sweep(self, tmp_path):
        body = "density = rho3\nn = 100\nsigma = 0, 0.05\nseeds = 0, 1\n"
        cfg = write_cfg(tmp_path, body)
        assert main(["noise-sweep", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["noise-sweep", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "noise.csv").read_text()
        assert a == (tmp_path / "b" / "noise.csv").read_text()
        rows = read_rows(tmp_path / "a" / "noise.csv")
        assert rows[0] == ["sigma", "seed", "linf_error", "converged"]
        clean = [float(r[2]) for r in rows[1:] if float(r[0]) == 0]
        assert clean[0] == clean[1]
