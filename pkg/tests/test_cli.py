"""Configuration parsing, experiment driver artifacts, exit codes."""

import math

import numpy as np
import pytest

from boxphase.cli import main
from boxphase.config import parse_config
from boxphase.errors import ConfigError, NumericFailureError
from boxphase.quadrature import quad_checked

FAST = ["--set", "v=-0.2", "--set", "Mx=5", "--set", "My=5",
        "--set", "grid_nx=41", "--set", "grid_ny=41", "--no-figures"]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_empty_config_gives_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config(str(path))
    assert (cfg.X, cfg.Y) == (1.0, 1.0)
    assert cfg.alpha == pytest.approx(math.pi)
    assert cfg.v == -0.01
    assert cfg.Ys == 0.5
    assert cfg.w == 0.05
    assert (cfg.Mx, cfg.My) == (10, 10)


def test_positive_velocity_rejected():
    with pytest.raises(ConfigError, match="v < 0 required"):
        parse_config(None, ["v=+0.01"])


def test_small_frame_rejected():
    with pytest.raises(ConfigError, match="breakpoint ordering"):
        parse_config(None, ["kind=loop", "L=0.5"])


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown configuration key"):
        parse_config(None, ["banana=3"])


def test_pi_expressions():
    cfg = parse_config(None, ["alpha=2*pi/3"])
    assert cfg.alpha == pytest.approx(2 * math.pi / 3)


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nalpha = pi\nv = -0.02\nMx = 6\nMy=6\n")
    cfg = parse_config(str(path), ["My=7"])
    assert cfg.v == -0.02
    assert (cfg.Mx, cfg.My) == (6, 7)  # overrides win


def test_malformed_line_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("alpha pi\n")
    with pytest.raises(ConfigError, match="expected"):
        parse_config(str(path))


def test_mode_outside_truncation_rejected():
    with pytest.raises(ConfigError, match="truncation"):
        parse_config(None, ["nx=7", "Mx=5"])


def test_quadrature_nonconvergence_error():
    with pytest.raises(NumericFailureError):
        quad_checked(lambda x: np.sin(500 * x ** 2), 0.0, 3.0, tol=1e-30, order=8)


# ---------------------------------------------------------------------------
# CLI runs
# ---------------------------------------------------------------------------

def test_cli_config_error_exit_code(tmp_path):
    rc = main(["sweep", "--set", "v=0.3", "--out", str(tmp_path / "o")])
    assert rc == 2


def test_cli_sweep_artifacts_and_exit(tmp_path):
    out = tmp_path / "sweep_run"
    rc = main(["sweep", *FAST, "--set", "tol_phase=0.9", "--out", str(out)])
    assert rc == 0
    for name in ("timeseries.csv", "phase_map.csv", "report.txt", "config.resolved"):
        assert (out / name).exists()
    header = (out / "timeseries.csv").read_text().splitlines()[0]
    assert header == "t,norm,energy,gamma,overlap_re,overlap_im,max_offdiag_W,winding"
    map_header = (out / "phase_map.csv").read_text().splitlines()[0]
    assert map_header == "x,y,phase,mask"
    report = (out / "report.txt").read_text()
    assert "unitarity_drift" in report and "RESULT:" in report
    resolved = (out / "config.resolved").read_text()
    assert "v = -0.2" in resolved


def test_cli_invariant_failure_exit(tmp_path):
    # a fast sweep cannot hold the adiabatic phase tolerances
    out = tmp_path / "fail_run"
    rc = main(["sweep", *FAST, "--set", "tol_phase=1e-4", "--out", str(out)])
    assert rc == 1
    assert "FAIL" in (out / "report.txt").read_text()


def test_cli_deterministic_outputs(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["sweep", *FAST, "--set", "tol_phase=0.9", "--out", str(out)]) == 0
    for name in ("timeseries.csv", "phase_map.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_bound_check_artifacts(tmp_path):
    out = tmp_path / "bound_run"
    rc = main(["bound-check", *FAST, "--set", "tol_phase=0.9", "--out", str(out)])
    assert rc == 0
    assert (out / "bound.csv").exists()
    lines = (out / "bound.csv").read_text().splitlines()
    assert lines[0] == "t,max_offdiag_W,bound,bound_with_slack"
    assert len(lines) > 3


def test_cli_loop_run(tmp_path):
    out = tmp_path / "loop_run"
    rc = main(["loop", *FAST, "--set", "L=3.0", "--set", "tol_phase=0.9", "--out", str(out)])
    assert rc == 0
    report = (out / "report.txt").read_text()
    assert "codegeneracy_residual_cycle1" in report
    assert "gauge_function_seam_continuity" in report
    ts = (out / "timeseries.csv").read_text().splitlines()
    assert ts[-1].split(",")[-1] == "1"  # winding column reached 1


def test_cli_recurrence_run(tmp_path):
    out = tmp_path / "rec_run"
    rc = main(["recurrence", "--set", "v=-0.1", "--set", "Mx=6", "--set", "My=6",
               "--set", "w=0.004", "--set", "alpha=2*pi/3", "--set", "L=3.0",
               "--set", "cycles=3", "--set", "grid_nx=41", "--set", "grid_ny=41",
               "--set", "tol_phase=0.9", "--no-figures", "--out", str(out)])
    assert rc == 0
    rec = (out / "recurrence.csv").read_text().splitlines()
    assert rec[0] == "cycle,overlap_mag,predicted_mag"
    assert len(rec) == 4
    final = float(rec[3].split(",")[1])
    first = float(rec[1].split(",")[1])
    assert final > 0.98 and first < 0.6


def test_cli_convergence_run(tmp_path):
    out = tmp_path / "conv_run"
    rc = main(["convergence", "--set", "v=-0.3", "--set", "Mx=4", "--set", "My=4",
               "--set", "grid_nx=41", "--set", "grid_ny=41",
               "--set", "tol_phase=0.9", "--no-figures", "--out", str(out)])
    assert rc == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "Mx,dt,fidelity_delta_to_next_rung"
    d01 = float(lines[1].split(",")[2])
    d12 = float(lines[2].split(",")[2])
    assert d12 < d01


def test_cli_figures_rendered(tmp_path):
    out = tmp_path / "figs"
    rc = main(["sweep", "--set", "v=-0.2", "--set", "Mx=5", "--set", "My=5",
               "--set", "grid_nx=41", "--set", "grid_ny=41",
               "--set", "tol_phase=0.9", "--out", str(out)])
    assert rc == 0
    assert (out / "phase_map.png").exists()
    assert (out / "timeseries.png").exists()
    assert (out / "bound.png").exists()
