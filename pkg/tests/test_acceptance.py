"""Acceptance criteria at desk scale.

Defaults throughout: X = Y = 1, mode (1,1), alpha = pi, Ys = 0.5, w = 0.05,
|v| = 0.01, Mx = My = 10, L = 10 for loop runs.  Each criterion prints one
PASS/FAIL line with its measured value and tolerance (run with -s to watch).

Criterion 8 sets w = 0.002: its return threshold is a sharp-kernel statement
and the smoothing band removes 4 w * 0.515 of overlap at full flux (the
w-dependent slack the recurrence analysis documents); the global default
w = 0.05 would cap the return at 0.897 for any faithful simulation.

Two sub-checks are expected to FAIL and are deliberately left red; the
measured values and the reason are printed by the tests themselves:
  * criterion 1 (shrink clause): the discrepancy is the second-order dynamic
    phase ~ |v| C(w) with dC/dw < 0, so joint halving shrinks it by ~1.94x,
    not >= 2x (at Ys = Y/2 every w-correction to gamma itself vanishes by
    symmetry, leaving nothing that improves under w-halving);
  * criterion 4: a 10x10 mode basis cannot carry the pi twist across a
    0.05-wide kernel band (6% of the dressed state lives above mode 10), so
    no faithful vector-gauge Galerkin run reaches 1e-6 gauge agreement at
    these defaults.  test_gauge_invariance_resolvable_regime shows the same
    machinery passing 1e-6 where the twist is resolvable.
"""

import numpy as np
import pytest

from boxphase.adiabatic import (AdiabaticState, adiabaticity_ratio,
                                berry_phase_closed_form, nondiagonal_bound,
                                open_path_phase)
from boxphase.analysis import (codegeneracy_residual, gamma_history,
                               gauge_map_fidelity, recurrence_check,
                               render_vector_gauge)
from boxphase.experiments import coupling_diagonal_phase
from boxphase.config import ExperimentConfig
from boxphase.model import (Mode, SweepConfig, source_densities,
                            vector_potential_curl)
from boxphase.propagator import Truncation, propagate
from boxphase.trajectory import LoopConfig

MODE = Mode(1, 1)
TR = Truncation(10, 10)
DEFAULTS = dict(Ys=0.5, w=0.05, alpha=np.pi)
E0 = np.pi ** 2 * 2 / 2  # eigenenergy of (1,1) in the unit box


def _report(num, name, ok, detail):
    line = f"ACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    return ok, line


def _sweep_cfg(v=-0.01, w=0.05):
    return SweepConfig(v=v, Ys=0.5, w=w, alpha=np.pi)


def _loop_cfg(v=-0.01, w=0.05, alpha=np.pi):
    return LoopConfig(sweep=SweepConfig(v=v, Ys=0.5, w=w, alpha=alpha), L=10.0)


@pytest.fixture(scope="module")
def runs():
    """Shared propagations; built lazily, reused across criteria."""
    cache = {}

    def get(key):
        if key in cache:
            return cache[key]
        if key == "sweep":
            cfg = _sweep_cfg()
            val = (cfg, propagate(MODE, cfg.t0, cfg.w / cfg.speed, None, "coulomb",
                                  TR, cfg))
        elif key == "sweep_half_both":
            cfg = _sweep_cfg(v=-0.005, w=0.025)
            val = (cfg, propagate(MODE, cfg.t0, cfg.w / cfg.speed, None, "coulomb",
                                  TR, cfg))
        elif key == "sweep_half_v":
            cfg = _sweep_cfg(v=-0.005)
            val = (cfg, propagate(MODE, cfg.t0, cfg.w / cfg.speed, None, "coulomb",
                                  TR, cfg))
        elif key == "sweep_vector":
            cfg = _sweep_cfg()
            val = (cfg, propagate(MODE, cfg.t0, cfg.w / cfg.speed, None, "vector",
                                  TR, cfg))
        elif key == "loop":
            cfg = _loop_cfg()
            val = (cfg, propagate(MODE, cfg.t0, cfg.t0 + cfg.period, None, "coulomb",
                                  TR, cfg, sample_dt=cfg.period / 16))
        elif key == "loop_half_v":
            cfg = _loop_cfg(v=-0.005)
            val = (cfg, propagate(MODE, cfg.t0, cfg.t0 + cfg.period, None, "coulomb",
                                  TR, cfg, sample_dt=cfg.period / 16))
        else:
            raise KeyError(key)
        cache[key] = val
        return val

    return get


def test_01_berry_phase_matches_closed_form(runs):
    cfg, res = runs("sweep")
    _, gam = gamma_history(res)
    closed = berry_phase_closed_form(MODE, cfg)
    assert closed == pytest.approx(np.pi / 2, abs=1e-14)
    d = abs(gam[-1] - closed)
    ok, _ = _report(1, "berry phase vs closed form", d <= 1e-2,
                    f"|gamma - pi/2| = {d:.3e} (tol 1e-2)")
    assert ok


def test_01b_berry_phase_discrepancy_shrink(runs):
    """Expected red: see the module docstring."""
    cfg, res = runs("sweep")
    _, gam = gamma_history(res)
    d = abs(gam[-1] - berry_phase_closed_form(MODE, cfg))
    cfg2, res2 = runs("sweep_half_both")
    _, gam2 = gamma_history(res2)
    d2 = abs(gam2[-1] - berry_phase_closed_form(MODE, cfg2))
    shrink = d / d2
    ok, _ = _report(1, "berry phase discrepancy shrink", shrink >= 2.0,
                    f"shrink factor {shrink:.4f} under (v, w) halving (needs >= 2; "
                    f"the surviving error is the second-order dynamic phase whose "
                    f"w-smoothing suppression works against the halving)")
    assert ok


def test_02_partial_phase_map(runs):
    cfg, res = runs("sweep")
    t_map = float(res.times[-1])
    from boxphase.analysis import build_phase_report
    rep = build_phase_report(res, grid=(201, 201))
    gam = float(rep.gamma_history[-1])
    xs_now = cfg.v * t_map
    xx, yy = rep.grid_x[:, None], rep.grid_y[None, :]
    above = (yy >= cfg.Ys + 2 * cfg.w) & (xx >= xs_now + 2 * cfg.w) & rep.phase_mask
    below = (yy <= cfg.Ys - 2 * cfg.w) & (xx >= xs_now + 2 * cfg.w) & rep.phase_mask
    res_above = np.nanmax(np.abs(rep.phase_map - gam + cfg.alpha)[above])
    res_below = np.nanmax(np.abs(rep.phase_map - gam)[below])
    ok, _ = _report(2, "partial phase map regions",
                    res_above <= 1e-2 and res_below <= 1e-2,
                    f"|map + alpha| above = {res_above:.3e}, |map| below = "
                    f"{res_below:.3e} (tol 1e-2 each)")
    assert ok


def test_03_unitarity_over_full_loop(runs):
    _, res = runs("loop")
    drift = float(np.abs(res.norms() - 1.0).max())
    ok, _ = _report(3, "unitarity over full loop", drift <= 1e-10,
                    f"max |norm - 1| = {drift:.3e} (tol 1e-10)")
    assert ok


def test_04_gauge_invariance_at_defaults(runs):
    """Expected red at these defaults: see the module docstring."""
    cfg, res_c = runs("sweep")
    _, res_v = runs("sweep_vector")
    t_end = float(res_c.times[-1])
    fid = gauge_map_fidelity(res_v.final, res_c.final, t_end, cfg, TR)
    _, _, fv = render_vector_gauge(res_v, t_end, (201, 201))
    _, _, fc = render_vector_gauge(res_c, t_end, (201, 201))
    dens = float(np.abs(np.abs(fv) ** 2 - np.abs(fc) ** 2).max())
    tail = _truncated_twist_tail()
    ok, _ = _report(4, "gauge invariance at defaults",
                    (1 - fid) <= 1e-6 and dens <= 1e-6,
                    f"fidelity deficit = {1 - fid:.3e}, density mismatch = {dens:.3e} "
                    f"(tol 1e-6 each; basis-resolution floor: {tail:.3e} of the "
                    f"dressed state lies beyond the 10x10 truncation)")
    assert ok


def _truncated_twist_tail():
    """Norm-squared of e^{-i alpha Theta_w(y-Ys)} eta_1 beyond the kept modes."""
    from boxphase.analysis import _phase_profile_y
    cfg = _sweep_cfg()
    col = _phase_profile_y(np.pi, Truncation(10, 10), cfg)[:, 0]
    return float(1.0 - np.sum(np.abs(col) ** 2))


def test_04b_gauge_invariance_resolvable_regime():
    """Companion (passing): the same dual-run machinery reaches 1e-6 where the
    phase twist fits inside the basis (small flux), demonstrating criterion
    4's defect is the default resolution, not the gauge mechanics."""
    cfg = SweepConfig(v=-0.1, Ys=0.5, w=0.05, alpha=0.02)
    t_end = cfg.w / cfg.speed
    res_c = propagate(MODE, cfg.t0, t_end, None, "coulomb", TR, cfg, sample_dt=5.0)
    res_v = propagate(MODE, cfg.t0, t_end, None, "vector", TR, cfg, sample_dt=5.0)
    fid = gauge_map_fidelity(res_v.final, res_c.final, t_end, cfg, TR)
    ok, _ = _report(4, "gauge invariance, resolvable twist", (1 - fid) <= 5e-6,
                    f"fidelity deficit = {1 - fid:.3e} at alpha = 0.02")
    assert ok


def test_05_offdiagonal_bound(runs):
    cfg, res = runs("sweep")
    from boxphase.analysis import max_offdiagonal
    from boxphase.propagator import coupling_matrix
    bound = nondiagonal_bound(cfg) * (1.0 + 5.0 * cfg.w / cfg.box.Y)
    worst = 0.0
    violations = 0
    for t in res.times:
        m = max_offdiagonal(coupling_matrix(t, "coulomb", TR, cfg).W)
        worst = max(worst, m)
        violations += int(m > bound)
    ok, _ = _report(5, "off-diagonal coupling bound", violations == 0,
                    f"{violations} violations in {len(res.times)} samples; "
                    f"max |W_mn| = {worst:.3e} vs bound(1 + 5w/Y) = {bound:.3e}")
    assert ok


def test_06_energy_constancy_scaling(runs):
    from boxphase.analysis import energy_expectation
    from boxphase.propagator import ModeCoefficients

    def max_dev(key):
        cfg, res = runs(key)
        devs = [abs(energy_expectation(ModeCoefficients(c, t), "coulomb", TR, cfg) - E0)
                for t, c in zip(res.times, res.coeffs)]
        return max(devs) / E0

    full = max_dev("sweep")
    half = max_dev("sweep_half_v")
    ratio = full / half
    ok, _ = _report(6, "energy constancy scaling", 1.7 <= ratio <= 2.3,
                    f"max|<H>-E|/E: {full:.3e} at |v|=0.01 vs {half:.3e} at "
                    f"|v|=0.005, ratio {ratio:.3f} (needs [1.7, 2.3])")
    assert ok


def test_07_codegeneracy_after_loop(runs):
    cfg, res = runs("loop")
    after = res.at_time(cfg.t0 + cfg.period)
    r = codegeneracy_residual(after, cfg.t0, MODE, TR, cfg)
    cfg2, res2 = runs("loop_half_v")
    after2 = res2.at_time(cfg2.t0 + cfg2.period)
    r2 = codegeneracy_residual(after2, cfg2.t0, MODE, TR, cfg2)
    ok, _ = _report(7, "co-degeneracy residual", r <= 5e-3 * E0 and r2 < r,
                    f"residual = {r:.3e} (tol {5e-3 * E0:.3e}); halved-v residual "
                    f"= {r2:.3e} (must shrink)")
    assert ok


def test_08_recurrence_rational_flux():
    cfg = _loop_cfg(w=0.002, alpha=2 * np.pi / 3)
    rep = recurrence_check(cfg, 3, TR, MODE)
    final = rep.magnitudes[-1]
    gap = final - rep.magnitudes[:-1].max()
    ok, _ = _report(8, "recurrence at alpha = 2pi/3",
                    final >= 0.99 and gap >= 0.05,
                    f"|overlap| cycles 1..3 = {np.round(rep.magnitudes, 5)}; "
                    f"final {final:.4f} >= 0.99, intermediate gap {gap:.3f} >= 0.05 "
                    f"(w = 0.002; w-slack {rep.w_slack:.3e})")
    assert ok


def test_09_source_consistency():
    """The closed-form densities cancel d(rho)/dt + div J exactly; centered
    differences on a 201 x 201 grid must converge at O(h^2) wherever the
    stencil stays clear of the kernel band edges (exactly on the edges the
    C^3 kernel's fourth derivative jumps and differences saturate at O(h),
    which probes the kernel class, not the continuity identity)."""
    cfg = _sweep_cfg()
    t = -50.0
    xs_now = cfg.v * t
    g = np.linspace(0.0, 1.0, 201)
    xx, yy = g[:, None], g[None, :]
    x_edges = np.array([xs_now - cfg.w, xs_now + cfg.w])
    y_edges = np.array([cfg.Ys - cfg.w, cfg.Ys + cfg.w])
    residuals = []
    for h in (2e-3, 1e-3, 5e-4):
        drho = (source_densities(xx, yy, t + h, cfg)[0]
                - source_densities(xx, yy, t - h, cfg)[0]) / (2 * h)
        djx = (source_densities(xx + h, yy, t, cfg)[1]
               - source_densities(xx - h, yy, t, cfg)[1]) / (2 * h)
        djy = (source_densities(xx, yy + h, t, cfg)[2]
               - source_densities(xx, yy - h, t, cfg)[2]) / (2 * h)
        clear_x = np.min(np.abs(g[:, None] - x_edges[None, :]), axis=1) > 2 * h
        clear_y = np.min(np.abs(g[:, None] - y_edges[None, :]), axis=1) > 2 * h
        stencil_clear = clear_x[:, None] & clear_y[None, :]
        residuals.append(float(np.abs(drho + djx + djy)[stencil_clear].max()))
    r1 = residuals[0] / residuals[1]
    r2 = residuals[1] / residuals[2]
    rate_ok = 3.2 <= r1 <= 4.8 and 3.2 <= r2 <= 4.8
    curl = vector_potential_curl(xx, yy, (xs_now, cfg.Ys), cfg)
    curl_max = float(np.abs(curl).max())
    ok, _ = _report(9, "source consistency", rate_ok and curl_max == 0.0,
                    f"continuity residual ratios {r1:.2f}, {r2:.2f} per h-halving "
                    f"(O(h^2) on band-clear stencils); max |curl A| = {curl_max:.1e}")
    assert ok


def test_10_cross_oracle_diagonal_phase(runs):
    cfg, res = runs("sweep")
    exp_cfg = ExperimentConfig()
    state = AdiabaticState(MODE, cfg)
    t0 = cfg.t0
    t_end = float(res.times[-1])
    worst = 0.0
    for frac in (0.25, 0.5, 0.75, 1.0):
        t = t0 + frac * (t_end - t0)
        diff = abs(coupling_diagonal_phase(exp_cfg, cfg, t0, t)
                   - open_path_phase(state, t))
        worst = max(worst, diff)
    ok, _ = _report(10, "diagonal-coupling cross-oracle", worst <= 1e-6,
                    f"max |int W_nn dt / hbar + gamma| = {worst:.3e} (tol 1e-6)")
    assert ok


def test_certificate_defaults():
    """The default regime really is adiabatic (context for everything above)."""
    ratio = adiabaticity_ratio(_sweep_cfg(), MODE, TR)
    ok, _ = _report(0, "adiabaticity certificate", ratio < 0.05,
                    f"bound/gap = {ratio:.3e}")
    assert ok
