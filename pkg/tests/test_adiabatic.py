"""Open-path phase, closed-form sweep phase, bounds, adiabatic amplitude."""

import numpy as np
import pytest
from scipy.integrate import quad

from boxphase.adiabatic import (AdiabaticState, adiabatic_amplitude,
                                adiabaticity_ratio, berry_phase_closed_form,
                                nondiagonal_bound, open_path_phase,
                                predicted_phase_map)
from boxphase.model import Mode, SweepConfig, eigenfunction, smooth_step
from boxphase.propagator import Truncation
from boxphase.trajectory import LoopConfig

CFG = SweepConfig(v=-0.01, Ys=0.5, w=0.05, alpha=np.pi)
LOOP = LoopConfig(sweep=CFG, L=10.0)
STATE = AdiabaticState(Mode(1, 1), CFG)
LSTATE = AdiabaticState(Mode(1, 1), LOOP)


def eta_sq(n, y, Y=1.0):
    return 2.0 / Y * np.sin(n * np.pi * y / Y) ** 2


# ---------------------------------------------------------------------------
# closed-form sweep phase against an independent quadrature oracle
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("ny,ys,alpha", [(1, 0.5, np.pi), (1, 0.3, np.pi),
                                         (2, 0.4, 1.0), (3, 0.7, -2.0)])
def test_closed_form_matches_quadrature_oracle(ny, ys, alpha):
    cfg = SweepConfig(v=-0.01, Ys=ys, w=0.05, alpha=alpha)
    oracle = alpha * quad(lambda y: eta_sq(ny, y), ys, 1.0, limit=200)[0]
    assert berry_phase_closed_form(Mode(1, ny), cfg) == pytest.approx(oracle, abs=1e-12)


def test_closed_form_reference_value():
    # ny = 1, Ys = Y/2, alpha = pi: the sine term vanishes and the phase is pi/2
    assert berry_phase_closed_form(Mode(1, 1), CFG) == pytest.approx(np.pi / 2, abs=1e-15)


def test_closed_form_edges():
    full = SweepConfig(v=-0.01, Ys=1e-12, w=0.05, alpha=np.pi)
    assert berry_phase_closed_form(Mode(1, 1), full) == pytest.approx(np.pi, rel=1e-6)
    top = SweepConfig(v=-0.01, Ys=1.0 - 1e-12, w=0.05, alpha=np.pi)
    assert berry_phase_closed_form(Mode(1, 1), top) == pytest.approx(0.0, abs=1e-6)


def test_partial_phase_not_cancelled():
    # strictly between 0 and alpha for an interior entry height
    for ys in (0.2, 0.5, 0.8):
        cfg = SweepConfig(v=-0.01, Ys=ys, w=0.05, alpha=np.pi)
        val = abs(berry_phase_closed_form(Mode(1, 1), cfg))
        assert 0.0 < val < np.pi


# ---------------------------------------------------------------------------
# open-path phase
# ---------------------------------------------------------------------------

def test_gamma_starts_at_zero():
    assert open_path_phase(STATE, CFG.t0) == 0.0
    assert open_path_phase(STATE, CFG.t0 - 5.0) == 0.0


def test_gamma_constant_after_kernel_exit():
    t_exit = CFG.w / CFG.speed
    a = open_path_phase(STATE, t_exit)
    b = open_path_phase(STATE, t_exit + 40.0)
    assert a == pytest.approx(b, abs=1e-14)


def test_gamma_monotone_during_sweep():
    ts = np.linspace(CFG.t0, CFG.w / CFG.speed, 41)
    gs = [open_path_phase(STATE, t) for t in ts]
    assert np.all(np.diff(gs) >= -1e-14)


def test_gamma_independent_time_quadrature_oracle():
    """Direct time-domain quadrature of the diagonal coupling."""
    t_probe = -30.0

    def integrand(t):
        xs = CFG.v * t
        fx = quad(lambda x: 2 * np.sin(np.pi * x) ** 2
                  * _delta(x - xs, CFG.w), max(xs - CFG.w, 0), min(xs + CFG.w, 1),
                  limit=100)[0] if xs - CFG.w < 1 and xs + CFG.w > 0 else 0.0
        fy = quad(lambda y: eta_sq(1, y) * smooth_step(y - CFG.Ys, CFG.w),
                  0, 1, points=[CFG.Ys - CFG.w, CFG.Ys + CFG.w], limit=100)[0]
        return -CFG.phi * CFG.v * fx * fy

    oracle, _ = quad(integrand, CFG.t0, t_probe, limit=300)
    assert open_path_phase(STATE, t_probe) == pytest.approx(oracle, abs=1e-8)


def _delta(s, w):
    from boxphase.model import smooth_delta
    return smooth_delta(s, w, 0)


@pytest.mark.parametrize("ys,min_rate", [(0.5, 3.5), (0.3, 1.9)])
def test_gamma_converges_to_closed_form_as_w_shrinks(ys, min_rate):
    """Sharp-kernel limit: at least O(w^2) at the symmetric height, at least
    O(w) generally (both measured much faster here)."""
    mode = Mode(1, 1)
    errs = []
    for w in (0.08, 0.04, 0.02):
        cfg = SweepConfig(v=-0.01, Ys=ys, w=w, alpha=np.pi)
        st = AdiabaticState(mode, cfg)
        gam = open_path_phase(st, 2 * w / cfg.speed)
        errs.append(abs(gam - berry_phase_closed_form(mode, cfg)))
    assert errs[2] < errs[1] < errs[0]
    assert errs[0] / errs[1] > min_rate
    assert errs[1] / errs[2] > min_rate


def test_loop_gamma_advances_by_sweep_value_each_cycle():
    tau = LOOP.period
    per_cycle = open_path_phase(LSTATE, LOOP.t0 + tau)
    for k in (1, 2, 3):
        assert open_path_phase(LSTATE, LOOP.t0 + k * tau) == pytest.approx(
            k * per_cycle, rel=1e-12)
    # quiet legs add nothing
    t_mid_return = LOOP.t0 + tau * 0.6
    assert open_path_phase(LSTATE, t_mid_return) == pytest.approx(
        open_path_phase(LSTATE, LOOP.t0 + tau * 0.4), abs=1e-12)


def test_loop_gamma_matches_straight_sweep_during_crossing():
    for t in (-60.0, -20.0, 3.0):
        assert open_path_phase(LSTATE, t) == pytest.approx(
            open_path_phase(STATE, t), abs=1e-12)


# ---------------------------------------------------------------------------
# bound and certificate
# ---------------------------------------------------------------------------

def test_nondiagonal_bound_values():
    cfg = SweepConfig(v=-0.001, Ys=0.5, w=0.05, alpha=np.pi)
    assert nondiagonal_bound(cfg) == pytest.approx(4 * 0.001 * np.pi * 0.5, rel=1e-12)
    top = SweepConfig(v=-0.001, Ys=1.0 - 1e-15, w=0.05, alpha=np.pi)
    assert nondiagonal_bound(top) == pytest.approx(0.0, abs=1e-12)


def test_bound_linear_in_velocity():
    half = SweepConfig(v=CFG.v / 2, Ys=CFG.Ys, w=CFG.w, alpha=CFG.alpha)
    assert nondiagonal_bound(half) == pytest.approx(nondiagonal_bound(CFG) / 2, rel=1e-12)


def test_adiabaticity_ratio_reference():
    tr = Truncation(10, 10)
    # gap from (1,1) to (2,1) is 3 pi^2 / 2
    expect = nondiagonal_bound(CFG) / (1.5 * np.pi ** 2)
    assert adiabaticity_ratio(CFG, Mode(1, 1), tr) == pytest.approx(expect, rel=1e-12)
    slow = SweepConfig(v=-0.0001, Ys=0.5, w=0.05, alpha=np.pi)
    assert adiabaticity_ratio(slow, Mode(1, 1), tr) < 1e-3


# ---------------------------------------------------------------------------
# adiabatic amplitude and predicted map
# ---------------------------------------------------------------------------

def test_amplitude_initially_real_in_bulk():
    val = adiabatic_amplitude(STATE, 0.4, 0.7, CFG.t0)
    assert val.imag == pytest.approx(0.0, abs=1e-14)
    assert val.real == pytest.approx(eigenfunction(Mode(1, 1), CFG.box, 0.4, 0.7))


def test_amplitude_is_pure_phase_times_mode():
    xs = np.linspace(0.05, 0.95, 7)
    for t in (-70.0, -20.0, 2.0):
        for x in xs:
            for y in (0.2, 0.5, 0.8):
                amp = adiabatic_amplitude(STATE, x, y, t)
                ref = abs(eigenfunction(Mode(1, 1), CFG.box, x, y))
                assert abs(amp) == pytest.approx(ref, abs=1e-12)


def test_post_sweep_regional_phases():
    t = CFG.w / CFG.speed  # source kernel fully out of the box
    gam = open_path_phase(STATE, t)
    below = predicted_phase_map(STATE, 0.5, CFG.Ys - 2 * CFG.w, t)
    above = predicted_phase_map(STATE, 0.5, CFG.Ys + 2 * CFG.w, t)
    assert below == pytest.approx(gam, abs=1e-12)
    assert above == pytest.approx(gam - CFG.alpha, abs=1e-12)


def test_zero_flux_trivial():
    cfg0 = SweepConfig(v=-0.01, Ys=0.5, w=0.05, alpha=0.0)
    st0 = AdiabaticState(Mode(1, 1), cfg0)
    assert open_path_phase(st0, 1.0) == 0.0
    assert predicted_phase_map(st0, 0.3, 0.8, 1.0) == 0.0
