"""Adiabatic solution of the swept-source problem.

The state that starts as a bare box mode at t0 = X/v evolves, for slow
sweeps, as a pure-phase dressing of that mode:

    Psi(x, y, t) = exp(-i E (t - t0) / hbar) exp(i gamma(t))
                   exp(i (e / hbar c) F(x, y, t)) chi(x) eta(y)

The first factor is dynamic (origin shifted to t0 so the initial state is
exactly real), gamma is the open-path phase accumulated by the diagonal
coupling, and F is the gauge function of the moving source.  gamma over one
full sweep is the Berry-like phase: strictly smaller in magnitude than the
full flux phase alpha whenever the source enters above the box floor, so it
cannot cancel the local phase deposited on the swept part of the wave
function.

The module also provides the off-diagonal coupling bound and the resulting
adiabaticity certificate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .model import Mode, SweepConfig, eigenenergy, eigenfunction
from .quadrature import mode_theta_integral, quad_checked, sine_values
from .trajectory import (LoopConfig, _sweep_of, breakpoint_times, phase_exponent,
                         source_position, winding_number)
from .model import smooth_step


@dataclass(frozen=True)
class AdiabaticState:
    """A box mode tracked adiabatically through a sweep or loop."""

    mode: Mode
    cfg: object  # SweepConfig or LoopConfig

    @property
    def sweep(self) -> SweepConfig:
        return _sweep_of(self.cfg)

    @property
    def phase_origin(self):
        return self.sweep.t0

    @property
    def energy(self):
        return eigenenergy(self.mode, self.sweep.box, self.sweep.consts)


def _y_weight(state: AdiabaticState):
    """<eta^2 Theta_w(y - Ys)>: the y-side weight of the diagonal coupling."""
    sw = state.sweep
    return mode_theta_integral(state.mode.ny, sw.box.Y, sw.Ys, sw.w)


def _x_window(state: AdiabaticState, s_from, s_to, tol):
    """int_{s_from}^{s_to} <chi^2 delta_w(x - s)> ds, reduced to a single
    spatial quadrature int chi^2 [Theta_w(x - s_from) - Theta_w(x - s_to)] dx."""
    sw = state.sweep
    n, X, w = state.mode.nx, sw.box.X, sw.w
    chi2 = lambda x: sine_values(n, X, x)[n - 1] ** 2

    def integrand(x):
        return chi2(x) * (smooth_step(x - s_from, w) - smooth_step(x - s_to, w))

    seams = [s_from - w, s_from + w, s_to - w, s_to + w]
    return quad_checked(integrand, 0.0, X, seams=seams, tol=tol, max_len=X / (2.0 * n))


def open_path_phase(state: AdiabaticState, t, tol=1e-10):
    """gamma(t) = -(1/hbar) int_{t0}^{t} <n| (e/c) dF/dt' |n> dt'.

    The time integral over each trajectory leg reduces exactly to a spatial
    quadrature over the kernel windows; legs whose kernels lie outside the
    box contribute exactly zero, and the frozen climb leg generates nothing.
    """
    sw = state.sweep
    t = float(t)
    if t <= sw.t0:
        return 0.0
    scale = -sw.consts.e_over_c * sw.phi / sw.consts.hbar
    py = _y_weight(state)

    if not isinstance(state.cfg, LoopConfig):
        xs = max(sw.v * t, -2.0 * sw.w)  # windows past the kernel reach add nothing
        return scale * py * _x_window(state, sw.box.X, xs, tol)

    cfg = state.cfg
    times = breakpoint_times(cfg)
    tau = cfg.period
    X, L = sw.box.X, cfg.L
    k = winding_number(t, cfg)
    sweep_window = _x_window(state, X, -L / 2, tol)
    # one full cycle = the sweep leg plus the right-wall re-entry tail of the
    # return leg; the climb is frozen and the far legs carry zero weight
    full_cycle = sweep_window + _x_window(state, L / 2, X, tol)
    total = k * scale * py * full_cycle

    tf = cfg.t0 + (t - cfg.t0) % tau
    if tf < times[1]:
        partial = _x_window(state, X, source_position(tf, cfg)[0], tol)
    elif tf < times[4]:
        partial = sweep_window
    else:
        partial = sweep_window + _x_window(state, L / 2, source_position(tf, cfg)[0], tol)
    return total + scale * py * partial


def berry_phase_closed_form(mode: Mode, cfg):
    """Sharp-kernel open-path phase of one full sweep across the box:

        alpha [ (Y - Ys)/Y + sin(2 ny pi Ys / Y) / (2 ny pi) ]

    The x window contributes exactly 1; Ys outside [0, Y] clamps (a source
    passing at or below the floor deposits the full flux phase alpha).
    """
    sw = _sweep_of(cfg)
    Y = sw.box.Y
    ys = float(np.clip(sw.Ys, 0.0, Y))
    return sw.alpha * ((Y - ys) / Y + np.sin(2.0 * mode.ny * np.pi * ys / Y) / (2.0 * mode.ny * np.pi))


def adiabatic_amplitude(state: AdiabaticState, x, y, t, tol=1e-10):
    """Complex amplitude of the adiabatically evolving mode at (x, y, t)."""
    sw = state.sweep
    dyn = np.exp(-1j * state.energy * (t - state.phase_origin) / sw.consts.hbar)
    geo = np.exp(1j * open_path_phase(state, t, tol))
    local = np.exp(1j * phase_exponent(x, y, t, state.cfg))
    return dyn * geo * local * eigenfunction(state.mode, sw.box, x, y)


def predicted_phase_map(state: AdiabaticState, x, y, t, tol=1e-10):
    """Total non-dynamic phase gamma(t) + (e/hbar c) F(x, y, t)."""
    return open_path_phase(state, t, tol) + phase_exponent(x, y, t, state.cfg)


def nondiagonal_bound(cfg):
    """Upper bound |4 e v Phi / (c X)| (Y - Ys)/Y on every off-diagonal
    coupling element while the source crosses the box."""
    sw = _sweep_of(cfg)
    ys = float(np.clip(sw.Ys, 0.0, sw.box.Y))
    return abs(4.0 * sw.consts.e_over_c * sw.v * sw.phi / sw.box.X) * (sw.box.Y - ys) / sw.box.Y


def minimum_gap(mode: Mode, box, consts, trunc):
    """Smallest |E_m - E_mode| over the truncated basis, m != mode."""
    if trunc.Mx < 2 or trunc.My < 2:
        raise InvalidParameterError("adiabaticity gap needs at least 2 modes per direction")
    e0 = eigenenergy(mode, box, consts)
    gaps = []
    for nx in range(1, trunc.Mx + 1):
        for ny in range(1, trunc.My + 1):
            if (nx, ny) != (mode.nx, mode.ny):
                gaps.append(abs(eigenenergy(Mode(nx, ny), box, consts) - e0))
    return min(gaps)


def adiabaticity_ratio(cfg, mode: Mode, trunc):
    """nondiagonal_bound over the minimum adjacent gap; << 1 certifies the
    adiabatic regime."""
    sw = _sweep_of(cfg)
    return nondiagonal_bound(cfg) / minimum_gap(mode, sw.box, sw.consts, trunc)
