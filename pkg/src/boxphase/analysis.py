"""Observables extracted from propagation output: local phase maps, open-path
phase histories, overlaps, energy constancy, co-degeneracy and recurrence.

Phase-sensitive observables live in the vector gauge, where the local phase
deposit is visible on the wave function.  Runs propagate in whichever gauge
they ask for; vector-gauge observables of a Coulomb-gauge run are obtained
through the analytic gauge factor exp(i (e/hbar c) F), evaluated by panel
quadrature in the mode basis so no basis truncation enters the dressing.
"""

from dataclasses import dataclass, field

import numpy as np

from .adiabatic import AdiabaticState, adiabaticity_ratio, predicted_phase_map
from .errors import ContractError, InvalidParameterError, RegimeError
from .model import Mode, eigenenergy, eigenfunction, smooth_step
from .propagator import (ModeCoefficients, PropagationResult, Truncation,
                         basis_vector, coupling_matrix, propagate, render_to_grid)
from .quadrature import gauss_nodes, sine_pair_range, sine_values
from .trajectory import (LoopConfig, _sweep_of, completed_sweeps, phase_exponent,
                         segment_index, source_position)


# ---------------------------------------------------------------------------
# elementary mode-space observables
# ---------------------------------------------------------------------------

def overlap(a: ModeCoefficients, b: ModeCoefficients):
    """<a|b> in mode space; |overlap| <= 1 for unit-norm states."""
    if a.c.shape != b.c.shape:
        raise ContractError(f"mismatched truncations: {a.c.shape} vs {b.c.shape}")
    return complex(np.vdot(a.c, b.c))


def energy_expectation(state: ModeCoefficients, gauge, trunc: Truncation, cfg):
    """<c|(H0 + W(t))|c>, guaranteed real by Hermiticity."""
    sw = _sweep_of(cfg)
    h0 = trunc.energies(sw.box, sw.consts)
    W = coupling_matrix(state.t, gauge, trunc, cfg).W
    val = np.vdot(state.c, h0 * state.c + W @ state.c)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ContractError(f"energy expectation not real: {val}")
    return float(val.real)


def max_offdiagonal(W):
    D = W.shape[0]
    mask = ~np.eye(D, dtype=bool)
    return float(np.max(np.abs(W[mask])))


def codegeneracy_residual(state_after: ModeCoefficients, t_ref, mode: Mode,
                          trunc: Truncation, cfg, gauge="coulomb"):
    """|| (H0 + W(t_ref) - E_mode) c || / ||c||: zero iff the after-cycle state
    is an eigenstate of the original Hamiltonian with the original energy."""
    sw = _sweep_of(cfg)
    h0 = trunc.energies(sw.box, sw.consts)
    e0 = eigenenergy(mode, sw.box, sw.consts)
    W = coupling_matrix(t_ref, gauge, trunc, cfg).W
    r = h0 * state_after.c + W @ state_after.c - e0 * state_after.c
    return float(np.linalg.norm(r) / np.linalg.norm(state_after.c))


# ---------------------------------------------------------------------------
# open-path phase extraction
# ---------------------------------------------------------------------------

def _unwrap_against(raw, reference):
    return raw + 2.0 * np.pi * np.round((reference - raw) / (2.0 * np.pi))


def gamma_history(result: PropagationResult, tol=1e-10):
    """Open-path phase extracted from the run: the phase of the overlap with
    the gamma-free adiabatic prediction, unwrapped along the samples.

    In the Coulomb gauge the prediction is the bare dressed-free mode, so the
    extraction is arg(c_n) + E (t - t0)/hbar; in the vector gauge the local
    gauge factor is removed first through the dressing column.
    """
    sw = _sweep_of(result.cfg)
    idx = result.trunc.index_of(result.mode)
    e0 = eigenenergy(result.mode, sw.box, sw.consts)
    hbar = sw.consts.hbar
    out = np.empty(len(result.times))
    prev = 0.0
    for i, (t, c) in enumerate(zip(result.times, result.coeffs)):
        if result.gauge == "coulomb":
            amp = c[idx]
        else:
            col = dressing_column(t, result.cfg, result.trunc, result.mode)
            amp = np.vdot(col, c)
        raw = np.angle(amp) + e0 * (t - sw.t0) / hbar
        raw = np.mod(raw + np.pi, 2.0 * np.pi) - np.pi
        out[i] = prev + np.mod(raw - prev + np.pi, 2.0 * np.pi) - np.pi
        prev = out[i]
    return result.times, out


# ---------------------------------------------------------------------------
# gauge dressing: mode-basis matrix of exp(i (e/hbar c) F(t))
# ---------------------------------------------------------------------------

def _phase_profile_y(phase_scale, trunc, cfg):
    """(My, My) matrix of int eta_m eta_n exp(-i phase_scale Theta_w(y - Ys)) dy."""
    sw = _sweep_of(cfg)
    My, Y, Ys, w = trunc.My, sw.box.Y, sw.Ys, sw.w
    out = np.zeros((My, My), dtype=complex)
    lo, hi = max(Ys - w, 0.0), min(Ys + w, Y)
    if lo > 0.0:
        out += sine_pair_range(My, Y, 0.0, lo).astype(complex)
    if hi < Y:
        out += np.exp(-1j * phase_scale) * sine_pair_range(My, Y, hi, Y)
    if hi > lo:
        nodes, wts = gauss_nodes(lo, hi, seams=(Ys,), order=16, max_len=Y / (2.0 * My))
        k = np.exp(-1j * phase_scale * smooth_step(nodes - Ys, w))
        B = sine_values(My, Y, nodes)
        out += (B * (wts * k)) @ B.T
    return out


def dressing_matrix(t, cfg, trunc: Truncation):
    """(D, D) mode-basis matrix of multiplication by exp(i (e/hbar c) F(x,y,t)).

    The in-box gauge exponent is -alpha Theta_w(y-Ys) (N + Theta_w(x-Xs)) on
    the sweep legs (N banked imprints), which splits into saturated x-regions
    handled in closed form plus Gauss nodes across the moving x-band.
    """
    sw = _sweep_of(cfg)
    Mx, X, w = trunc.Mx, sw.box.X, sw.w
    alpha = sw.alpha
    if isinstance(cfg, LoopConfig):
        n_imp = completed_sweeps(t, cfg)
        live = segment_index(t, cfg) != 1
    else:
        n_imp, live = 0, True
    xs, _ = source_position(t, cfg)

    if not live or xs > X + w:          # x-step saturated to 0 inside the box
        return np.kron(np.eye(Mx), _phase_profile_y(alpha * n_imp, trunc, cfg))
    if xs < -w:                          # x-step saturated to 1 inside the box
        return np.kron(np.eye(Mx), _phase_profile_y(alpha * (n_imp + 1), trunc, cfg))

    out = np.zeros((trunc.dim, trunc.dim), dtype=complex)
    lo, hi = max(xs - w, 0.0), min(xs + w, X)
    if lo > 0.0:
        out += np.kron(sine_pair_range(Mx, X, 0.0, lo),
                       _phase_profile_y(alpha * n_imp, trunc, cfg))
    if hi < X:
        out += np.kron(sine_pair_range(Mx, X, hi, X),
                       _phase_profile_y(alpha * (n_imp + 1), trunc, cfg))
    nodes, wts = gauss_nodes(lo, hi, seams=(xs,), order=12, max_len=X / (2.0 * Mx))
    B = sine_values(Mx, X, nodes)
    for xi, wi, col in zip(nodes, wts, B.T):
        gy = _phase_profile_y(alpha * (n_imp + smooth_step(xi - xs, w)), trunc, cfg)
        out += np.kron(wi * np.outer(col, col), gy)
    return out


def dressing_column(t, cfg, trunc: Truncation, mode: Mode):
    """Column of dressing_matrix on a single bare mode (cheaper)."""
    return dressing_matrix(t, cfg, trunc)[:, trunc.index_of(mode)]


def dressed_overlap(initial: ModeCoefficients, later: ModeCoefficients, t_initial,
                    t_later, cfg, trunc: Truncation):
    """Vector-gauge overlap <U(t_i) Psi_i | U(t_l) Psi_l> of two Coulomb-gauge
    states, with the gauge factors applied analytically."""
    ui = dressing_matrix(t_initial, cfg, trunc)
    ul = dressing_matrix(t_later, cfg, trunc)
    return complex(np.vdot(ui @ initial.c, ul @ later.c))


def gauge_map_fidelity(vector_state: ModeCoefficients, coulomb_state: ModeCoefficients,
                       t, cfg, trunc: Truncation):
    """|<Psi_vector | U(t) | Psi_coulomb>|: 1 when both runs describe the same
    physical state through the gauge transformation."""
    U = dressing_matrix(t, cfg, trunc)
    return float(abs(np.vdot(vector_state.c, U @ coulomb_state.c)))


# ---------------------------------------------------------------------------
# phase maps
# ---------------------------------------------------------------------------

def local_phase_map(field, grid_x, grid_y, state: AdiabaticState, t,
                    mask_eps=1e-3, tol=1e-10):
    """Local non-dynamic phase of a rendered field against the bare mode.

    Returns (phase, mask): phase in (-pi, pi] shifted by whole turns to the
    branch of the analytic prediction; points where the reference amplitude
    falls below mask_eps of its maximum are masked (NaN phase).
    """
    if not (0.0 < mask_eps < 1.0):
        raise InvalidParameterError("mask_eps must lie in (0, 1)")
    sw = state.sweep
    ref = eigenfunction(state.mode, sw.box, grid_x[:, None], grid_y[None, :])
    mask = np.abs(ref) >= mask_eps * np.max(np.abs(ref))
    if not mask.any():
        raise InvalidParameterError("reference mode is below mask_eps everywhere; map undefined")
    dyn = np.exp(-1j * state.energy * (t - state.phase_origin) / sw.consts.hbar)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = field / (dyn * ref)
    raw = np.angle(ratio)
    predicted = predicted_phase_map(state, grid_x[:, None], grid_y[None, :], t, tol)
    phase = _unwrap_against(raw, predicted)
    phase = np.where(mask, phase, np.nan)
    return phase, mask


def render_vector_gauge(result: PropagationResult, t, grid=(201, 201)):
    """Vector-gauge field of a run at sample time t on the render grid."""
    state = result.at_time(t)
    sw = _sweep_of(result.cfg)
    x, y, field = render_to_grid(state, result.trunc, sw.box, grid)
    if result.gauge == "coulomb":
        field = field * np.exp(1j * phase_exponent(x[:, None], y[None, :], t, result.cfg))
    return x, y, field


# ---------------------------------------------------------------------------
# aggregated report of one run
# ---------------------------------------------------------------------------

@dataclass
class PhaseReport:
    """Everything the experiment drivers serialize about one run."""

    times: np.ndarray
    norm_history: np.ndarray
    energy_history: np.ndarray
    gamma_history: np.ndarray
    overlap_history: np.ndarray      # complex, against the initial state
    max_offdiag_history: np.ndarray
    windings: np.ndarray
    grid_x: np.ndarray = None
    grid_y: np.ndarray = None
    phase_map: np.ndarray = None
    phase_mask: np.ndarray = None
    predicted_map: np.ndarray = None
    codegeneracy: float = None


def build_phase_report(result: PropagationResult, grid=(201, 201), map_time=None,
                       mask_eps=1e-3, tol=1e-10) -> PhaseReport:
    sw = _sweep_of(result.cfg)
    state = AdiabaticState(result.mode, result.cfg)
    times = result.times
    norms = result.norms()
    energies = np.array([energy_expectation(ModeCoefficients(c, t), result.gauge,
                                            result.trunc, result.cfg)
                         for t, c in zip(times, result.coeffs)])
    _, gammas = gamma_history(result, tol)
    c0 = ModeCoefficients(result.coeffs[0], float(times[0]))
    overlaps = np.array([overlap(c0, ModeCoefficients(c, t))
                         for t, c in zip(times, result.coeffs)])
    offdiags = np.array([max_offdiagonal(
        coupling_matrix(t, result.gauge, result.trunc, result.cfg).W) for t in times])

    report = PhaseReport(times=times, norm_history=norms, energy_history=energies,
                         gamma_history=gammas, overlap_history=overlaps,
                         max_offdiag_history=offdiags, windings=result.windings)
    if map_time is None:
        map_time = float(times[-1])
    x, y, field = render_vector_gauge(result, map_time, grid)
    report.grid_x, report.grid_y = x, y
    report.phase_map, report.phase_mask = local_phase_map(field, x, y, state,
                                                          map_time, mask_eps, tol)
    report.predicted_map = predicted_phase_map(state, x[:, None], y[None, :], map_time, tol)
    return report


# ---------------------------------------------------------------------------
# recurrence at rational flux
# ---------------------------------------------------------------------------

@dataclass
class RecurrenceReport:
    cycles: int
    magnitudes: np.ndarray          # |<Psi(t0)|Psi(t0 + k tau)>|, k = 1..cycles
    predicted: np.ndarray           # quadrature oracle of the same overlaps
    adiabaticity: float
    w_slack: float                  # 1 - predicted magnitude at k = cycles
    returned: bool                  # final-cycle magnitude within tol of prediction
    intermediates_below: bool       # all earlier magnitudes strictly smaller
    extras: dict = field(default_factory=dict)


def predicted_recurrence_overlap(k, cfg, mode: Mode, trunc: Truncation):
    """Quadrature oracle: |<chi eta| exp(-i k alpha Theta_w(y-Ys)) |chi eta>|
    including the right-wall sliver of the x-step at the cycle seam."""
    U = dressing_matrix(_sweep_of(cfg).t0 + k * cfg.period, cfg, trunc)
    e0 = basis_vector(mode, trunc)
    return float(abs(np.vdot(e0, U @ e0)))


def recurrence_check(cfg: LoopConfig, cycles, trunc: Truncation, mode=Mode(1, 1),
                     dt=None, overlap_tol=1e-3, regime_threshold=0.05,
                     sample_dt=None) -> RecurrenceReport:
    """Run `cycles` full loops and report the vector-gauge return overlaps.

    Refuses (RegimeError) outside the certified adiabatic regime, where the
    overlaps would conflate dynamical excitation with phase geometry.  The
    k = cycles magnitude is asserted against the sharp-kernel return up to
    the w-dependent slack predicted by the quadrature oracle.
    """
    ratio = adiabaticity_ratio(cfg, mode, trunc)
    if ratio > regime_threshold:
        raise RegimeError(
            f"adiabaticity ratio {ratio:.3e} exceeds threshold {regime_threshold:.3e}; "
            "slow the sweep or shrink the flux before drawing recurrence conclusions")
    if cycles < 1:
        raise InvalidParameterError("cycles must be >= 1")

    tau = cfg.period
    t0 = cfg.t0
    result = propagate(mode, t0, t0 + cycles * tau, dt, "coulomb", trunc, cfg,
                       sample_dt=sample_dt or tau / 8.0)
    initial = result.at_time(t0)
    mags, preds = [], []
    for k in range(1, cycles + 1):
        later = result.at_time(t0 + k * tau)
        mags.append(abs(dressed_overlap(initial, later, t0, t0 + k * tau, cfg, trunc)))
        preds.append(predicted_recurrence_overlap(k, cfg, mode, trunc))
    mags, preds = np.array(mags), np.array(preds)
    w_slack = 1.0 - preds[-1]
    returned = bool(mags[-1] >= preds[-1] - overlap_tol)
    intermediates_below = bool(np.all(mags[:-1] < mags[-1])) if cycles > 1 else True
    return RecurrenceReport(cycles=cycles, magnitudes=mags, predicted=preds,
                            adiabaticity=ratio, w_slack=w_slack, returned=returned,
                            intermediates_below=intermediates_below,
                            extras={"result": result})
