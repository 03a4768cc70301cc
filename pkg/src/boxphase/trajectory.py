"""Closed square-loop kinematics of the source and the loop gauge function.

The source sweeps left through the box along y = Ys (segment 0), climbs the
far left side x = -L/2 (segment 1), crosses above along y = Ys + L
(segment 2), descends the far right side x = +L/2 (segment 3) and returns
along y = Ys to its start at (X, Ys) (segment 4).  Perimeter 4L, period
tau = 4L/|v|, with breakpoint times

    {t_i} = {-X, L/2, 3L/2, 5L/2, 7L/2, 4L - X} / |v|.

The loop gauge function is NOT the naive composition of the static phase
function with the moving source position: that composition would drag the
horizontal kernel edge back up through the box on segment 1 and erase the
phase acquired during the sweep, and it would jump by Phi at every cycle
seam.  Physically the return leg does not touch the wave function, so each
completed sweep leaves behind a *static* imprint

    F_imp(x, y) = -Phi Theta_w(x + L/2) Theta_w(y - Ys)

(the phase sheet exactly as the sweep deposited it), segment 1 freezes the
gauge function at that imprint, and segments 2-4 add the moving-source term
back on top (it re-enters the box only through the thin right-wall sliver at
the end of segment 4, which hands off continuously to the next sweep).  The
result is continuous in t everywhere, generates fields only during sweeps,
and increases the deposited phase by one imprint per cycle -- the winding
correction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .model import SweepConfig, smooth_step


@dataclass(frozen=True)
class LoopConfig:
    """Square-loop source trajectory around a sweep; frame side L, perimeter 4L."""

    sweep: SweepConfig
    L: float = 10.0

    def __post_init__(self):
        X, Y = self.sweep.box.X, self.sweep.box.Y
        w = self.sweep.w
        # breakpoint ordering needs t5 > t4, i.e. L > 2X; the margins keep the
        # return legs (and their kernel tails) strictly outside the box
        if self.L <= 2.0 * (X + w):
            raise InvalidParameterError(
                f"frame side L={self.L} too small: breakpoints disorder unless L > 2(X + w) = {2 * (X + w)}")
        if self.L <= Y + w:
            raise InvalidParameterError(
                f"frame side L={self.L} must exceed Y + w = {Y + w} so the top leg clears the box")

    @property
    def period(self):
        return 4.0 * self.L / self.sweep.speed

    @property
    def t0(self):
        return self.sweep.t0


def as_loop(cfg):
    """Accept SweepConfig or LoopConfig; None marks a pure straight sweep."""
    if isinstance(cfg, LoopConfig):
        return cfg
    return None


def _sweep_of(cfg):
    return cfg.sweep if isinstance(cfg, LoopConfig) else cfg


def breakpoint_times(cfg: LoopConfig):
    """The six times at which the source kinematics change, strictly increasing."""
    X = cfg.sweep.box.X
    L = cfg.L
    ticks = np.array([-X, L / 2, 3 * L / 2, 5 * L / 2, 7 * L / 2, 4 * L - X])
    return ticks / cfg.sweep.speed


def period(cfg: LoopConfig):
    return cfg.period


def winding_number(t, cfg: LoopConfig):
    """Completed loop count floor((t - t0) / tau); 0 on the first cycle."""
    t = np.asarray(t, dtype=float)
    k = np.floor((t - cfg.t0) / cfg.period).astype(int)
    k = np.maximum(k, 0)
    return k if k.ndim else int(k)


def _fold(t, cfg: LoopConfig):
    """Reduce t to the first cycle [t0, t0 + tau); clamp t < t0 to t0."""
    t = np.asarray(t, dtype=float)
    rel = np.maximum(t - cfg.t0, 0.0)
    return cfg.t0 + np.mod(rel, cfg.period)


def segment_index(t, cfg: LoopConfig):
    """Index 0..4 of the trajectory leg containing the (folded) time t."""
    tf = _fold(t, cfg)
    times = breakpoint_times(cfg)
    idx = np.searchsorted(times[1:-1], tf, side="right")
    return idx if np.ndim(idx) else int(idx)


# per-segment unit velocities (ux, uy), clockwise square traversal
_SEGMENT_DIRECTIONS = np.array([(-1, 0), (0, 1), (1, 0), (0, -1), (-1, 0)], dtype=float)


def source_position(t, cfg):
    """Source coordinates (Xs, Ys) at time t.

    For a plain SweepConfig the source just rides left along y = Ys.  For a
    LoopConfig the position is piecewise linear around the square and
    periodic with period tau; times before t0 clamp to the start (X, Ys).
    """
    sweep = _sweep_of(cfg)
    if not isinstance(cfg, LoopConfig):
        t = np.asarray(t, dtype=float)
        xs = np.minimum(sweep.v * t, sweep.box.X)
        if xs.ndim == 0:
            return float(xs), sweep.Ys
        return xs, np.full_like(xs, sweep.Ys)

    tf = np.asarray(_fold(t, cfg))
    times = breakpoint_times(cfg)
    X, Ys, L, s = sweep.box.X, sweep.Ys, cfg.L, sweep.speed
    anchors = np.array([
        (X, Ys),
        (-L / 2, Ys),
        (-L / 2, Ys + L),
        (L / 2, Ys + L),
        (L / 2, Ys),
    ])
    idx = np.searchsorted(times[1:-1], tf, side="right")
    dt = tf - times[idx]
    xs = anchors[idx, 0] + _SEGMENT_DIRECTIONS[idx, 0] * s * dt
    ys = anchors[idx, 1] + _SEGMENT_DIRECTIONS[idx, 1] * s * dt
    if xs.ndim == 0:
        return float(xs), float(ys)
    return xs, ys


def source_velocity(t, cfg):
    """(dXs/dt, dYs/dt) at time t (clamped region before t0 has zero velocity)."""
    sweep = _sweep_of(cfg)
    if not isinstance(cfg, LoopConfig):
        moving = np.asarray(t, dtype=float) >= sweep.t0
        vx = np.where(moving, sweep.v, 0.0)
        return (float(vx), 0.0) if vx.ndim == 0 else (vx, np.zeros_like(vx))
    idx = segment_index(t, cfg)
    direction = _SEGMENT_DIRECTIONS[np.asarray(idx)]
    before = np.asarray(t, dtype=float) < cfg.t0
    vx = np.where(before, 0.0, direction[..., 0] * sweep.speed)
    vy = np.where(before, 0.0, direction[..., 1] * sweep.speed)
    return (float(vx), float(vy)) if vx.ndim == 0 else (vx, vy)


def completed_sweeps(t, cfg: LoopConfig):
    """Number of finished sweep legs by time t (increments at t1 + k tau)."""
    k = winding_number(t, cfg)
    tf = _fold(t, cfg)
    t1 = breakpoint_times(cfg)[1]
    extra = np.asarray(tf >= t1, dtype=int)
    n = k + extra
    return n if np.ndim(n) else int(n)


def imprint_phase_function(x, y, cfg: LoopConfig):
    """Static phase sheet left behind by one completed sweep."""
    sweep = cfg.sweep
    return -sweep.phi * smooth_step(np.asarray(x) + cfg.L / 2, sweep.w) \
        * smooth_step(np.asarray(y) - sweep.Ys, sweep.w)


def loop_phase_function(x, y, t, cfg):
    """Gauge function F(x, y, t) for the full trajectory, continuous in t.

    completed_sweeps(t) static imprints plus the moving-source term, the
    latter suppressed on segment 1 where it is frozen into the imprint.
    Plain SweepConfig falls back to the single moving term.
    """
    sweep = _sweep_of(cfg)
    xs, ys = source_position(t, cfg)
    moving = -sweep.phi * smooth_step(np.asarray(x) - xs, sweep.w) \
        * smooth_step(np.asarray(y) - ys, sweep.w)
    if not isinstance(cfg, LoopConfig):
        return moving
    n = completed_sweeps(t, cfg)
    seg = segment_index(t, cfg)
    if np.ndim(t) == 0:
        if seg == 1:
            return n * imprint_phase_function(x, y, cfg)
        return n * imprint_phase_function(x, y, cfg) + moving
    n = np.asarray(n)
    live = np.asarray(seg) != 1
    return n * imprint_phase_function(x, y, cfg) + np.where(live, moving, 0.0)


def phase_exponent(x, y, t, cfg):
    """(e / hbar c) F(x, y, t): the local phase carried by the adiabatic state."""
    sweep = _sweep_of(cfg)
    scale = sweep.consts.e_over_c / sweep.consts.hbar
    return scale * loop_phase_function(x, y, t, cfg)


def kinematic_markers(cfg, t_start, t_end):
    """Sorted times in (t_start, t_end) where stepping must not cross a kink:
    trajectory breakpoints and cycle seams."""
    if not isinstance(cfg, LoopConfig):
        return np.array([])
    tau = cfg.period
    base = breakpoint_times(cfg)
    k_lo = int(np.floor((t_start - cfg.t0) / tau)) - 1
    k_hi = int(np.floor((t_end - cfg.t0) / tau)) + 1
    marks = []
    for k in range(max(k_lo, 0), k_hi + 1):
        marks.extend(base[:-1] + k * tau)
        marks.append(base[-1] + k * tau)
    marks = np.unique([m for m in marks if t_start < m < t_end])
    return marks
