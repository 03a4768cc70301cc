"""Analytic primitives: box eigenstates, smoothed kernels, gauge phase function,
potentials, fields and source densities.

An electron is confined to the rectangle (0, X) x (0, Y) by hard walls.  The
eigenbasis is

    chi_n(x) = sqrt(2/X) sin(n pi x / X)   inside (0, X), zero outside,
    E_{nx,ny} = (hbar^2 pi^2 / 2m) [(nx/X)^2 + (ny/Y)^2].

A classical source entering at height Ys and sweeping horizontally with
velocity v < 0 carries the position-dependent gauge ("phase") function

    F(x, y, t) = -Phi Theta_w(x - Xs(t)) Theta_w(y - Ys),

where Theta_w is a step of half-width w smoothed enough (C^3) that the source
densities below stay continuous.  All potentials and fields derive from F in
closed form:

    vector gauge : A = grad F,                    phi   = 0
    Coulomb gauge: A = 0,                         phi_C = (1/c) dF/dt
    both         : B = curl A = 0,                E = -grad(dF/dt) / c

Everything here is a pure function, vectorized over positions, evaluated in
closed form.  Numerical differentiation appears only in test oracles.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

FOUR_PI = 4.0 * np.pi


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """Hard-wall rectangle (0, X) x (0, Y); dimensionless lengths."""

    X: float = 1.0
    Y: float = 1.0

    def __post_init__(self):
        if not (self.X > 0 and self.Y > 0):
            raise InvalidParameterError(f"box sides must be positive, got X={self.X}, Y={self.Y}")


@dataclass(frozen=True)
class Mode:
    """Quantum-number pair of a box eigenstate."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InvalidParameterError(f"mode numbers must be >= 1, got ({self.nx}, {self.ny})")


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar, m and e/c, all 1 in the default dimensionless system.

    The flux strength only ever enters through alpha = e Phi / (hbar c), so
    Phi itself is derived where fields and sources need it.
    """

    hbar: float = 1.0
    mass: float = 1.0
    e_over_c: float = 1.0

    def __post_init__(self):
        if self.hbar <= 0 or self.mass <= 0 or self.e_over_c == 0:
            raise InvalidParameterError("constants must satisfy hbar > 0, mass > 0, e/c != 0")


@dataclass(frozen=True)
class SweepConfig:
    """Straight-sweep source kinematics and coupling strength.

    The source rides at height Ys, enters the box from the right at
    t0 = X / v (negative since v < 0) and exits the box at t = 0.
    """

    v: float = -0.01
    Ys: float = 0.5
    w: float = 0.05
    alpha: float = np.pi
    box: BoxDomain = field(default_factory=BoxDomain)
    consts: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        if self.v >= 0:
            raise InvalidParameterError(f"sweep velocity must be negative, got v={self.v}")
        if self.w <= 0:
            raise InvalidParameterError(f"kernel half-width must be positive, got w={self.w}")
        if self.w >= min(self.box.X, self.box.Y) / 4:
            raise InvalidParameterError(
                f"w={self.w} too large: need w << min(X, Y) = {min(self.box.X, self.box.Y)}")
        if not np.isfinite(self.alpha):
            raise InvalidParameterError("alpha must be finite")

    @property
    def speed(self):
        return abs(self.v)

    @property
    def t0(self):
        # X / v < 0: the instant the source reaches the right wall
        return self.box.X / self.v

    @property
    def phi(self):
        """Flux strength Phi reconstructed from alpha = e Phi / (hbar c)."""
        return self.alpha * self.consts.hbar / self.consts.e_over_c


# ---------------------------------------------------------------------------
# box spectrum
# ---------------------------------------------------------------------------

def eigenenergy(mode: Mode, box: BoxDomain, consts: PhysicalConstants = PhysicalConstants()):
    """Hard-wall eigenenergy (hbar^2 pi^2 / 2m)[(nx/X)^2 + (ny/Y)^2]."""
    k2 = (mode.nx / box.X) ** 2 + (mode.ny / box.Y) ** 2
    return consts.hbar ** 2 * np.pi ** 2 / (2.0 * consts.mass) * k2


def _wall_sine(n, length, s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < length)
    vals = np.sqrt(2.0 / length) * np.sin(n * np.pi * np.where(inside, s, 0.0) / length)
    return np.where(inside, vals, 0.0)


def eigenfunction(mode: Mode, box: BoxDomain, x, y):
    """chi_nx(x) * eta_ny(y); identically zero outside the open rectangle."""
    return _wall_sine(mode.nx, box.X, x) * _wall_sine(mode.ny, box.Y, y)


# ---------------------------------------------------------------------------
# smoothed kernels
#
# Theta_w(s) = P(u), u = (s + w) / 2w with the C^3 septic smoothstep
# P(u) = 35u^4 - 84u^5 + 70u^6 - 20u^7 on [0, 1], clamped outside.  The first
# three derivatives of P vanish at both ends, so delta_w'' is continuous --
# required by the closed-form source densities.
# ---------------------------------------------------------------------------

def _septic(u):
    return u ** 4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))


def _septic_d1(u):
    return 140.0 * u ** 3 * (1.0 - u) ** 3


def _septic_d2(u):
    return 420.0 * u ** 2 * (1.0 - u) ** 2 * (1.0 - 2.0 * u)


def _septic_d3(u):
    return 840.0 * u * (1.0 + u * (-6.0 + u * (10.0 - 5.0 * u)))


def _check_width(w):
    if not w > 0:
        raise InvalidParameterError(f"kernel half-width must be positive, got w={w}")


def smooth_step(s, w):
    """Broadened unit step: 0 for s <= -w, 1 for s >= w, C^3 and strictly
    increasing in between, with smooth_step(0) = 1/2."""
    _check_width(w)
    u = np.clip((np.asarray(s, dtype=float) + w) / (2.0 * w), 0.0, 1.0)
    return _septic(u)


def smooth_delta(s, w, order=0):
    """Exact derivative of smooth_step: order 0 is d(Theta_w)/ds, orders 1 and
    2 are the next two derivatives.  All vanish identically for |s| >= w."""
    _check_width(w)
    if order not in (0, 1, 2):
        raise InvalidParameterError(f"kernel derivative order must be 0, 1 or 2, got {order}")
    s = np.asarray(s, dtype=float)
    u = (s + w) / (2.0 * w)
    inside = (u > 0.0) & (u < 1.0)
    uc = np.where(inside, u, 0.0)
    poly = (_septic_d1, _septic_d2, _septic_d3)[order]
    return np.where(inside, poly(uc), 0.0) / (2.0 * w) ** (order + 1)


# ---------------------------------------------------------------------------
# gauge phase function, potentials, fields, sources
# ---------------------------------------------------------------------------

def phase_function(x, y, source, cfg: SweepConfig):
    """F(x, y) = -Phi Theta_w(x - Xs) Theta_w(y - Ys) for a source at (Xs, Ys)."""
    xs, ys = source
    return -cfg.phi * smooth_step(np.asarray(x) - xs, cfg.w) * smooth_step(np.asarray(y) - ys, cfg.w)


def vector_potential(x, y, source, cfg: SweepConfig):
    """(Ax, Ay) = grad F, in closed form.  Curl-free by construction."""
    xs, ys = source
    dx = np.asarray(x) - xs
    dy = np.asarray(y) - ys
    ax = -cfg.phi * smooth_delta(dx, cfg.w) * smooth_step(dy, cfg.w)
    ay = -cfg.phi * smooth_step(dx, cfg.w) * smooth_delta(dy, cfg.w)
    return ax, ay


def vector_potential_curl(x, y, source, cfg: SweepConfig):
    """Closed-form curl d(Ay)/dx - d(Ax)/dy.  Both mixed terms equal
    -Phi delta_w delta_w, so the difference is identically zero."""
    xs, ys = source
    dx = np.asarray(x) - xs
    dy = np.asarray(y) - ys
    dady_x = -cfg.phi * smooth_delta(dx, cfg.w) * smooth_delta(dy, cfg.w)
    dadx_y = -cfg.phi * smooth_delta(dx, cfg.w) * smooth_delta(dy, cfg.w)
    return dady_x - dadx_y


def _sweep_source_x(t, cfg: SweepConfig):
    # straight-sweep kinematics Xs = v t; t < t0 clamps to the right wall
    return np.minimum(cfg.v * np.asarray(t, dtype=float), cfg.box.X)


def coulomb_scalar_potential(x, y, t, cfg: SweepConfig):
    """phi_C = (1/c) dF/dt = (v Phi / c) delta_w(x - vt) Theta_w(y - Ys)."""
    xs = _sweep_source_x(t, cfg)
    factor = cfg.v * cfg.phi  # c = 1 in the dimensionless system
    return factor * smooth_delta(np.asarray(x) - xs, cfg.w) * smooth_step(np.asarray(y) - cfg.Ys, cfg.w)


def electric_field(x, y, t, cfg: SweepConfig):
    """E = -grad(dF/dt)/c, closed form with kernel orders 0-1."""
    xs = _sweep_source_x(t, cfg)
    dx = np.asarray(x) - xs
    dy = np.asarray(y) - cfg.Ys
    factor = cfg.v * cfg.phi
    ex = -factor * smooth_delta(dx, cfg.w, 1) * smooth_step(dy, cfg.w)
    ey = -factor * smooth_delta(dx, cfg.w) * smooth_delta(dy, cfg.w)
    return ex, ey


def source_densities(x, y, t, cfg: SweepConfig):
    """Charge and current densities (rho, Jx, Jy) generating the field.

    rho = -(v Phi / 4 pi c) [delta_w''(x - vt) Theta_w(y - Ys)
                             + delta_w(x - vt) delta_w'(y - Ys)]
    Jx  = -(v^2 Phi / 4 pi c) delta_w''(x - vt) Theta_w(y - Ys)
    Jy  = -(v^2 Phi / 4 pi c) delta_w'(x - vt) delta_w(y - Ys)

    The z-component is identically absent in two dimensions, and
    d(rho)/dt + div J = 0 holds term by term.
    """
    xs = _sweep_source_x(t, cfg)
    dx = np.asarray(x) - xs
    dy = np.asarray(y) - cfg.Ys
    w = cfg.w
    rho = -(cfg.v * cfg.phi / FOUR_PI) * (
        smooth_delta(dx, w, 2) * smooth_step(dy, w)
        + smooth_delta(dx, w) * smooth_delta(dy, w, 1))
    jx = -(cfg.v ** 2 * cfg.phi / FOUR_PI) * smooth_delta(dx, w, 2) * smooth_step(dy, w)
    jy = -(cfg.v ** 2 * cfg.phi / FOUR_PI) * smooth_delta(dx, w, 1) * smooth_delta(dy, w)
    return rho, jx, jy
