"""Closed-form thresholds, Gagliardo-Nirenberg constants and the quotient supremum.

The Gagliardo-Nirenberg constant is estimated by maximizing the Weinstein
quotient ``W(u) = |u|_r / (|u|_2^{1-γ} |Δu|_2^γ)`` on a grid.  The quotient
``Q`` is maximized the same way over pairs; its supremum ``R`` fixes the
dichotomy mass ``ρ* = (1/(2βR))^{1/(r-2)}``.  Both maximizations give lower
bounds only.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from ._exponents import critical_exponents, gamma_r
from .model import StatePair, SystemParams, quotient_Q
from .spectral import GridSpec, RealField, spectrum

log = logging.getLogger(__name__)

__all__ = [
    "critical_exponents",
    "gamma_r",
    "DomainError",
    "ThresholdSet",
    "weinstein_quotient",
    "gn_constant_estimate",
    "GNEstimate",
    "d1_constant",
    "c_star",
    "c_lower_star",
    "mass_critical_cap",
    "thresholds",
    "estimate_R",
    "REstimate",
    "rho_star",
    "borderline_check",
    "combined_inequality_ratio",
    "extremal_pair",
]


class DomainError(ValueError):
    """A threshold was requested outside the exponent range where it is defined."""


# ---------------------------------------------------------------- closed forms

def d1_constant(r1: float, r2: float, C_gn: float, printed: bool = False) -> float:
    """Constant of ``K <= D1 M^{r(1-γ)/2} B^{rγ/2}``.

    ``max a^{r1} b^{r2}`` over ``a² + b² = 1`` is ``(r1/r)^{r1/2} (r2/r)^{r2/2}``,
    which gives the sharp constant used here.  ``printed=True`` returns the
    variant with full exponents ``r1, r2``; it is smaller by ``2^{r/2}`` at
    ``r1 = r2`` and the inequality fails with it.
    """
    r = r1 + r2
    e1, e2 = (r1, r2) if printed else (0.5 * r1, 0.5 * r2)
    return (r1 / r) ** e1 * (r2 / r) ** e2 * C_gn**r


def _supercritical(N: int, r: float) -> float:
    r_bar = critical_exponents(N)[0]
    if not r > r_bar:
        raise DomainError(f"threshold defined only for r > {r_bar} (N={N}), got r={r}")
    return r * gamma_r(N, r)


def c_star(N: int, r: float, D1: float, D2: float) -> float:
    rg = _supercritical(N, r)
    return 1.0 / (2.0 * D1 * (rg - 1.0)) * ((rg - 2.0) / ((rg - 1.0) * D2)) ** (rg - 2.0)


def c_lower_star(N: int, r: float, D1: float, max_alpha_sq: float) -> float:
    rg = _supercritical(N, r)
    g = gamma_r(N, r)
    if g > 0.5:
        base = (1.0 - g) / g
    else:
        base = (r - 2.0) / (2.0 * (rg - 1.0))
    return 1.0 / (2.0 * D1 * (rg - 1.0)) * (base * 4.0 / max_alpha_sq) ** ((rg - 2.0) / 2.0)


def mass_critical_cap(N: int, D1: float, beta: float) -> float:
    return (1.0 / (2.0 * D1 * beta)) ** (N / 8.0)


def rho_star(R: float, beta: float, r: float) -> float:
    """``(1/(2βR))^{1/(r-2)}``; 0 for ``R = inf``."""
    if math.isinf(R):
        return 0.0
    return (1.0 / (2.0 * beta * R)) ** (1.0 / (r - 2.0))


def borderline_check(N: int, r: float) -> bool:
    return max(4.0, 2.0 + 8.0 / (N + 1)) <= r <= 2.0 + 8.0 / N


# ---------------------------------------------------------------- Weinstein quotient

def weinstein_quotient(f: RealField, r: float) -> float:
    N = f.grid.dimension
    g = gamma_r(N, r)
    sp = spectrum(f.grid)
    M = float(np.sum(f.samples**2) * f.grid.cell_volume)
    A = sp.quadratic(sp.forward(f.samples), sp.k4)
    P = float(np.sum(np.abs(f.samples) ** r) * f.grid.cell_volume) ** (1.0 / r)
    return P / (M ** (0.5 * (1.0 - g)) * A ** (0.5 * g))


def _neg_log_w(x, grid: GridSpec, r: float, g: float, filt):
    # x are filtered variables: u = F x with F a symmetric Fourier multiplier,
    # so the gradient in x is F applied to the gradient in u
    sp = spectrum(grid)
    xh = sp.forward(x.reshape(grid.shape))
    uh = filt * xh
    u = sp.inverse(uh)
    dV = grid.cell_volume
    au = np.abs(u)
    Kr = float(np.sum(au**r) * dV)
    M = float(np.sum(u * u) * dV)
    A = sp.quadratic(uh, sp.k4)
    val = math.log(Kr) / r - 0.5 * (1.0 - g) * math.log(M) - 0.5 * g * math.log(A)
    grad = (au ** (r - 2.0) * u / Kr - (1.0 - g) * u / M) * dV
    gh = sp.forward(grad) - g * sp.k4 * uh * (dV / A)
    return -val, -sp.inverse(filt * gh).ravel()


@dataclass
class GNEstimate:
    C_gn: float
    extremal: RealField
    converged: bool
    iterations: int

    def __iter__(self):
        # unpacks as (C_gn, extremal)
        return iter((self.C_gn, self.extremal))


def gn_constant_estimate(
    N: int,
    r: float,
    grid: GridSpec | None = None,
    tol: float = 1e-12,
    max_iters: int = 5000,
    seed_width: float | None = None,
) -> GNEstimate:
    """Maximize the Weinstein quotient from a Gaussian seed with L-BFGS.

    The quotient is dilation invariant, so only the profile shape matters;
    the seed width (default ``L/20``) sets the scale of the extremal inside
    the box.  The returned value is the quotient of the returned field, hence
    a lower bound of the optimal constant up to discretization error.
    """
    if grid is None:
        grid = GridSpec(N, 512 if N == 1 else 128, 40.0 if N == 1 else 24.0)
    if grid.dimension != N:
        raise ValueError("grid dimension does not match N")
    g = gamma_r(N, r)
    width = grid.box_length / 20.0 if seed_width is None else seed_width
    sp = spectrum(grid)
    u0 = np.exp(-grid.radius_sq() / width**2)
    u0h = sp.forward(u0)
    M0 = sp.quadratic(u0h)
    A0 = sp.quadratic(u0h, sp.k4)
    # inverse square root of the Hessian scale of log W at the seed
    filt = 1.0 / np.sqrt(g * sp.k4 / A0 + (1.0 - g) / M0)
    x0 = sp.inverse(u0h / filt)
    res = optimize.minimize(
        _neg_log_w, x0.ravel(), args=(grid, r, g, filt), jac=True, method="L-BFGS-B",
        options={"maxiter": max_iters, "ftol": tol, "gtol": 1e-14, "maxcor": 30},
    )
    u = sp.inverse(filt * sp.forward(res.x.reshape(grid.shape)))
    u = u / math.sqrt(np.sum(u * u) * grid.cell_volume)
    # the extremal may come out with either sign; report the positive-peak one
    if u.flat[np.argmax(np.abs(u))] < 0:
        u = -u
    ext = RealField(grid, u)
    C = weinstein_quotient(ext, r)
    converged = bool(res.success)
    if not converged:
        warnings.warn(f"Weinstein ascent stopped early: {res.message}", RuntimeWarning, stacklevel=2)
    return GNEstimate(C_gn=C, extremal=ext, converged=converged, iterations=int(res.nit))


def extremal_pair(extremal: RealField, params: SystemParams) -> StatePair:
    """The equality pair ``(u, sqrt(r2/r1) u)`` of the coupling bound, on the mass sphere."""
    u = extremal.samples
    v = math.sqrt(params.r2 / params.r1) * u
    m = float(np.sum(u * u + v * v) * extremal.grid.cell_volume)
    c = params.rho / math.sqrt(m)
    return StatePair.from_arrays(extremal.grid, c * u, c * v)


def combined_inequality_ratio(p: StatePair, params: SystemParams, D1: float) -> float:
    """``K / (D1 M^{r(1-γ)/2} B^{rγ/2})``; at most 1 when D1 uses the true constant."""
    g = params.gamma_r
    r = params.r
    sp = spectrum(p.grid)
    dV = p.grid.cell_volume
    u, v = p.u.samples, p.v.samples
    K = float(np.sum(np.abs(u) ** params.r1 * np.abs(v) ** params.r2) * dV)
    M = float(np.sum(u * u + v * v) * dV)
    B = sp.quadratic(sp.forward(u), sp.k4) + sp.quadratic(sp.forward(v), sp.k4)
    return K / (D1 * M ** (0.5 * r * (1.0 - g)) * B ** (0.5 * r * g))


# ---------------------------------------------------------------- R estimate

def _neg_log_q(x, grid: GridSpec, params: SystemParams):
    # α1 >= α2 is assumed here; callers relabel
    sp = spectrum(grid)
    n = grid.size
    u = x[:n].reshape(grid.shape)
    v = x[n:].reshape(grid.shape)
    dV = grid.cell_volume
    a1, a2 = params.alpha1, params.alpha2
    r1, r2, r = params.r1, params.r2, params.r
    uh, vh = sp.forward(u), sp.forward(v)
    su = (sp.k2 - 0.5 * a1) ** 2
    sv = (sp.k2 - 0.5 * a2) ** 2
    au, av = np.abs(u), np.abs(v)
    pu, pv = au**r1, av**r2
    K = float(np.sum(pu * pv) * dV)
    M = float(np.sum(u * u + v * v) * dV)
    cv = 0.25 * (a1 * a1 - a2 * a2)
    D = sp.quadratic(uh, su) + sp.quadratic(vh, sv) + cv * float(np.sum(v * v) * dV)
    if K <= 0 or D <= 0:
        return math.inf, np.zeros_like(x)
    val = math.log(K) - math.log(D) - (0.5 * r - 1.0) * math.log(M)
    gu = r1 * np.sign(u) * au ** (r1 - 1.0) * pv / K - 2.0 * sp.inverse(su * uh) / D - (r - 2.0) * u / M
    gv = (
        r2 * np.sign(v) * av ** (r2 - 1.0) * pu / K
        - 2.0 * (sp.inverse(sv * vh) + cv * v) / D
        - (r - 2.0) * v / M
    )
    return -val, -np.concatenate([gu.ravel(), gv.ravel()]) * dV


def _ascend_q(p0: StatePair, params: SystemParams, iters: int) -> tuple[float, StatePair]:
    grid = p0.grid
    x0 = np.concatenate([p0.u.samples.ravel(), p0.v.samples.ravel()])
    res = optimize.minimize(
        _neg_log_q, x0, args=(grid, params), jac=True, method="L-BFGS-B",
        options={"maxiter": iters, "ftol": 1e-14, "gtol": 1e-12},
    )
    x = res.x if np.isfinite(res.fun) else x0
    n = grid.size
    p = StatePair.from_arrays(grid, x[:n], x[n:])
    return quotient_Q(p, params), p


def _q_seeds(grid: GridSpec, params: SystemParams, width: float) -> list[StatePair]:
    rr = grid.radius_sq()
    env = np.exp(-rr / width**2)
    ratio = math.sqrt(params.r2 / params.r1)
    carrier = np.cos(math.sqrt(0.5 * params.alpha1) * np.sqrt(rr))
    return [
        StatePair.from_arrays(grid, env, ratio * env),
        StatePair.from_arrays(grid, env * carrier, ratio * env * carrier),
    ]


@dataclass
class REstimate:
    R_estimate: float
    R_diverging: bool
    sweep: list[tuple[float, float, float]] = field(default_factory=list)  # (L, width, best Q)
    best_pair: StatePair | None = field(default=None, repr=False)

    def __iter__(self):
        return iter((self.R_estimate, self.R_diverging))


def estimate_R(
    params: SystemParams,
    grid: GridSpec,
    restarts: int = 1,
    ascent_iters: int = 30,
    box_factor: float = 8.0,
    extra_seeds: list[StatePair] | None = None,
) -> REstimate:
    """Lower bound of ``sup Q`` with a divergence flag (numerical evidence only).

    Seeds are Gaussian pairs and radial wave packets on the carrier
    ``|ξ|² = α1/2`` at widths ``L/32, L/16, L/8, L/4``, on ``grid`` and on a box
    ``box_factor`` times larger with the same spacing ratio.  Every seed gets a
    short L-BFGS ascent.  The flag is raised when the best value of the last
    (widest) seed exceeds ten times that of the first.  ``restarts`` adds
    seeded random perturbations of each seed.
    """
    if not 2.0 < params.r <= params.r_bar + 1e-12:
        raise DomainError("estimate_R is defined for 2 < r <= 2 + 8/N")
    work = params if params.alpha1 >= params.alpha2 else params.swapped()
    rng = np.random.default_rng(0)
    sweep = []
    best_q, best_p = -math.inf, None
    for L in (grid.box_length, box_factor * grid.box_length):
        g = grid.with_box_length(L)
        for frac in (32, 16, 8, 4):
            width = L / frac
            seeds = _q_seeds(g, work, width)
            for k in range(1, restarts):
                base = seeds[k % 2]
                noise = 0.05 * rng.standard_normal((2,) + g.shape) * np.exp(-g.radius_sq() / width**2)
                seeds.append(StatePair.from_arrays(g, base.u.samples + noise[0], base.v.samples + noise[1]))
            top = -math.inf
            for s in seeds:
                q, p = _ascend_q(s, work, ascent_iters)
                if q > top:
                    top = q
                if q > best_q:
                    best_q, best_p = q, p
            sweep.append((L, width, top))
    for s in extra_seeds or []:
        q, p = _ascend_q(s if params.alpha1 >= params.alpha2 else s.swapped(), work, ascent_iters)
        if q > best_q:
            best_q, best_p = q, p
    diverging = sweep[-1][2] > 10.0 * sweep[0][2]
    return REstimate(R_estimate=best_q, R_diverging=diverging, sweep=sweep, best_pair=best_p)


# ---------------------------------------------------------------- threshold set

@dataclass(frozen=True)
class ThresholdSet:
    gamma_r: float
    r_bar: float
    two_star_star: float
    C_gn: float
    D1: float
    D2: float
    c_star: float | None
    c_lower_star: float | None
    mass_critical_cap: float
    R_estimate: float | None = None
    R_diverging: bool | None = None
    rho_star_estimate: float | None = None
    C_gn_extremal: RealField | None = field(default=None, repr=False, compare=False)

    def require_supercritical(self) -> tuple[float, float]:
        if self.c_star is None or self.c_lower_star is None:
            raise DomainError("c_star and c_lower_star are defined only for r > 2 + 8/N")
        return self.c_star, self.c_lower_star

    def with_R(self, R: float, diverging: bool, beta: float, r: float) -> "ThresholdSet":
        return replace(self, R_estimate=R, R_diverging=diverging, rho_star_estimate=rho_star(R, beta, r))

    def to_dict(self) -> dict:
        out = {
            "gamma_r": self.gamma_r,
            "r_bar": self.r_bar,
            "two_star_star": "inf" if math.isinf(self.two_star_star) else self.two_star_star,
            "C_gn": self.C_gn,
            "D1": self.D1,
            "D2": self.D2,
            "c_star": self.c_star,
            "c_lower_star": self.c_lower_star,
            "mass_critical_cap": self.mass_critical_cap,
            "R_estimate": self.R_estimate,
            "R_diverging": self.R_diverging,
            "rho_star_estimate": self.rho_star_estimate,
        }
        if self.R_diverging is not None:
            out["R_diverging_note"] = "evidence-only"
        return out


def thresholds(params: SystemParams, C_gn: float, extremal: RealField | None = None) -> ThresholdSet:
    if not C_gn > 0:
        raise ValueError("C_gn must be positive")
    N, r = params.dimension, params.r
    r_bar, top = critical_exponents(N)
    D1 = d1_constant(params.r1, params.r2, C_gn)
    D2 = params.max_alpha
    if r > r_bar:
        cs = c_star(N, r, D1, D2)
        cls_ = c_lower_star(N, r, D1, params.max_alpha**2)
    else:
        cs = cls_ = None
    cap = mass_critical_cap(N, D1, params.beta) if params.beta > 0 else math.inf
    return ThresholdSet(
        gamma_r=gamma_r(N, r), r_bar=r_bar, two_star_star=top, C_gn=C_gn, D1=D1, D2=D2,
        c_star=cs, c_lower_star=cls_, mass_critical_cap=cap, C_gn_extremal=extremal,
    )
