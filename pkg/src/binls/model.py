"""Energy functionals, gradients and diagnostic identities of the coupled system.

All functionals act on a :class:`StatePair` ``(u, v)`` sharing one grid::

    I(u, v) = 1/2 (|Δu|² + |Δv|²) - α1/2 |∇u|² - α2/2 |∇v|² - β ∫|u|^r1 |v|^r2

Quadratic terms are evaluated spectrally, the coupling by quadrature.  The
multiplier ``λ`` uses the convention ``Δ²u + α1 Δu + λ u = β r1 |u|^{r1-2}|v|^{r2} u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._exponents import critical_exponents, gamma_r
from .spectral import GridSpec, RealField, dilate, spectrum

__all__ = [
    "SystemParams",
    "StatePair",
    "Terms",
    "evaluate_terms",
    "coupling_integral",
    "energy_I",
    "energy_J",
    "mj_value",
    "q_denominator",
    "quotient_Q",
    "gap_H",
    "pohozaev_P",
    "l2_gradient_I",
    "multiplier_estimate",
    "pohozaev_identity_residual",
    "euler_lagrange_residual",
    "el_pohozaev_combination_residual",
    "psi_closed_form",
    "psi_by_dilation",
    "dilate_pair",
    "UndefinedQuotientError",
]


class UndefinedQuotientError(ValueError):
    """Raised when a quotient is requested for the zero pair."""


@dataclass(frozen=True)
class SystemParams:
    dimension: int
    alpha1: float
    alpha2: float
    beta: float
    r1: float
    r2: float
    rho: float

    def __post_init__(self):
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ValueError("alpha1 and alpha2 must be positive")
        # beta = 0 is admitted for the coupling-free functional J
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.r1 <= 1 or self.r2 <= 1:
            raise ValueError("r1 and r2 must exceed 1")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not self.r < self.two_star_star:
            raise ValueError(f"r = {self.r} must be below the Sobolev exponent {self.two_star_star}")
        object.__setattr__(self, "dimension", int(self.dimension))

    @property
    def r(self) -> float:
        return self.r1 + self.r2

    @property
    def r_bar(self) -> float:
        return critical_exponents(self.dimension)[0]

    @property
    def two_star_star(self) -> float:
        return critical_exponents(self.dimension)[1]

    @property
    def gamma_r(self) -> float:
        return gamma_r(self.dimension, self.r)

    @property
    def max_alpha(self) -> float:
        return max(self.alpha1, self.alpha2)

    @property
    def target_mass(self) -> float:
        return self.rho**2

    def swapped(self) -> "SystemParams":
        return replace(self, alpha1=self.alpha2, alpha2=self.alpha1, r1=self.r2, r2=self.r1)

    def with_rho(self, rho: float) -> "SystemParams":
        return replace(self, rho=rho)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "beta": self.beta,
            "r1": self.r1,
            "r2": self.r2,
            "rho": self.rho,
        }


@dataclass(frozen=True)
class StatePair:
    u: RealField
    v: RealField

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v must share one grid")

    @classmethod
    def from_arrays(cls, grid: GridSpec, u, v) -> "StatePair":
        return cls(RealField(grid, u), RealField(grid, v))

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @property
    def mass_u(self) -> float:
        return float(np.sum(self.u.samples**2) * self.grid.cell_volume)

    @property
    def mass_v(self) -> float:
        return float(np.sum(self.v.samples**2) * self.grid.cell_volume)

    @property
    def total_mass(self) -> float:
        return self.mass_u + self.mass_v

    def scaled(self, c: float) -> "StatePair":
        return StatePair(self.u * c, self.v * c)

    def swapped(self) -> "StatePair":
        return StatePair(self.v, self.u)

    def on_sphere(self, rho: float, rtol: float = 1e-12) -> bool:
        return abs(self.total_mass - rho**2) <= rtol * rho**2


@dataclass(frozen=True)
class Terms:
    """Every integral the functionals are built from, for one pair."""

    mass_u: float
    mass_v: float
    bend_u: float  # |Δu|²
    bend_v: float
    grad_u: float  # |∇u|²
    grad_v: float
    coupling: float  # ∫|u|^r1 |v|^r2

    @property
    def total_mass(self) -> float:
        return self.mass_u + self.mass_v

    @property
    def bending(self) -> float:
        return self.bend_u + self.bend_v

    def weighted_gradient(self, params: SystemParams) -> float:
        return params.alpha1 * self.grad_u + params.alpha2 * self.grad_v

    def energy(self, params: SystemParams) -> float:
        return 0.5 * self.bending - 0.5 * self.weighted_gradient(params) - params.beta * self.coupling


def _coupling_density(u: np.ndarray, v: np.ndarray, params: SystemParams):
    au = np.abs(u)
    av = np.abs(v)
    pu = au**params.r1
    pv = av**params.r2
    return au, av, pu, pv


def _terms_from_arrays(u, v, grid: GridSpec, params: SystemParams, uh=None, vh=None):
    sp = spectrum(grid)
    uh = sp.forward(u) if uh is None else uh
    vh = sp.forward(v) if vh is None else vh
    _, _, pu, pv = _coupling_density(u, v, params)
    dV = grid.cell_volume
    return Terms(
        mass_u=float(np.sum(u * u) * dV),
        mass_v=float(np.sum(v * v) * dV),
        bend_u=sp.quadratic(uh, sp.k4),
        bend_v=sp.quadratic(vh, sp.k4),
        grad_u=sp.quadratic(uh, sp.k2),
        grad_v=sp.quadratic(vh, sp.k2),
        coupling=float(np.sum(pu * pv) * dV),
    )


def evaluate_terms(p: StatePair, params: SystemParams) -> Terms:
    return _terms_from_arrays(p.u.samples, p.v.samples, p.grid, params)


def energy_and_gradient_arrays(u, v, grid: GridSpec, params: SystemParams):
    """Energy terms and the unconstrained L² gradient of I for raw sample arrays.

    This is the hot path of the solvers; it shares one forward FFT per
    component between the energy and the gradient.
    """
    sp = spectrum(grid)
    uh = sp.forward(u)
    vh = sp.forward(v)
    terms = _terms_from_arrays(u, v, grid, params, uh, vh)
    gu, gv = _gradient_from_spectra(u, v, uh, vh, sp, params)
    return terms, gu, gv


def _gradient_from_spectra(u, v, uh, vh, sp, params: SystemParams):
    au, av, pu, pv = _coupling_density(u, v, params)
    lin_u = sp.inverse((sp.k4 - params.alpha1 * sp.k2) * uh)
    lin_v = sp.inverse((sp.k4 - params.alpha2 * sp.k2) * vh)
    if params.beta == 0:
        return lin_u, lin_v
    # sign(u)|u|^{r1-1}: continuous extension by 0 at u = 0 since r1 > 1
    nu = np.sign(u) * au ** (params.r1 - 1.0) * pv
    nv = np.sign(v) * av ** (params.r2 - 1.0) * pu
    return lin_u - params.beta * params.r1 * nu, lin_v - params.beta * params.r2 * nv


def coupling_integral(p: StatePair, params: SystemParams) -> float:
    _, _, pu, pv = _coupling_density(p.u.samples, p.v.samples, params)
    return float(np.sum(pu * pv) * p.grid.cell_volume)


def energy_I(p: StatePair, params: SystemParams) -> float:
    return evaluate_terms(p, params).energy(params)


def energy_J(p: StatePair, params: SystemParams) -> float:
    t = evaluate_terms(p, params)
    return 0.5 * t.bending - 0.5 * t.weighted_gradient(params)


def mj_value(params: SystemParams) -> float:
    """Infimum of the coupling-free energy on the mass sphere (never attained)."""
    return -(params.max_alpha**2) / 8.0 * params.rho**2


def _ordered(p: StatePair, params: SystemParams):
    if params.alpha1 >= params.alpha2:
        return p, params
    return p.swapped(), params.swapped()


def q_denominator(p: StatePair, params: SystemParams) -> float:
    """``|(Δ+α1/2)u|² + |(Δ+α2/2)v|² + (α1²-α2²)/4 |v|²`` with α1 >= α2 by relabelling."""
    p, params = _ordered(p, params)
    sp = spectrum(p.grid)
    a1, a2 = params.alpha1, params.alpha2
    du = sp.quadratic(sp.forward(p.u.samples), (sp.k2 - 0.5 * a1) ** 2)
    dv = sp.quadratic(sp.forward(p.v.samples), (sp.k2 - 0.5 * a2) ** 2)
    return du + dv + 0.25 * (a1**2 - a2**2) * p.mass_v


def quotient_Q(p: StatePair, params: SystemParams) -> float:
    total = p.total_mass
    if total == 0:
        raise UndefinedQuotientError("Q is undefined for the zero pair")
    denom = q_denominator(p, params) * total ** (0.5 * params.r - 1.0)
    if denom == 0:
        return math.inf
    return coupling_integral(p, params) / denom


def gap_H(p: StatePair, params: SystemParams) -> float:
    return energy_I(p, params) - mj_value(params)


def pohozaev_P(p: StatePair, params: SystemParams, terms: Terms | None = None) -> float:
    t = evaluate_terms(p, params) if terms is None else terms
    rg = params.r * params.gamma_r
    return 2.0 * t.bending - t.weighted_gradient(params) - 2.0 * params.beta * rg * t.coupling


def l2_gradient_I(p: StatePair, params: SystemParams) -> StatePair:
    sp = spectrum(p.grid)
    u, v = p.u.samples, p.v.samples
    gu, gv = _gradient_from_spectra(u, v, sp.forward(u), sp.forward(v), sp, params)
    return StatePair.from_arrays(p.grid, gu, gv)


def _multiplier(t: Terms, params: SystemParams) -> float:
    if t.total_mass == 0:
        raise ValueError("multiplier undefined for the zero pair")
    return (-t.bending + t.weighted_gradient(params) + params.beta * params.r * t.coupling) / t.total_mass


def multiplier_estimate(p: StatePair, params: SystemParams) -> float:
    return _multiplier(evaluate_terms(p, params), params)


def pohozaev_identity_residual(p: StatePair, params: SystemParams, lam: float) -> float:
    t = evaluate_terms(p, params)
    N = params.dimension
    return (
        0.5 * (N - 4) * t.bending
        - 0.5 * (N - 2) * t.weighted_gradient(params)
        + 0.5 * N * lam * t.total_mass
        - N * params.beta * t.coupling
    )


def euler_lagrange_residual(p: StatePair, params: SystemParams, lam: float) -> float:
    g = l2_gradient_I(p, params)
    ru = g.u.samples + lam * p.u.samples
    rv = g.v.samples + lam * p.v.samples
    return float(math.sqrt((np.sum(ru**2) + np.sum(rv**2)) * p.grid.cell_volume))


def el_pohozaev_combination_residual(p: StatePair, params: SystemParams, lam: float) -> float:
    """``-α1|∇u|² - α2|∇v|² + 2λ M - β(N - r(N-4)/2) K``; zero at every solution."""
    t = evaluate_terms(p, params)
    N, r = params.dimension, params.r
    return -t.weighted_gradient(params) + 2.0 * lam * t.total_mass - params.beta * (N - r * (N - 4) / 2.0) * t.coupling


def dilate_pair(p: StatePair, s: float) -> StatePair:
    return StatePair(dilate(p.u, s), dilate(p.v, s))


def psi_closed_form(terms: Terms, params: SystemParams, s):
    """Energy along the dilation fiber, from the s = 0 integrals."""
    s = np.asarray(s, dtype=float)
    rg = params.r * params.gamma_r
    out = (
        0.5 * np.exp(4 * s) * terms.bending
        - 0.5 * np.exp(2 * s) * terms.weighted_gradient(params)
        - params.beta * np.exp(2 * rg * s) * terms.coupling
    )
    return float(out) if out.ndim == 0 else out


def psi_by_dilation(p: StatePair, params: SystemParams, s: float) -> float:
    return energy_I(dilate_pair(p, s), params)
