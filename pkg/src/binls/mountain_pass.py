"""Mass-supercritical geometry and saddle search.

For ``r > 2 + 8/N`` the energy is unbounded below on the mass sphere, and the
candidate solutions are saddles.  The barrier is read off the scalar function::

    h(t) = t²/2 - D2 ρ t / 2 - D1 β ρ^{r(1-γ)} t^{rγ}

which bounds the energy from below on pairs with ``|Δu|² + |Δv|² = t²``.

The saddle search minimizes the fiber maximum ``F(p) = max_s I(s∗p)`` over
the mass sphere.  Each step takes the maximum along the dilation fiber
(``dΨ/ds = P`` there), then a preconditioned descent step on ``F``.  By the
envelope theorem the gradient of ``F`` is the energy gradient at the fiber
maximizer, and it is orthogonal to the dilation direction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import model
from .constants import DomainError, ThresholdSet, extremal_pair
from .ground_state import SolveStatus, project_to_sphere
from .model import StatePair, SystemParams, Terms
from .spectral import GridSpec, spectrum

log = logging.getLogger(__name__)

__all__ = [
    "GeometryReport",
    "SaddleConfig",
    "SaddleReport",
    "EndpointError",
    "BracketError",
    "geometry_h",
    "bracket_roots_h",
    "build_endpoints",
    "dilation_path_critical",
    "saddle_search",
    "bending_lower_bound",
]


class EndpointError(RuntimeError):
    """The dilation sweep found no admissible endpoint."""


class BracketError(RuntimeError):
    """The Pohozaev functional does not change sign on the requested interval."""


def _check_supercritical(params: SystemParams):
    if not params.r > params.r_bar:
        raise DomainError(f"mountain-pass geometry requires r > {params.r_bar}, got r={params.r}")


def _coefficient(params: SystemParams, th: ThresholdSet) -> float:
    return th.D1 * params.beta * params.rho ** (params.r * (1.0 - params.gamma_r))


def geometry_h(t, params: SystemParams, thresholds: ThresholdSet):
    _check_supercritical(params)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("h is defined for t >= 0")
    rg = params.r * params.gamma_r
    out = 0.5 * t**2 - 0.5 * thresholds.D2 * params.rho * t - _coefficient(params, thresholds) * t**rg
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GeometryReport:
    R0: float | None
    R1: float | None
    t_bar: float
    h_max: float
    feasible: bool

    def to_dict(self) -> dict:
        return {"R0": self.R0, "R1": self.R1, "t_bar": self.t_bar, "h_max": self.h_max, "feasible": self.feasible}


def bracket_roots_h(params: SystemParams, thresholds: ThresholdSet) -> GeometryReport:
    _check_supercritical(params)
    rg = params.r * params.gamma_r
    a = _coefficient(params, thresholds)
    t_bar = (1.0 / (2.0 * a * (rg - 1.0))) ** (1.0 / (rg - 2.0))

    def h(t):
        return geometry_h(t, params, thresholds)

    hi = 2.0 * t_bar
    while h(hi) >= 0:
        hi *= 2.0
    res = optimize.minimize_scalar(lambda t: -h(t), bounds=(0.0, hi), method="bounded", options={"xatol": 1e-12 * hi})
    t_max = float(res.x)
    h_max = max(h(t_max), h(t_bar))
    if not h(t_bar) > 0:
        return GeometryReport(R0=None, R1=None, t_bar=t_bar, h_max=h_max, feasible=False)
    xtol = 1e-300  # rtol governs; an absolute tolerance tied to hi would swamp R0
    R0 = optimize.brentq(h, 1e-300, t_bar, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500) if h(1e-300) < 0 else 0.0
    R0 = _polish_root(h, R0, t_bar, below=True)
    R1 = optimize.brentq(h, t_bar, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    R1 = _polish_root(h, R1, t_bar, below=False)
    return GeometryReport(R0=R0, R1=R1, t_bar=t_bar, h_max=h_max, feasible=True)


def _polish_root(h, root: float, t_bar: float, below: bool) -> float:
    # keep the root on the h <= 0 side so that the A_ρ checks are strict
    step = math.ulp(root)
    for _ in range(64):
        if h(root) <= 0:
            break
        root = root - step if below else root + step
    return root


def bending_lower_bound(params: SystemParams, thresholds: ThresholdSet) -> float:
    """Lower bound of ``|Δu|² + |Δv|²`` at a positive-level stationary point on the Pohozaev set."""
    _check_supercritical(params)
    rg = params.r * params.gamma_r
    return (1.0 / (2.0 * params.beta * (rg - 1.0) * _coefficient(params, thresholds) / params.beta)) ** (
        2.0 / (rg - 2.0)
    )


def build_endpoints(
    params: SystemParams,
    grid: GridSpec,
    geometry: GeometryReport,
    profile: StatePair | None = None,
    s_step: float = 0.05,
    max_steps: int = 2000,
) -> tuple[StatePair, StatePair]:
    """Two dilations of one profile: inside ``A_ρ`` and beyond ``R1``, both with negative energy.

    The endpoints live on dilated boxes (the dilation is exact), so their
    masses equal ``ρ²`` to round-off.
    """
    if not geometry.feasible:
        raise EndpointError("geometry is not feasible; no barrier separates the endpoints")
    if profile is None:
        profile = _coupled_gaussian(params, grid)
    p = project_to_sphere(profile, params.rho)
    R0sq, R1sq = geometry.R0**2, geometry.R1**2

    def ok0(s):
        q = model.dilate_pair(p, s)
        tt = model.evaluate_terms(q, params)
        return (tt.bending < R0sq and tt.energy(params) < 0), q, tt

    def ok1(s):
        q = model.dilate_pair(p, s)
        tt = model.evaluate_terms(q, params)
        return (tt.bending > R1sq and tt.energy(params) < 0), q, tt

    end0 = end1 = None
    for k in range(max_steps):
        good, q, tt = ok0(-k * s_step)
        if good:
            end0 = q
            break
    if end0 is None:
        raise EndpointError(f"no s <= 0 found with bending < R0² = {R0sq:.6g} and I < 0 (last bending {tt.bending:.6g}, I {tt.energy(params):.6g})")
    for k in range(max_steps):
        good, q, tt = ok1(k * s_step)
        if good:
            end1 = q
            break
    if end1 is None:
        raise EndpointError(f"no s >= 0 found with bending > R1² = {R1sq:.6g} and I < 0 (last bending {tt.bending:.6g}, I {tt.energy(params):.6g})")
    return end0, end1


def _coupled_gaussian(params: SystemParams, grid: GridSpec) -> StatePair:
    u = np.exp(-grid.radius_sq() / (grid.box_length / 8) ** 2)
    return StatePair.from_arrays(grid, u, math.sqrt(params.r2 / params.r1) * u)


# ---------------------------------------------------------------- fiber maximum

def _fiber(terms: Terms, params: SystemParams):
    A = terms.bending
    B = terms.weighted_gradient(params)
    K = terms.coupling
    rg = params.r * params.gamma_r
    beta = params.beta

    def psi(s):
        return 0.5 * math.exp(4 * s) * A - 0.5 * math.exp(2 * s) * B - beta * math.exp(2 * rg * s) * K

    def dpsi(s):
        # = P(s∗p)
        return 2.0 * math.exp(4 * s) * A - math.exp(2 * s) * B - 2.0 * beta * rg * math.exp(2 * rg * s) * K

    return psi, dpsi


def _fiber_max(terms: Terms, params: SystemParams, s_lo: float, s_hi: float, samples: int = 401, grow: bool = False):
    psi, dpsi = _fiber(terms, params)
    for _ in range(8):
        grid_s = np.linspace(s_lo, s_hi, samples)
        vals = np.array([psi(s) for s in grid_s])
        i = int(np.argmax(vals))
        if not grow or 0 < i < samples - 1:
            break
        # maximum on the window edge: recentre and widen
        w = s_hi - s_lo
        s_lo, s_hi = grid_s[i] - w, grid_s[i] + w
    # bracket a + to - sign change of dΨ/ds around the sampled maximum
    lo = grid_s[max(i - 1, 0)]
    hi = grid_s[min(i + 1, samples - 1)]
    if not (dpsi(lo) > 0 > dpsi(hi)):
        raise BracketError(f"P(s∗p) has no +/- sign change near the sampled maximum in [{s_lo}, {s_hi}]")
    s_star = optimize.brentq(dpsi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return s_star, psi(s_star)


def dilation_path_critical(p: StatePair, params: SystemParams, s_lo: float, s_hi: float) -> tuple[float, float]:
    """Maximizer of ``Ψ(s) = I(s∗p)`` on ``[s_lo, s_hi]`` from a root of ``P(s∗p)``."""
    if not s_lo < s_hi:
        raise ValueError("need s_lo < s_hi")
    terms = model.evaluate_terms(p, params)
    return _fiber_max(terms, params, s_lo, s_hi)


# ---------------------------------------------------------------- saddle search

@dataclass(frozen=True)
class SaddleConfig:
    max_iters: int = 2000
    el_tol: float = 1e-5
    pohozaev_tol: float = 1e-5
    armijo_c: float = 1e-4
    step_shrink: float = 0.5
    step_init: float = 1.0
    precond_shift: float = 0.1
    s_window: float = 3.0
    profile: str = "coupled-gaussian"  # or "gn-extremal"
    seed_width: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.el_tol > 0 and self.pohozaev_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.armijo_c < 1 or not 0 < self.step_shrink < 1:
            raise ValueError("armijo_c and step_shrink must lie in (0, 1)")
        if self.profile not in ("coupled-gaussian", "gn-extremal"):
            raise ValueError(f"unknown profile {self.profile!r}")


@dataclass
class SaddleReport:
    status: SolveStatus
    level: float
    lam: float
    pohozaev_residual: float
    el_residual: float
    s_star: float
    state: StatePair | None = field(repr=False)
    lambda_bound_ok: bool
    accepted: bool
    coupling: float
    bending: float
    iterations: int
    path_max_upper: float
    pohozaev_identity_residual: float = math.nan
    level_history: list[float] = field(default_factory=list, repr=False)
    red_flag: str = ""

    @property
    def lambda_(self) -> float:
        return self.lam

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "accepted": self.accepted,
            "level": self.level,
            "lambda": self.lam,
            "lambda_bound_ok": self.lambda_bound_ok,
            "pohozaev_residual": self.pohozaev_residual,
            "pohozaev_identity_residual": self.pohozaev_identity_residual,
            "el_residual": self.el_residual,
            "s_star": self.s_star,
            "coupling": self.coupling,
            "bending": self.bending,
            "iterations": self.iterations,
            "path_max_upper": self.path_max_upper,
            "red_flag": self.red_flag,
        }


class _Fiber:
    """Fiber-max functional F on the sphere of one fixed grid."""

    def __init__(self, grid: GridSpec, params: SystemParams, config: SaddleConfig):
        self.grid = grid
        self.params = params
        self.sp = spectrum(grid)
        self.dV = grid.cell_volume
        self.rho2 = params.rho**2
        self.config = config
        self.rg = params.r * params.gamma_r

    def dot(self, a, b) -> float:
        return float((np.sum(a[0] * b[0]) + np.sum(a[1] * b[1])) * self.dV)

    def project(self, x):
        m = self.dot(x, x)
        c = math.sqrt(self.rho2 / m)
        return (x[0] * c, x[1] * c)

    def evaluate(self, x):
        """``(F, s*, terms, grad F)`` with the gradient taken at the fiber maximizer."""
        prm, sp = self.params, self.sp
        u, v = x
        uh, vh = sp.forward(u), sp.forward(v)
        terms = model._terms_from_arrays(u, v, self.grid, prm, uh, vh)
        w = self.config.s_window
        s_star, F = _fiber_max(terms, prm, -w, w, grow=True)
        ea, eb, ek = math.exp(4 * s_star), math.exp(2 * s_star), math.exp(2 * self.rg * s_star)
        lin_u = sp.inverse((ea * sp.k4 - eb * prm.alpha1 * sp.k2) * uh)
        lin_v = sp.inverse((ea * sp.k4 - eb * prm.alpha2 * sp.k2) * vh)
        au, av = np.abs(u), np.abs(v)
        pu, pv = au**prm.r1, av**prm.r2
        gu = lin_u - ek * prm.beta * prm.r1 * np.sign(u) * au ** (prm.r1 - 1.0) * pv
        gv = lin_v - ek * prm.beta * prm.r2 * np.sign(v) * av ** (prm.r2 - 1.0) * pu
        return F, s_star, terms, (gu, gv)

    def precondition(self, g, s_star: float, lam: float):
        a = self.params.max_alpha
        shift = max(self.config.precond_shift, lam - 0.25 * a * a)
        k2 = math.exp(2 * s_star) * self.sp.k2
        pinv = 1.0 / (shift + (k2 - 0.5 * a) ** 2)
        sp = self.sp
        return (sp.inverse(pinv * sp.forward(g[0])), sp.inverse(pinv * sp.forward(g[1])))


def _axpy(a, x, y):
    return (y[0] + a * x[0], y[1] + a * x[1])


def _seed(params: SystemParams, grid: GridSpec, config: SaddleConfig, thresholds: ThresholdSet | None, geometry):
    if config.profile == "gn-extremal":
        if thresholds is None or thresholds.C_gn_extremal is None:
            raise ValueError("profile 'gn-extremal' needs thresholds carrying the extremal field")
        ext = thresholds.C_gn_extremal
        if ext.grid != grid:
            raise ValueError("the extremal must live on the saddle-search grid")
        p = extremal_pair(ext, params)
    else:
        width = config.seed_width
        if width is None:
            # bending of a Gaussian pair of width σ is about c_N ρ²/σ⁴; aim at the
            # scale t̄ of the barrier so that the fiber maximum starts near s = 0
            width = grid.box_length / 8
            if geometry is not None and geometry.t_bar > 0:
                N = grid.dimension
                c_N = N * (N + 2.0)  # σ⁴ |Δg|²/|g|² for g = exp(-|x|²/σ²)
                width = min(width, (c_N * params.rho**2 / geometry.t_bar**2) ** 0.25)
        u = np.exp(-grid.radius_sq() / width**2)
        p = StatePair.from_arrays(grid, u, math.sqrt(params.r2 / params.r1) * u)
    return project_to_sphere(p, params.rho)


def saddle_search(
    params: SystemParams,
    grid: GridSpec,
    config: SaddleConfig | None = None,
    thresholds: ThresholdSet | None = None,
    callback=None,
) -> SaddleReport:
    """Mountain-pass candidate by descent of the fiber maximum on the mass sphere.

    The returned state is the fiber maximizer ``s*∗p``; it lives on the box of
    length ``e^{-s*} L``.
    """
    _check_supercritical(params)
    config = SaddleConfig() if config is None else config
    geometry = None
    red = ""
    if thresholds is not None:
        geometry = bracket_roots_h(params, thresholds)
        if thresholds.c_star is not None and thresholds.c_lower_star is not None:
            if not params.beta * params.rho ** (params.r - 2) < min(thresholds.c_star, thresholds.c_lower_star):
                log.warning("smallness condition on beta*rho^(r-2) fails; the lambda bound is not guaranteed")

    p0 = _seed(params, grid, config, thresholds, geometry)
    prob = _Fiber(grid, params, config)
    x = prob.project((p0.u.samples.copy(), p0.v.samples.copy()))
    F, s_star, terms, g = prob.evaluate(x)
    upper = F
    history = [F]
    step = config.step_init
    d = z_prev = r_prev = None
    status = SolveStatus.MAX_ITERS
    it = 0
    stall = 0
    a_max = params.max_alpha

    for it in range(1, config.max_iters + 1):
        lam_x = -prob.dot(g, x) / prob.rho2
        r = _axpy(lam_x, x, g)
        el = math.sqrt(prob.dot(r, r))
        # dilation is an L² isometry, so el is also the residual of s*∗p;
        # stop with a margin below the acceptance tolerance
        if el <= 0.5 * config.el_tol * (1.0 + abs(F)):
            status = SolveStatus.CONVERGED
            it -= 1
            break
        z = prob.precondition(r, s_star, lam_x)
        z = _axpy(-prob.dot(z, x) / prob.rho2, x, z)
        steepest = True
        if d is not None:
            beta_pr = max(0.0, prob.dot(r, _axpy(-1.0, z_prev, z)) / prob.dot(r_prev, z_prev))
            dn = _axpy(beta_pr, d, (-z[0], -z[1]))
            dn = _axpy(-prob.dot(dn, x) / prob.rho2, x, dn)
            if prob.dot(g, dn) < 0:
                d, steepest = dn, False
            else:
                d = (-z[0], -z[1])
        else:
            d = (-z[0], -z[1])
        slope = prob.dot(g, d)
        accepted = False
        while step > 1e-16:
            xt = prob.project(_axpy(step, d, x))
            try:
                Ft, st, tt, gt = prob.evaluate(xt)
            except BracketError:
                step *= config.step_shrink
                continue
            if Ft <= F + config.armijo_c * step * slope:
                accepted = True
                break
            step *= config.step_shrink
        if not accepted:
            if not steepest:
                d = None
                step = config.step_init
                continue
            log.info("saddle line search stalled at iteration %d (el=%.3e)", it, el)
            break
        stall = stall + 1 if Ft >= F else 0
        if stall >= 25:
            break
        x, F, s_star, terms, g = xt, Ft, st, tt, gt
        history.append(F)
        z_prev, r_prev = z, r
        step = min(step * 2.0, 1e6 * config.step_init)
        if callback is not None:
            callback(it, F, el)

    p = StatePair.from_arrays(grid, x[0], x[1])
    state = model.dilate_pair(p, s_star)
    t_final = model.evaluate_terms(state, params)
    level = t_final.energy(params)
    lam = model._multiplier(t_final, params)
    el_res = model.euler_lagrange_residual(state, params, lam)
    P = model.pohozaev_P(state, params, t_final)
    pid = model.pohozaev_identity_residual(state, params, lam)
    lam_ok = lam > 0.25 * a_max**2
    el_ok = el_res <= config.el_tol * (1.0 + abs(level))
    p_ok = abs(P) <= config.pohozaev_tol * (1.0 + t_final.bending)
    if status is SolveStatus.CONVERGED and not el_ok:
        status = SolveStatus.MAX_ITERS
    accepted = bool(el_ok and p_ok and level > 0 and t_final.coupling > 0)
    if accepted and status is not SolveStatus.CONVERGED:
        status = SolveStatus.CONVERGED
    if accepted and thresholds is not None and thresholds.c_star is not None:
        small = params.beta * params.rho ** (params.r - 2) < min(thresholds.c_star, thresholds.c_lower_star)
        if small and not lam_ok:
            red = "lambda <= max(alpha^2)/4 under the smallness condition: inconsistent with compactness"
            log.error(red)
    return SaddleReport(
        status=status,
        level=level,
        lam=lam,
        pohozaev_residual=P,
        el_residual=el_res,
        s_star=s_star,
        state=state,
        lambda_bound_ok=lam_ok,
        accepted=accepted,
        coupling=t_final.coupling,
        bending=t_final.bending,
        iterations=it,
        path_max_upper=upper,
        pohozaev_identity_residual=pid,
        level_history=history,
        red_flag=red,
    )
