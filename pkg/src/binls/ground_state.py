"""Mass-constrained minimization of the energy over the sphere ``|u|² + |v|² = ρ²``.

The minimizer is a projected, preconditioned nonlinear conjugate-gradient
descent with Armijo backtracking.  On termination the state is classified:
a critical point whose energy sits at the coupling-free level ``m^J`` with a
negligible coupling integral is reported as vanishing (on a torus, vanishing
shows up as spreading over the whole box rather than escaping to infinity).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import model
from .model import StatePair, SystemParams
from .spectral import GridSpec, spectrum

log = logging.getLogger(__name__)

__all__ = [
    "SolveConfig",
    "SolveStatus",
    "SolveReport",
    "Guard",
    "project_to_sphere",
    "coercivity_guard",
    "init_strategies",
    "STRATEGIES",
    "minimize_ground_state",
    "best_of_restarts",
    "dichotomy_scan",
    "ScanRow",
    "ScanResult",
    "restart_plan",
]


@dataclass(frozen=True)
class SolveConfig:
    step_init: float = 1.0
    armijo_c: float = 1e-4
    step_shrink: float = 0.5
    grad_tol: float = 1e-7
    max_iters: int = 20000
    vanish_energy_eps: float = 1e-4
    vanish_coupling_eps: float = 1e-3
    seed: int = 0
    preconditioner: str = "shifted"
    precond_shift: float = 0.1
    conjugate: bool = True
    restarts_seeds: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        if not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.vanish_energy_eps > 0 and self.vanish_coupling_eps > 0):
            raise ValueError("vanishing thresholds must be positive")


class SolveStatus(str, enum.Enum):
    CONVERGED = "Converged"
    VANISHING = "Vanishing"
    MAX_ITERS = "MaxIters"
    UNBOUNDED_BELOW = "UnboundedBelow"


class Guard(str, enum.Enum):
    COERCIVE = "Coercive"
    CRITICAL_CAP_EXCEEDED = "CriticalCapExceeded"
    SUPERCRITICAL = "Supercritical"


@dataclass
class SolveReport:
    status: SolveStatus
    energy: float
    lam: float
    mass_u: float
    mass_v: float
    pohozaev_residual: float
    el_residual: float
    iterations: int
    energy_history: list[float] = field(repr=False)
    final_state: StatePair | None = field(default=None, repr=False)
    mj_value: float = math.nan
    coupling: float = math.nan
    bending: float = math.nan
    strategy: str = ""
    seed: int = 0
    decrease_bounds: list[float] = field(default_factory=list, repr=False)

    @property
    def lambda_(self) -> float:
        return self.lam

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "energy": self.energy,
            "mj_value": self.mj_value,
            "lambda": self.lam,
            "mass_u": self.mass_u,
            "mass_v": self.mass_v,
            "pohozaev_residual": self.pohozaev_residual,
            "el_residual": self.el_residual,
            "iterations": self.iterations,
            "coupling": self.coupling,
            "strategy": self.strategy,
            "seed": self.seed,
        }


def project_to_sphere(p: StatePair, rho: float) -> StatePair:
    total = p.total_mass
    if total <= 0:
        raise ValueError("cannot project the zero pair onto the mass sphere")
    return p.scaled(rho / math.sqrt(total))


def coercivity_guard(params: SystemParams, thresholds) -> Guard:
    r, r_bar = params.r, params.r_bar
    if math.isclose(r, r_bar, rel_tol=1e-12):
        return Guard.COERCIVE if params.rho < thresholds.mass_critical_cap else Guard.CRITICAL_CAP_EXCEEDED
    return Guard.COERCIVE if r < r_bar else Guard.SUPERCRITICAL


# ---------------------------------------------------------------- seeds

STRATEGIES = ("coupled-gaussian", "modulated-packet", "random-bandlimited")


def _gaussian(grid: GridSpec, width: float) -> np.ndarray:
    return np.exp(-grid.radius_sq() / width**2)


def init_strategies(grid: GridSpec, params: SystemParams, strategy: str, seed: int = 0, width: float | None = None) -> StatePair:
    """Initial pair on the mass sphere.

    ``coupled-gaussian`` uses ``v = sqrt(r2/r1) u`` (the equality case of the
    coupling bound), ``modulated-packet`` a Gaussian envelope on the carrier
    ``|ξ|² = α1/2`` that minimizes the coupling-free energy, and
    ``random-bandlimited`` smooth random data drawn from ``seed``.
    """
    width = grid.box_length / 8 if width is None else width
    ratio = math.sqrt(params.r2 / params.r1)
    if strategy == "coupled-gaussian":
        u = _gaussian(grid, width)
        v = ratio * u
    elif strategy == "modulated-packet":
        env = _gaussian(grid, width)
        k = math.sqrt(params.max_alpha / 2.0)
        # radial carrier in N > 1 keeps the seed symmetric
        carrier = np.cos(k * np.sqrt(grid.radius_sq()))
        u = env * carrier
        v = ratio * u
    elif strategy == "random-bandlimited":
        rng = np.random.default_rng(seed)
        u = random_bandlimited(grid, rng, cutoff=2.0 * math.sqrt(params.max_alpha / 2.0) + 1.0)
        v = random_bandlimited(grid, rng, cutoff=2.0 * math.sqrt(params.max_alpha / 2.0) + 1.0)
        env = _gaussian(grid, width)
        u, v = u * env, v * env
    else:
        raise ValueError(f"unknown init strategy {strategy!r}; choose from {STRATEGIES}")
    return project_to_sphere(StatePair.from_arrays(grid, u, v), params.rho)


def random_bandlimited(grid: GridSpec, rng: np.random.Generator, cutoff: float) -> np.ndarray:
    sp = spectrum(grid)
    shape = sp.k2.shape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coeffs[sp.k2 > cutoff**2] = 0.0
    return sp.inverse(coeffs)


# ---------------------------------------------------------------- solver

class _Problem:
    """Array-level energy, gradient and tangent geometry of one minimization."""

    def __init__(self, grid: GridSpec, params: SystemParams, config: SolveConfig):
        self.grid = grid
        self.params = params
        self.dV = grid.cell_volume
        self.sp = spectrum(grid)
        self.rho2 = params.rho**2
        self.kind = config.preconditioner
        self.floor = config.precond_shift
        self.shift = None
        self.pinv = None
        if self.kind == "bilaplacian":
            self.pinv = 1.0 / (self.floor + self.sp.k4)

    def update_shift(self, lam: float):
        """Track the Hessian symbol ``(|ξ|² - α/2)² + λ - α²/4`` of the shifted operator."""
        if self.kind != "shifted":
            return
        a = self.params.max_alpha
        shift = max(self.floor, lam - 0.25 * a * a)
        if self.shift is None or abs(shift - self.shift) > 0.1 * self.shift:
            self.shift = shift
            self.pinv = 1.0 / (shift + (self.sp.k2 - 0.5 * a) ** 2)

    def dot(self, a, b) -> float:
        return float((np.sum(a[0] * b[0]) + np.sum(a[1] * b[1])) * self.dV)

    def project(self, x):
        m = float((np.sum(x[0] ** 2) + np.sum(x[1] ** 2)) * self.dV)
        c = math.sqrt(self.rho2 / m)
        return (x[0] * c, x[1] * c)

    def evaluate(self, x):
        terms, gu, gv = model.energy_and_gradient_arrays(x[0], x[1], self.grid, self.params)
        return terms, (gu, gv)

    def precondition(self, g):
        if self.pinv is None:
            return g
        sp = self.sp
        return (sp.inverse(self.pinv * sp.forward(g[0])), sp.inverse(self.pinv * sp.forward(g[1])))


def _axpy(a, x, y):
    return (y[0] + a * x[0], y[1] + a * x[1])


def minimize_ground_state(
    params: SystemParams,
    grid: GridSpec,
    config: SolveConfig | None = None,
    init_strategy: str | StatePair = "coupled-gaussian",
    thresholds=None,
    callback=None,
) -> SolveReport:
    """Minimize the energy on the mass sphere from one initial pair.

    ``init_strategy`` is a strategy name understood by :func:`init_strategies`
    or an explicit :class:`StatePair`.  ``thresholds`` (a ``ThresholdSet``) is
    only needed for the mass-critical exponent, where the guard compares ``ρ``
    with the coercivity cap.
    """
    config = SolveConfig() if config is None else config
    if thresholds is not None:
        guard = coercivity_guard(params, thresholds)
    else:
        guard = Guard.SUPERCRITICAL if params.r > params.r_bar + 1e-12 else Guard.COERCIVE
    if guard is not Guard.COERCIVE:
        log.warning("minimization refused: guard returned %s", guard.value)
        return SolveReport(
            status=SolveStatus.UNBOUNDED_BELOW, energy=-math.inf, lam=math.nan, mass_u=math.nan,
            mass_v=math.nan, pohozaev_residual=math.nan, el_residual=math.nan, iterations=0,
            energy_history=[], mj_value=model.mj_value(params),
        )

    if isinstance(init_strategy, StatePair):
        p0 = project_to_sphere(init_strategy, params.rho)
        strategy = "explicit"
    else:
        p0 = init_strategies(grid, params, init_strategy, config.seed)
        strategy = init_strategy

    prob = _Problem(p0.grid, params, config)
    x = prob.project((p0.u.samples.copy(), p0.v.samples.copy()))
    terms, g = prob.evaluate(x)
    energy = terms.energy(params)
    history = [energy]
    bounds = []
    step = config.step_init
    d = None
    z_prev = r_prev = None
    status = SolveStatus.MAX_ITERS
    it = 0
    stall = 0
    scale = lambda e: 1.0 + abs(e)  # noqa: E731

    for it in range(1, config.max_iters + 1):
        lam = -prob.dot(g, x) / prob.rho2
        r = _axpy(lam, x, g)  # tangential gradient = EL residual vector
        prob.update_shift(lam)
        el = math.sqrt(prob.dot(r, r))
        if el <= config.grad_tol * scale(energy):
            status = SolveStatus.CONVERGED
            it -= 1
            break
        z = prob.precondition(r)
        z = _axpy(-prob.dot(z, x) / prob.rho2, x, z)
        if d is not None and config.conjugate:
            beta_pr = max(0.0, prob.dot(r, _axpy(-1.0, z_prev, z)) / prob.dot(r_prev, z_prev))
            d = _axpy(beta_pr, d, (-z[0], -z[1]))
            d = _axpy(-prob.dot(d, x) / prob.rho2, x, d)
            steepest = False
            if prob.dot(g, d) >= 0:
                d = (-z[0], -z[1])
                steepest = True
        else:
            d = (-z[0], -z[1])
            steepest = True
        slope = prob.dot(g, d)  # negative
        accepted = False
        while step > 1e-16:
            xt = prob.project(_axpy(step, d, x))
            tt, gt = prob.evaluate(xt)
            et = tt.energy(params)
            if et <= energy + config.armijo_c * step * slope:
                accepted = True
                break
            step *= config.step_shrink
        if not accepted:
            if not steepest:
                # conjugate direction failed; retry along steepest descent
                d = None
                step = config.step_init
                continue
            log.info("line search stalled at iteration %d (el=%.3e)", it, el)
            break
        stall = stall + 1 if et >= energy else 0
        if stall >= 25:
            log.info("energy stagnated at round-off level at iteration %d (el=%.3e)", it, el)
            break
        bounds.append(-config.armijo_c * step * slope)
        x, g, terms, energy = xt, gt, tt, et
        history.append(energy)
        z_prev, r_prev = z, r
        step = min(step * 2.0, 1e6 * config.step_init)
        if callback is not None:
            callback(it, energy, el)

    final = StatePair.from_arrays(prob.grid, x[0], x[1])
    lam = model._multiplier(terms, params)
    el = model.euler_lagrange_residual(final, params, lam)
    poho = model.pohozaev_identity_residual(final, params, lam)
    mj = model.mj_value(params)
    vanishing = (
        energy <= mj + config.vanish_energy_eps
        and terms.coupling <= config.vanish_coupling_eps * params.rho**params.r
    )
    if vanishing:
        status = SolveStatus.VANISHING
    return SolveReport(
        status=status,
        energy=energy,
        lam=lam,
        mass_u=terms.mass_u,
        mass_v=terms.mass_v,
        pohozaev_residual=poho,
        el_residual=el,
        iterations=it,
        energy_history=history,
        final_state=final,
        mj_value=mj,
        coupling=terms.coupling,
        bending=terms.bending,
        strategy=strategy,
        seed=config.seed,
        decrease_bounds=bounds,
    )


def _run_job(job):
    params, grid, config, strategy, thresholds = job
    rep = minimize_ground_state(params, grid, config, strategy, thresholds)
    return rep


def _map(func, jobs, n_jobs: int):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(func, jobs))


def restart_plan(config: SolveConfig, strategies=STRATEGIES) -> list[tuple[str, int]]:
    """(strategy, seed) pairs of a restart sweep.

    Deterministic seeds do not depend on the seed, so they run once.
    """
    plan = []
    for name in strategies:
        seeds = config.restarts_seeds if name == "random-bandlimited" else config.restarts_seeds[:1]
        plan.extend((name, int(config.seed) + int(k)) for k in seeds)
    return plan


def best_of_restarts(
    params: SystemParams,
    grid: GridSpec,
    config: SolveConfig | None = None,
    strategies=STRATEGIES,
    thresholds=None,
    jobs: int = 1,
) -> tuple[SolveReport, list[SolveReport]]:
    """Run every restart and return ``(best, all_reports)``.

    The best report has the lowest energy; ties go to the lower seed, then to
    the earlier strategy in ``strategies``.
    """
    config = SolveConfig() if config is None else config
    plan = restart_plan(config, strategies)
    work = [(params, grid, replace(config, seed=seed), name, thresholds) for name, seed in plan]
    reports = _map(_run_job, work, jobs)
    order = sorted(range(len(reports)), key=lambda i: (reports[i].energy, reports[i].seed, i))
    return reports[order[0]], reports


@dataclass(frozen=True)
class ScanRow:
    rho: float
    status: str
    energy: float
    mj_value: float
    lam: float
    mass_u: float
    mass_v: float
    pohozaev_residual: float
    el_residual: float
    iterations: int

    COLUMNS = (
        "rho", "status", "energy", "mj_value", "lambda", "mass_u", "mass_v",
        "pohozaev_residual", "el_residual", "iterations",
    )

    @classmethod
    def from_report(cls, rho: float, rep: SolveReport) -> "ScanRow":
        return cls(
            rho=rho, status=rep.status.value, energy=rep.energy, mj_value=rep.mj_value, lam=rep.lam,
            mass_u=rep.mass_u, mass_v=rep.mass_v, pohozaev_residual=rep.pohozaev_residual,
            el_residual=rep.el_residual, iterations=rep.iterations,
        )

    def values(self) -> tuple:
        return (
            self.rho, self.status, self.energy, self.mj_value, self.lam, self.mass_u, self.mass_v,
            self.pohozaev_residual, self.el_residual, self.iterations,
        )


@dataclass
class ScanResult:
    rows: list[ScanRow]
    # (rho, theta*rho, m(theta*rho), theta^2 m(rho), holds) for Converged pairs
    subadditivity: list[tuple[float, float, float, float, bool]]
    reports: list[SolveReport] = field(repr=False, default_factory=list)

    def rho_star_bracket(self) -> tuple[float, float] | None:
        """Largest Vanishing ρ below the smallest Converged ρ, if the scan shows a transition."""
        conv = [row.rho for row in self.rows if row.status == SolveStatus.CONVERGED.value]
        if not conv:
            return None
        lo = [row.rho for row in self.rows if row.status == SolveStatus.VANISHING.value and row.rho < min(conv)]
        return (max(lo), min(conv)) if lo else None


def dichotomy_scan(
    params: SystemParams,
    rho_list,
    grid: GridSpec,
    config: SolveConfig | None = None,
    thresholds=None,
    theta: float = 1.5,
    strategies=STRATEGIES,
    jobs: int = 1,
) -> ScanResult:
    """Best-of-restarts minimization for every ρ, with rows sorted by ρ.

    ``params`` is a template whose ``rho`` is replaced row by row.  Solver
    failures are carried as row status, never raised.
    """
    config = SolveConfig() if config is None else config
    rhos = sorted(float(r) for r in rho_list)
    plan = restart_plan(config, strategies)
    work = [
        (params.with_rho(rho), grid, replace(config, seed=seed), name, thresholds)
        for rho in rhos
        for name, seed in plan
    ]
    flat = _map(_run_job, work, jobs)
    rows, best = [], []
    k = len(plan)
    for i, rho in enumerate(rhos):
        chunk = flat[i * k:(i + 1) * k]
        order = sorted(range(k), key=lambda j: (chunk[j].energy, chunk[j].seed, j))
        rep = chunk[order[0]]
        best.append(rep)
        rows.append(ScanRow.from_report(rho, rep))

    checks = []
    conv = {row.rho: row for row in rows if row.status == SolveStatus.CONVERGED.value}
    for rho, row in conv.items():
        for rho2, row2 in conv.items():
            if math.isclose(rho2, theta * rho, rel_tol=1e-12):
                bound = theta**2 * row.energy
                checks.append((rho, rho2, row2.energy, bound, row2.energy < bound))
    return ScanResult(rows=rows, subadditivity=checks, reports=best)
