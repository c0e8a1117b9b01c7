"""Explicit monotone grid solver for the nonlocal HJB equation.

The integro-differential generator splits into central finite differences for
the local part and a quadrature sum for the jump part.  Point-mass measures
use their atoms as exact quadrature; exponential tails use Gauss-Laguerre per
side, which reproduces polynomial moments exactly up to twice the rule order.

Marching is explicit backward from the terminal cost with the control
minimized pointwise per step.  A CFL bound computed from sampled coefficient
bounds keeps the explicit step a positive-coefficient (monotone) update away
from the extension region; the solver refuses to run above it.

Off-grid lookups use linear extension with the slope clamped at each slice's
fitted Lipschitz constant, so evaluation is globally Lipschitz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control_value import ControlProblem
from .levy_model import KIND_NONE, KIND_POINT, KIND_TWO_EXP, LevyModel
from .teugels_basis import OrthoBasis, eval_p


class CflError(RuntimeError):
    """Raised when a requested step count violates the stability bound."""


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    n_nodes: int

    def __post_init__(self) -> None:
        if self.n_nodes < 3:
            raise ValueError("grid needs at least 3 nodes")
        if self.x_max <= self.x_min:
            raise ValueError("grid needs x_max > x_min")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_nodes - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_nodes)

    def refined(self) -> "SpatialGrid":
        """Same span with the spacing halved."""
        return SpatialGrid(self.x_min, self.x_max, 2 * self.n_nodes - 1)


@dataclass
class GridFunction:
    """Node values plus a Lipschitz clamp for off-grid linear extension."""

    grid: SpatialGrid
    values: np.ndarray
    slope_bound: float

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError("values must match the grid size")

    @staticmethod
    def from_values(grid: SpatialGrid, values: np.ndarray,
                    slope_bound: float | None = None) -> "GridFunction":
        """slope_bound defaults to the fitted Lipschitz constant of the values."""
        values = np.asarray(values, dtype=np.float64)
        if slope_bound is None:
            slope_bound = float(np.max(np.abs(np.diff(values)))) / grid.h
        return GridFunction(grid=grid, values=values, slope_bound=slope_bound)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        nodes = self.grid.nodes
        out = np.interp(x, nodes, self.values)
        h = self.grid.h
        lo = np.clip((self.values[1] - self.values[0]) / h,
                     -self.slope_bound, self.slope_bound)
        hi = np.clip((self.values[-1] - self.values[-2]) / h,
                     -self.slope_bound, self.slope_bound)
        below = x < nodes[0]
        above = x > nodes[-1]
        if np.any(below):
            out = np.where(below, self.values[0] + lo * (x - nodes[0]), out)
        if np.any(above):
            out = np.where(above, self.values[-1] + hi * (x - nodes[-1]), out)
        return out

    def dx(self, x) -> np.ndarray:
        """Central difference at grid spacing, through the evaluator."""
        h = self.grid.h
        return (self(x + h) - self(x - h)) / (2.0 * h)

    def d2x(self, x) -> np.ndarray:
        h = self.grid.h
        return (self(x + h) - 2.0 * self(x) + self(x - h)) / (h * h)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights approximating integrals against the jump measure."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, fn_values: np.ndarray) -> np.ndarray:
        """Weighted sum over the rule axis (last axis of fn_values)."""
        return fn_values @ self.weights


def build_quadrature(model: LevyModel, order: int = 16) -> QuadratureRule:
    """Exact atoms for point masses; Gauss-Laguerre per exponential tail."""
    jm = model.jumps
    if jm.kind == KIND_NONE:
        return QuadratureRule(nodes=np.zeros(0), weights=np.zeros(0))
    if jm.kind == KIND_POINT:
        return QuadratureRule(nodes=np.asarray(jm.locations, dtype=np.float64),
                              weights=np.asarray(jm.intensities, dtype=np.float64))
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    gl_nodes, gl_weights = np.polynomial.laguerre.laggauss(order)
    nodes = []
    weights = []
    if jm.p_up > 0.0:
        nodes.append(gl_nodes / jm.alpha)
        weights.append(jm.lam * jm.p_up * gl_weights)
    if jm.p_up < 1.0:
        nodes.append(-gl_nodes / jm.beta)
        weights.append(jm.lam * (1.0 - jm.p_up) * gl_weights)
    return QuadratureRule(nodes=np.concatenate(nodes), weights=np.concatenate(weights))


def quadrature_moment_defect(rule: QuadratureRule, model: LevyModel,
                             i_top: int | None = None) -> float:
    """Worst absolute error of sum w z^i against the measure moments, i <= i_top."""
    if i_top is None:
        i_top = model.i_max
    worst = abs(rule.mass - model.jumps.total_mass)
    for i in range(1, i_top + 1):
        approx = float(np.sum(rule.weights * rule.nodes ** i))
        worst = max(worst, abs(approx - model.jumps.raw_moment(i)))
    return worst


@dataclass(frozen=True)
class HjbConfig:
    n_steps: int = 0          # 0 = auto at half the CFL bound
    quad_order: int = 16
    cfl_safety: float = 0.9
    k_dim: int = 1            # martingale components fed to the driver z-slot
    report_slices: int = 11


@dataclass
class HjbSolution:
    grid: SpatialGrid
    t_report: np.ndarray
    W: np.ndarray            # (R, n_nodes), increasing t
    policy: np.ndarray       # (R, n_nodes), -1 on the terminal slice
    n_steps: int
    dt: float
    dt_max: float
    quad_defect: float

    def slice_fn(self, r: int) -> GridFunction:
        return GridFunction.from_values(self.grid, self.W[r])

    def value_at(self, t: float, x) -> np.ndarray:
        """Linear interpolation in t between reported slices, then in x."""
        r = np.searchsorted(self.t_report, t)
        if r == 0:
            return self.slice_fn(0)(x)
        if r >= len(self.t_report):
            return self.slice_fn(len(self.t_report) - 1)(x)
        t0, t1 = self.t_report[r - 1], self.t_report[r]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        return (1.0 - w) * self.slice_fn(r - 1)(x) + w * self.slice_fn(r)(x)


def generator_Lu(v: GridFunction, x, u: float, problem: ControlProblem,
                 model: LevyModel, quad: QuadratureRule, t: float = 0.0) -> np.ndarray:
    """Levy-type generator: drift and diffusion differences plus the jump quadrature.

    m1 F Dv + (sigma2/2) F^2 D2v + sum_q w_q [v(x + F z_q) - v(x) - Dv F z_q].
    """
    x = np.asarray(x, dtype=np.float64)
    f_coef = np.asarray(problem.forward(t, x, u), dtype=np.float64)
    dv = v.dx(x)
    d2v = v.d2x(x)
    out = model.moment(1) * f_coef * dv + 0.5 * model.sigma2 * f_coef ** 2 * d2v
    if len(quad.nodes):
        vx = v(x)
        shifted = x[..., None] + f_coef[..., None] * quad.nodes
        integrand = v(shifted) - vx[..., None] - dv[..., None] * f_coef[..., None] * quad.nodes
        out = out + quad.integrate(integrand)
    return out


def operator_Luk(v: GridFunction, x, u: float, k: int, problem: ControlProblem,
                 model: LevyModel, basis: OrthoBasis, quad: QuadratureRule,
                 t: float = 0.0) -> np.ndarray:
    """k-th martingale-integrand operator.

    The k = 1 component carries the diffusion gradient F Dv / a11; every
    component integrates the second-order Taylor remainder of v against
    p_k(z) nu(dz).
    """
    if not 1 <= k <= basis.K:
        raise ValueError(f"component {k} outside 1..{basis.K}")
    x = np.asarray(x, dtype=np.float64)
    f_coef = np.asarray(problem.forward(t, x, u), dtype=np.float64)
    dv = v.dx(x)
    out = np.zeros(np.broadcast_shapes(x.shape, dv.shape))
    if k == 1:
        out = out + f_coef * dv / basis.a11
    if len(quad.nodes):
        vx = v(x)
        pk = np.asarray(eval_p(basis, k, quad.nodes))
        shifted = x[..., None] + f_coef[..., None] * quad.nodes
        integrand = v(shifted) - vx[..., None] - dv[..., None] * f_coef[..., None] * quad.nodes
        out = out + integrand @ (quad.weights * pk)
    return out


def hamiltonian(v: GridFunction, x, u: float, problem: ControlProblem,
                model: LevyModel, basis: OrthoBasis, quad: QuadratureRule,
                t: float = 0.0, k_dim: int | None = None) -> np.ndarray:
    """Generator plus running cost with the martingale-integrand z-vector.

    The z argument passed to the driver is truncated at k_dim components;
    Lipschitz-in-z of the driver bounds the truncation effect.
    """
    x = np.asarray(x, dtype=np.float64)
    if k_dim is None:
        k_dim = basis.K
    k_dim = min(k_dim, basis.K)
    gen = generator_Lu(v, x, u, problem, model, quad, t)
    z = np.stack([operator_Luk(v, x, u, k, problem, model, basis, quad, t)
                  for k in range(1, k_dim + 1)], axis=-1)
    y = v(x)
    cost = np.asarray(problem.driver(t, x, y, z, u), dtype=np.float64)
    return gen + cost


def cfl_dt_max(problem: ControlProblem, model: LevyModel, basis: OrthoBasis,
               grid: SpatialGrid, quad: QuadratureRule,
               safety: float = 0.9) -> float:
    """Stability bound for the explicit step from sampled coefficient bounds.

    Bounds the diagonal depletion of the update: diffusion at h^-2, combined
    drift (mean rate plus jump compensator) at h^-1, jump mass and driver
    sensitivities at h^0.  The driver z-sensitivity contributes through the
    gradient part of the first component and the weighted p_k masses.
    """
    f_max = problem.forward.bound_on(grid.x_min, grid.x_max, problem.controls)
    h = grid.h
    abs_jump_mean = float(np.sum(np.abs(quad.weights * quad.nodes))) if len(quad.nodes) else 0.0
    drift_scale = (abs(model.moment(1)) + abs_jump_mean) * f_max
    mass_terms = model.jumps.total_mass + problem.driver.lipschitz_y
    l_z = problem.driver.lipschitz_z
    if l_z > 0.0:
        z_sens = f_max / (basis.a11 * h)
        if len(quad.nodes):
            for k in range(1, basis.K + 1):
                pk = np.asarray(eval_p(basis, k, quad.nodes))
                z_sens = max(z_sens, 2.0 * float(np.sum(np.abs(quad.weights * pk))))
        mass_terms += l_z * z_sens
    denom = model.sigma2 * f_max ** 2 + h * drift_scale + h * h * mass_terms
    if denom <= 0.0:
        return float("inf")
    return safety * h * h / denom


def step_backward(v_next: GridFunction, t0: float, t1: float,
                  problem: ControlProblem, model: LevyModel, basis: OrthoBasis,
                  quad: QuadratureRule, cfg: HjbConfig,
                  dt_max: float | None = None) -> tuple[GridFunction, np.ndarray]:
    """One explicit step: v(t0) = v(t1) + dt min_u H[v(t1)], pointwise argmin.

    Ties pick the lowest control index.  Raises CflError above the bound.
    """
    dt = t1 - t0
    if dt <= 0.0:
        raise ValueError("step must move backward in time")
    if dt_max is None:
        dt_max = cfl_dt_max(problem, model, basis, v_next.grid, quad, cfg.cfl_safety)
    if dt > dt_max * (1.0 + 1e-9):
        raise CflError(f"dt={dt:.3e} violates the stability bound {dt_max:.3e}")
    nodes = v_next.grid.nodes
    n_u = len(problem.controls)
    ham = np.empty((n_u, len(nodes)))
    for ui, u in enumerate(problem.controls):
        ham[ui] = hamiltonian(v_next, nodes, float(u), problem, model, basis,
                              quad, t=t0, k_dim=cfg.k_dim)
    pick = np.argmin(ham, axis=0)
    values = v_next.values + dt * ham[pick, np.arange(len(nodes))]
    return GridFunction.from_values(v_next.grid, values), pick


def _auto_steps(horizon: float, dt_max: float) -> int:
    """Step count at half the stability bound.

    The half margin keeps a refinement that halves both h and dt stable,
    since dt_max(h/2) is at least dt_max(h)/4.
    """
    if not np.isfinite(dt_max):
        return 1
    return max(1, int(np.ceil(horizon / (0.5 * dt_max))))


def solve(problem: ControlProblem, model: LevyModel, basis: OrthoBasis,
          grid: SpatialGrid, cfg: HjbConfig) -> HjbSolution:
    """March the explicit scheme from the terminal cost back to t = 0."""
    quad = build_quadrature(model, cfg.quad_order)
    defect = quadrature_moment_defect(quad, model)
    dt_max = cfl_dt_max(problem, model, basis, grid, quad, cfg.cfl_safety)
    horizon = problem.horizon
    if cfg.n_steps > 0:
        n_steps = cfg.n_steps
        if horizon / n_steps > dt_max * (1.0 + 1e-9):
            raise CflError(
                f"n_steps={n_steps} gives dt={horizon / n_steps:.3e} above the "
                f"stability bound {dt_max:.3e}; need at least "
                f"{int(np.ceil(horizon / dt_max))} steps")
    else:
        n_steps = _auto_steps(horizon, dt_max)
    dt = horizon / n_steps
    report_idx = np.unique(np.linspace(0, n_steps, min(cfg.report_slices, n_steps + 1))
                           .round().astype(int))
    keep: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    v = GridFunction.from_values(grid, np.asarray(problem.terminal(grid.nodes)))
    if n_steps in report_idx:
        keep[n_steps] = (v.values.copy(), np.full(grid.n_nodes, -1, dtype=int))
    for s in range(n_steps, 0, -1):
        t1 = s * dt
        t0 = (s - 1) * dt
        v, pick = step_backward(v, t0, t1, problem, model, basis, quad, cfg, dt_max)
        if (s - 1) in report_idx:
            keep[s - 1] = (v.values.copy(), pick.copy())

    order = sorted(keep)
    w = np.stack([keep[i][0] for i in order])
    pol = np.stack([keep[i][1] for i in order])
    t_report = np.array([i * dt for i in order])
    return HjbSolution(grid=grid, t_report=t_report, W=w, policy=pol,
                       n_steps=n_steps, dt=dt, dt_max=dt_max, quad_defect=defect)


@dataclass
class ConvergenceRow:
    h: float
    dt: float
    error: float


def convergence_study(problem: ControlProblem, model: LevyModel, basis: OrthoBasis,
                      grid: SpatialGrid, cfg: HjbConfig, oracle=None,
                      window: tuple[float, float] | None = None
                      ) -> tuple[list[ConvergenceRow], HjbSolution, HjbSolution]:
    """Solve at (h, dt) and (h/2, dt/2) and report max errors at t = 0.

    With an oracle callable (x -> W(0, x)) both levels report error against
    it; without one, the base level reports its deviation from the refined
    solution and the refined level gets no row.  Errors are maxima over the
    window (defaults to the middle half of the grid).
    """
    if cfg.n_steps > 0:
        base_cfg = cfg
    else:
        quad = build_quadrature(model, cfg.quad_order)
        dt_max = cfl_dt_max(problem, model, basis, grid, quad, cfg.cfl_safety)
        base_cfg = HjbConfig(n_steps=_auto_steps(problem.horizon, dt_max),
                             quad_order=cfg.quad_order, cfl_safety=cfg.cfl_safety,
                             k_dim=cfg.k_dim, report_slices=cfg.report_slices)
    base = solve(problem, model, basis, grid, base_cfg)
    fine_grid = grid.refined()
    fine_cfg = HjbConfig(n_steps=2 * base.n_steps, quad_order=cfg.quad_order,
                         cfl_safety=cfg.cfl_safety, k_dim=cfg.k_dim,
                         report_slices=cfg.report_slices)
    fine = solve(problem, model, basis, fine_grid, fine_cfg)

    if window is None:
        span = grid.x_max - grid.x_min
        window = (grid.x_min + 0.25 * span, grid.x_max - 0.25 * span)
    nodes = grid.nodes
    mask = (nodes >= window[0]) & (nodes <= window[1])
    rows: list[ConvergenceRow] = []
    if oracle is not None:
        truth = np.asarray(oracle(nodes[mask]))
        err_base = float(np.max(np.abs(base.W[0][mask] - truth)))
        fine_nodes = fine_grid.nodes
        fmask = (fine_nodes >= window[0]) & (fine_nodes <= window[1])
        err_fine = float(np.max(np.abs(fine.W[0][fmask] - np.asarray(oracle(fine_nodes[fmask])))))
        rows.append(ConvergenceRow(h=grid.h, dt=base.dt, error=err_base))
        rows.append(ConvergenceRow(h=fine_grid.h, dt=fine.dt, error=err_fine))
    else:
        ref = fine.slice_fn(0)(nodes[mask])
        err_base = float(np.max(np.abs(base.W[0][mask] - ref)))
        rows.append(ConvergenceRow(h=grid.h, dt=base.dt, error=err_base))
    return rows, base, fine


