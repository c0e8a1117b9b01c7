"""Monte Carlo dynamic programming for controlled forward-backward systems.

The value function W(t, x) = inf over controls of the backward component is
estimated on a (t, x) lattice by backward induction: at each slice and lattice
node, a one-slice forward/backward solve (the backward semigroup applied to
the next slice's estimate) is run per control, and the slice minimum is taken
pointwise with ties resolved to the lowest control index.

Off-lattice evaluation in x is linear interpolation inside the node range and
linear extension outside, with the extension slope clamped to the Lipschitz
constant fitted from the current slice values.  Ensembles share one noise
realization across nodes and controls of a slice (common random numbers), and
all seeds derive from one master seed, so reruns are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bsde_solver import BsdeSolution, BsdeSpec, RegressionConfig, solve_backward
from .coefficients import ControlDriver, ForwardCoefficient, Terminal
from .levy_model import LevyModel
from .path_sim import PathEnsemble, simulate_ensemble
from .teugels_basis import OrthoBasis


@dataclass(frozen=True)
class ControlProblem:
    """Controlled forward coefficient, running cost, terminal cost, control set.

    lipschitz holds the declared constants (state, y, z) used in diagnostics
    and step-size heuristics; verify_lipschitz checks them by sampling.
    """

    forward: ForwardCoefficient
    driver: ControlDriver
    terminal: Terminal
    controls: tuple[float, ...]
    horizon: float
    lipschitz: tuple[float, float, float]

    def __post_init__(self) -> None:
        if not self.controls:
            raise ValueError("control set must be nonempty")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")

    def bsde_spec(self, u: float, terminal) -> BsdeSpec:
        drv = self.driver

        def f(t, x, y, z, _u=u):
            return drv(t, x, y, z, _u)

        return BsdeSpec(terminal=terminal, driver=f,
                        lipschitz_y=drv.lipschitz_y, lipschitz_z=drv.lipschitz_z)


@dataclass(frozen=True)
class ValueLattice:
    t_nodes: np.ndarray
    x_nodes: np.ndarray

    def __post_init__(self) -> None:
        if len(self.t_nodes) < 2 or len(self.x_nodes) < 2:
            raise ValueError("lattice needs at least two time and two space nodes")
        if np.any(np.diff(self.t_nodes) <= 0) or np.any(np.diff(self.x_nodes) <= 0):
            raise ValueError("lattice nodes must be strictly increasing")


@dataclass(frozen=True)
class DpConfig:
    n_paths: int = 20000
    substeps: int = 8
    seed: int = 0
    degree: int = 3


@dataclass
class ValueEstimate:
    t_nodes: np.ndarray
    x_nodes: np.ndarray
    W: np.ndarray        # (n_t, n_x)
    stderr: np.ndarray   # (n_t, n_x)
    policy: np.ndarray   # (n_t, n_x) argmin control index, -1 on the terminal slice

    def slice_fn(self, j: int):
        """Interp/extension evaluator for slice j with fitted Lipschitz clamp."""
        return make_slice_fn(self.x_nodes, self.W[j])

    def fitted_cx(self, j: int) -> float:
        return float(np.max(np.abs(np.diff(self.W[j]) / np.diff(self.x_nodes))))


def make_slice_fn(x_nodes: np.ndarray, values: np.ndarray):
    """Linear interpolation with Lipschitz-clamped linear extension off-grid."""
    slopes = np.diff(values) / np.diff(x_nodes)
    cx = float(np.max(np.abs(slopes))) if len(slopes) else 0.0
    lo_slope = float(np.clip(slopes[0], -cx, cx))
    hi_slope = float(np.clip(slopes[-1], -cx, cx))
    x_lo, x_hi = float(x_nodes[0]), float(x_nodes[-1])
    v_lo, v_hi = float(values[0]), float(values[-1])

    def fn(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.interp(x, x_nodes, values)
        below = x < x_lo
        above = x > x_hi
        if np.any(below):
            out = np.where(below, v_lo + lo_slope * (x - x_lo), out)
        if np.any(above):
            out = np.where(above, v_hi + hi_slope * (x - x_hi), out)
        return out

    return fn


def child_seed(master: int, *key: int) -> int:
    """Deterministic child seed for a slice/control/side tag tuple."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def forward_simulate(problem: ControlProblem, ens: PathEnsemble, x0: float,
                     control_path) -> np.ndarray:
    """Euler state trajectories: X_{s+1} = X_s + F(t_s, X_s, u_s) dL_s.

    The coefficient is frozen at the pre-jump (step start) state, so jumps
    inside a step enter through dL with the left-limit coefficient.
    control_path is a scalar or per-step array.
    """
    n, m = ens.dL.shape
    u_path = np.broadcast_to(np.asarray(control_path, dtype=np.float64), (m,))
    x = np.empty((n, m + 1))
    x[:, 0] = x0
    times = ens.times
    for s in range(m):
        f_val = problem.forward(times[s], x[:, s], u_path[s])
        x[:, s + 1] = x[:, s] + f_val * ens.dL[:, s]
    return x


def semigroup_step(problem: ControlProblem, model: LevyModel, basis: OrthoBasis,
                   u: float, value_next, t0: float, t1: float,
                   x_nodes: np.ndarray, cfg: DpConfig, seed: int,
                   ens: PathEnsemble | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One-slice backward solve from each lattice node under a fixed control.

    value_next maps terminal states to values (next slice estimate or exact
    terminal cost).  Returns per-node values and stderr.  A shared ensemble
    may be passed in to reuse noise across controls.
    """
    if ens is None:
        ens = simulate_ensemble(model, basis, t0, t1, cfg.substeps, cfg.n_paths, seed)
    reg = RegressionConfig(degree=cfg.degree)
    spec = problem.bsde_spec(u, value_next)
    vals = np.empty(len(x_nodes))
    errs = np.empty(len(x_nodes))
    for i, x0 in enumerate(np.asarray(x_nodes, dtype=np.float64)):
        state = forward_simulate(problem, ens, float(x0), u)
        sol = solve_backward(spec, ens, state=state, reg=reg)
        vals[i] = sol.y0
        errs[i] = sol.y0_stderr
    return vals, errs


def value_dp(problem: ControlProblem, model: LevyModel, basis: OrthoBasis,
             lattice: ValueLattice, cfg: DpConfig) -> ValueEstimate:
    """Backward induction over lattice slices; exact terminal, min over controls."""
    t_nodes = np.asarray(lattice.t_nodes, dtype=np.float64)
    x_nodes = np.asarray(lattice.x_nodes, dtype=np.float64)
    n_t, n_x = len(t_nodes), len(x_nodes)
    w = np.zeros((n_t, n_x))
    se = np.zeros((n_t, n_x))
    policy = np.full((n_t, n_x), -1, dtype=int)
    w[-1] = problem.terminal(x_nodes)

    for j in range(n_t - 2, -1, -1):
        if j == n_t - 2:
            value_next = problem.terminal
        else:
            value_next = make_slice_fn(x_nodes, w[j + 1])
        seed_j = child_seed(cfg.seed, j)
        ens = simulate_ensemble(model, basis, float(t_nodes[j]), float(t_nodes[j + 1]),
                                cfg.substeps, cfg.n_paths, seed_j)
        all_vals = np.empty((len(problem.controls), n_x))
        all_errs = np.empty((len(problem.controls), n_x))
        for ui, u in enumerate(problem.controls):
            all_vals[ui], all_errs[ui] = semigroup_step(
                problem, model, basis, float(u), value_next,
                float(t_nodes[j]), float(t_nodes[j + 1]), x_nodes, cfg, seed_j, ens=ens)
        pick = np.argmin(all_vals, axis=0)
        w[j] = all_vals[pick, np.arange(n_x)]
        inherited = float(np.mean(se[j + 1]))
        se[j] = np.sqrt(all_errs[pick, np.arange(n_x)] ** 2 + inherited ** 2)
        policy[j] = pick
    return ValueEstimate(t_nodes=t_nodes, x_nodes=x_nodes, W=w, stderr=se, policy=policy)


@dataclass
class DppReport:
    t: float
    x: float
    delta: float
    w_value: float
    semigroup_value: float
    residual: float
    stderr_combined: float


def dpp_residual(problem: ControlProblem, model: LevyModel, basis: OrthoBasis,
                 lattice: ValueLattice, cfg: DpConfig, t: float, x: float,
                 delta: float, estimate: ValueEstimate | None = None) -> DppReport:
    """Consistency of the lattice estimate with one backward-semigroup step.

    Compares W(t, x) from the dynamic program against the minimum over
    controls of a single step of width delta applied to the W(t + delta, .)
    slice.  Both sides consume the same estimated surface; the step side uses
    substeps scaled to keep the forward discretization comparable.
    """
    t_nodes = np.asarray(lattice.t_nodes, dtype=np.float64)
    j0 = int(np.argmin(np.abs(t_nodes - t)))
    j1 = int(np.argmin(np.abs(t_nodes - (t + delta))))
    if abs(t_nodes[j0] - t) > 1e-9 or abs(t_nodes[j1] - t - delta) > 1e-9:
        raise ValueError("t and t + delta must be lattice time nodes")
    if j1 <= j0:
        raise ValueError("delta must span at least one lattice slice")
    if estimate is None:
        estimate = value_dp(problem, model, basis, lattice, cfg)

    w_fn = estimate.slice_fn(j0)
    w_val = float(w_fn(x))
    se_a = float(np.interp(x, estimate.x_nodes, estimate.stderr[j0]))

    value_next = estimate.slice_fn(j1) if j1 < len(t_nodes) - 1 else problem.terminal
    step_cfg = DpConfig(n_paths=cfg.n_paths, substeps=cfg.substeps * (j1 - j0),
                        seed=cfg.seed, degree=cfg.degree)
    seed_b = child_seed(cfg.seed, j0, 10007)
    best = np.inf
    best_se = 0.0
    for u in problem.controls:
        vals, errs = semigroup_step(problem, model, basis, float(u), value_next,
                                    float(t_nodes[j0]), float(t_nodes[j1]),
                                    np.array([x]), step_cfg, seed_b)
        if vals[0] < best:
            best, best_se = float(vals[0]), float(errs[0])
    se_b = best_se + float(np.mean(estimate.stderr[j1]))
    return DppReport(t=float(t_nodes[j0]), x=float(x), delta=float(t_nodes[j1] - t_nodes[j0]),
                     w_value=w_val, semigroup_value=best,
                     residual=abs(w_val - best),
                     stderr_combined=float(np.hypot(se_a, se_b)))


@dataclass
class RegularityReport:
    c_x: float
    c_t: float
    finite: bool


def regularity_diagnostics(estimate: ValueEstimate) -> RegularityReport:
    """Fitted Lipschitz constant in x and 1/2-Holder constant in t.

    c_t normalizes time differences by (1 + |x|) sqrt(dt) so linear-growth
    problems report a scale-free constant.
    """
    w = estimate.W
    dx = np.diff(estimate.x_nodes)
    c_x = float(np.max(np.abs(np.diff(w, axis=1)) / dx[None, :]))
    dt = np.diff(estimate.t_nodes)
    growth = 1.0 + np.abs(estimate.x_nodes)
    ratios = np.abs(np.diff(w, axis=0)) / (growth[None, :] * np.sqrt(dt)[:, None])
    c_t = float(np.max(ratios))
    finite = bool(np.isfinite(c_x) and np.isfinite(c_t))
    return RegularityReport(c_x=c_x, c_t=c_t, finite=finite)


def verify_lipschitz(problem: ControlProblem, x_lo: float, x_hi: float,
                     n_samples: int = 41) -> list[str]:
    """Sampled finite-difference check of the declared Lipschitz constants."""
    notes: list[str] = []
    xs = np.linspace(x_lo, x_hi, n_samples)
    ts = np.linspace(0.0, problem.horizon, 5)
    l_x, l_y, l_z = problem.lipschitz
    worst_f = 0.0
    for t in ts:
        for u in problem.controls:
            f_vals = problem.forward(t, xs, u)
            worst_f = max(worst_f, float(np.max(np.abs(np.diff(f_vals) / np.diff(xs)))))
    if worst_f > l_x * (1.0 + 1e-9) + 1e-12:
        notes.append(f"forward coefficient slope {worst_f:.6g} exceeds declared {l_x:.6g}")
    ys = np.linspace(-3.0, 3.0, 13)
    zs = np.zeros((13, 1))
    worst_y = 0.0
    for t in ts:
        for u in problem.controls:
            fv = problem.driver(t, np.zeros_like(ys), ys, zs, u)
            worst_y = max(worst_y, float(np.max(np.abs(np.diff(fv) / np.diff(ys)))))
    if worst_y > l_y * (1.0 + 1e-9) + 1e-12:
        notes.append(f"driver y-slope {worst_y:.6g} exceeds declared {l_y:.6g}")
    if problem.driver.lipschitz_z > l_z * (1.0 + 1e-9) + 1e-12:
        notes.append(f"driver z-sensitivity {problem.driver.lipschitz_z:.6g} "
                     f"exceeds declared {l_z:.6g}")
    return notes
