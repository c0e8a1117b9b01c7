"""Acceptance checks: twelve pinned pass/fail criteria over the whole stack.

Criteria 1 through 11 fix their own models, seeds, and tolerances; the
scenario argument drives only the determinism check (12) and where output
lands.  Each check reduces to a single measured number compared against a
threshold: quantities with a stated tolerance enter as the ratio
measured/tolerance against a threshold of 1, count-style checks enter as the
raw count against 0, and boolean sub-checks contribute 0 when satisfied and 2
when not, so a single failed precondition fails the row.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import report
from .bsde_solver import (BsdeSpec, check_comparison, solve_backward,
                          solve_linear_closed_form)
from .coefficients import (make_control_driver, make_driver, make_forward,
                           make_terminal)
from .control_value import (ControlProblem, DpConfig, ValueLattice, child_seed,
                            dpp_residual, value_dp)
from .hjb_solver import (GridFunction, HjbConfig, SpatialGrid, build_quadrature,
                         convergence_study, generator_Lu, operator_Luk)
from .hjb_solver import solve as hjb_solve
from .levy_model import JumpMeasure, LevyModel
from .path_sim import (empirical_bracket, reconstruct_L, simulate,
                       simulate_ensemble, teugels_increments)
from .runners import RUNNERS, RunResult
from .scenario import Scenario
from .teugels_basis import build_basis, eval_p, verify_orthonormal


@dataclass(frozen=True)
class AcceptanceResult:
    number: int
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: str


def _result(number: int, name: str, parts: list[tuple[str, float]],
            threshold: float = 1.0) -> AcceptanceResult:
    measured = max(v for _, v in parts)
    detail = ", ".join(f"{k}={v:.3g}" for k, v in parts)
    return AcceptanceResult(number=number, name=name, measured=measured,
                            threshold=threshold,
                            passed=bool(measured <= threshold), detail=detail)


def _brownian() -> LevyModel:
    return LevyModel(b=0.0, sigma2=1.0, jumps=JumpMeasure.none())


def _point() -> LevyModel:
    return LevyModel(b=0.0, sigma2=1.0, jumps=JumpMeasure.point_masses([(1.0, 1.0)]))


def _mixed() -> LevyModel:
    return LevyModel(b=0.0, sigma2=1.0,
                     jumps=JumpMeasure.two_sided_exponential(1.0, 0.5, 2.0, 3.0))


def _benchmark() -> LevyModel:
    return LevyModel(b=-0.1, sigma2=0.25, jumps=JumpMeasure.point_masses([(1.0, 0.3)]))


def _benchmark_problem() -> ControlProblem:
    return ControlProblem(forward=make_forward("linear", c1=1.0),
                          driver=make_control_driver("zero"),
                          terminal=make_terminal("identity"),
                          controls=(0.0,), horizon=1.0,
                          lipschitz=(1.0, 0.0, 0.0))


def _two_control_problem() -> ControlProblem:
    return ControlProblem(forward=make_forward("affine_u", c2=1.0),
                          driver=make_control_driver("zero"),
                          terminal=make_terminal("quadratic", scale=1.0),
                          controls=(-1.0, 1.0), horizon=1.0,
                          lipschitz=(0.0, 0.0, 0.0))


def criterion_1() -> AcceptanceResult:
    """Orthonormality defect at rank-capped request 4; pinned 2x2 coefficients."""
    parts = []
    for name, model in (("brownian", _brownian()), ("point", _point()),
                        ("mixed", _mixed())):
        defect = verify_orthonormal(build_basis(model, 4))
        parts.append((f"defect_{name}", defect / 1e-8))
    b2 = build_basis(_point(), 2)
    coef_err = max(abs(b2.a(1, 1) - 1.0 / math.sqrt(2.0)),
                   abs(b2.a(2, 1) + math.sqrt(2.0) / 2.0),
                   abs(b2.a(2, 2) - math.sqrt(2.0)))
    parts.append(("coef_2x2", coef_err / 1e-12))
    return _result(1, "basis orthonormality", parts)


def criterion_2() -> AcceptanceResult:
    """Effective rank equals atom count, plus one when diffusion is present."""
    atoms = [(1.0, 1.0), (-0.5, 0.7), (2.0, 0.3)]
    mismatches = 0
    details = []
    for r in (1, 2, 3):
        for sigma2 in (0.0, 1.0):
            model = LevyModel(b=0.0, sigma2=sigma2,
                              jumps=JumpMeasure.point_masses(atoms[:r]), i_max=12)
            built = build_basis(model, r + 2)
            expected = r + (1 if sigma2 > 0.0 else 0)
            if built.K != expected:
                mismatches += 1
                details.append((f"r{r}_s{sigma2:g}", float(built.K - expected)))
    details.append(("mismatches", float(mismatches)))
    return _result(2, "rank law", details, threshold=0.0)


def criterion_3() -> AcceptanceResult:
    """Path reconstruction to roundoff; ensemble mean matches the mean rate."""
    worst = 0.0
    for model in (_point(), _mixed()):
        basis = build_basis(model, 3)
        for idx in range(500):
            path = simulate(model, 0.0, 1.0, 64, 2024, path_index=idx)
            inc = teugels_increments(path, basis)
            err = float(np.max(np.abs(reconstruct_L(inc, basis)
                                      - path.step_increments())))
            worst = max(worst, err)
    mixed = _mixed()
    basis = build_basis(mixed, 3)
    ens = simulate_ensemble(mixed, basis, 0.0, 1.0, 50, 100000, 2024)
    l_final = ens.levy_values()[:, -1]
    se = float(np.std(l_final, ddof=1) / np.sqrt(len(l_final)))
    mean_err = abs(float(np.mean(l_final)) - mixed.moment(1) * 1.0)
    return _result(3, "path identities",
                   [("roundtrip", worst / 1e-12), ("mean", mean_err / (5.0 * se))])


def criterion_4() -> AcceptanceResult:
    """Realized bracket matrix within five stderr of the identity."""
    mixed = _mixed()
    basis = build_basis(mixed, 3)
    ens = simulate_ensemble(mixed, basis, 0.0, 1.0, 50, 100000, 2024)
    parts = []
    for i in range(1, basis.K + 1):
        for j in range(i, basis.K + 1):
            mean, se = empirical_bracket(ens, i, j)
            expected = 1.0 if i == j else 0.0
            parts.append((f"B{i}{j}", abs(mean - expected) / (5.0 * se)))
    return _result(4, "strong orthogonality", parts)


def criterion_5() -> AcceptanceResult:
    """Solver versus closed forms for drivers without a z term."""
    bench = _benchmark()
    basis = build_basis(bench, 2)
    ens = {m: simulate_ensemble(bench, basis, 0.0, 1.0, m, 100000, 5150)
           for m in (25, 50, 100)}
    ode_driver = make_driver("linear_y", a=0.3, b=0.2)
    a_fn, b_fn = ode_driver.ode_parts()
    cases = [
        ("const", make_driver("constant", a=1.0),
         make_terminal("constant", value=0.0), 1.0),
        ("decay", make_driver("linear_y", b=-0.5),
         make_terminal("constant", value=2.0), 2.0 * math.exp(-0.5)),
        ("ramp", make_driver("time_affine", c=1.0),
         make_terminal("constant", value=0.0), 0.5),
        ("ode", ode_driver, make_terminal("constant", value=1.0),
         float(solve_linear_closed_form(a_fn, b_fn, 1.0, np.array([0.0, 1.0]))[0])),
        ("mart", make_driver("zero"), make_terminal("identity"), bench.moment(1)),
    ]
    parts = []
    for name, driver, terminal, oracle in cases:
        spec = BsdeSpec(terminal=terminal, driver=driver,
                        lipschitz_y=driver.lipschitz_y)
        sol = solve_backward(spec, ens[50])
        tol = max(2e-3, 3.0 * sol.y0_stderr)
        parts.append((name, abs(sol.y0 - oracle) / tol))
    decay = BsdeSpec(terminal=make_terminal("constant", value=2.0),
                     driver=make_driver("linear_y", b=-0.5), lipschitz_y=0.5)
    errs = [abs(solve_backward(decay, ens[m]).y0 - 2.0 * math.exp(-0.5))
            for m in (25, 50, 100)]
    non_monotone = sum(1 for lo, hi in zip(errs[1:], errs[:-1]) if lo >= hi)
    parts.append(("monotone", 2.0 * non_monotone))
    return _result(5, "bsde oracles", parts)


def criterion_6() -> AcceptanceResult:
    """Ordered data give ordered solutions in the linear-in-z class."""
    bench = _benchmark()
    basis = build_basis(bench, 2)
    ens = simulate_ensemble(bench, basis, 0.0, 1.0, 50, 100000, 606)

    def spec_of(driver, terminal):
        return BsdeSpec(terminal=terminal, driver=driver,
                        lipschitz_y=driver.lipschitz_y,
                        lipschitz_z=driver.lipschitz_z,
                        gamma=driver.gamma, f1=driver.f1)

    shared = make_driver("linear_z", a=0.05, b=0.1, gamma=(0.1, 0.05))
    lo_c = make_driver("linear_z", a=0.0, gamma=(0.2, -0.1))
    hi_c = make_driver("linear_z", a=0.1, gamma=(0.2, -0.1))
    pairs = [
        ("equal", spec_of(shared, make_terminal("identity")),
         spec_of(shared, make_terminal("identity"))),
        ("terminal", spec_of(shared, make_terminal("identity")),
         spec_of(shared, make_terminal("affine", value=1.0, scale=1.0))),
        ("driver", spec_of(lo_c, make_terminal("constant", value=1.0)),
         spec_of(hi_c, make_terminal("constant", value=1.0))),
    ]
    parts = []
    for name, lo, hi in pairs:
        rep = check_comparison(lo, hi, ens)
        parts.append((f"pre_{name}", 0.0 if rep.ok_preconditions else 2.0))
        parts.append((f"viol_{name}", rep.violation_fraction / 0.01))
    return _result(6, "comparison ordering", parts)


def criterion_7() -> AcceptanceResult:
    """Both value paths reproduce x e^{0.2} on interior nodes and agree."""
    bench = _benchmark()
    basis = build_basis(bench, 2)
    problem = _benchmark_problem()
    lattice = ValueLattice(t_nodes=np.linspace(0.0, 1.0, 6),
                           x_nodes=np.linspace(0.0, 4.5, 19))
    est = value_dp(problem, bench, basis, lattice,
                   DpConfig(n_paths=50000, substeps=8, seed=7))
    sol = hjb_solve(problem, bench, basis, SpatialGrid(-1.0, 3.5, 46), HjbConfig())
    inner = slice(2, 9)  # x = 0.5 .. 2.0
    xs = lattice.x_nodes[inner]
    w_true = xs * math.exp(0.2)
    w_mc = est.W[0, inner]
    se_mc = est.stderr[0, inner]
    w_pde = np.asarray(sol.value_at(0.0, xs))
    cross = np.abs(w_mc - w_pde) / (0.01 * np.abs(w_pde) + 3.0 * se_mc)
    return _result(7, "linear benchmark", [
        ("mc_rel", float(np.max(np.abs(w_mc - w_true) / w_true)) / 0.01),
        ("pde_rel", float(np.max(np.abs(w_pde - w_true) / w_true)) / 0.01),
        ("cross", float(np.max(cross))),
    ])


def criterion_8() -> AcceptanceResult:
    """One-step consistency of the lattice value at delta = 0.1.

    The residual must sit inside three combined stderr plus a bias budget of
    4 delta dt_sub; doubling the substeps halves the budget and the residual
    must stay inside the tighter band.
    """
    bench = _benchmark()
    basis = build_basis(bench, 2)
    delta = 0.1
    probes = [
        ("bench", _benchmark_problem(),
         ValueLattice(t_nodes=np.linspace(0.0, 1.0, 11),
                      x_nodes=np.linspace(0.0, 4.5, 19)), 21, 1.0),
        ("two_ctrl", _two_control_problem(),
         ValueLattice(t_nodes=np.linspace(0.0, 1.0, 11),
                      x_nodes=np.linspace(-3.0, 3.0, 25)), 33, 0.5),
    ]
    parts = []
    for name, problem, lattice, seed, x_probe in probes:
        for substeps in (4, 8):
            cfg = DpConfig(n_paths=20000, substeps=substeps, seed=seed)
            est = value_dp(problem, bench, basis, lattice, cfg)
            rep = dpp_residual(problem, bench, basis, lattice, cfg,
                               0.3, x_probe, delta, estimate=est)
            budget = 4.0 * delta * (delta / substeps)
            tol = 3.0 * rep.stderr_combined + budget
            parts.append((f"{name}_m{substeps}", rep.residual / tol))
    return _result(8, "dpp residual", parts)


def criterion_9() -> AcceptanceResult:
    """Generator and martingale coefficients on polynomial grid functions.

    The point-mass model keeps every quadrature lookup on a grid node, so
    the moment-table forms hold to roundoff; the smooth-tail model is checked
    on the cases whose interpolation is exact (constant and linear).
    """
    tol = 1e-6
    f_scale = 0.7
    problem = ControlProblem(forward=make_forward("constant", c0=f_scale),
                             driver=make_control_driver("zero"),
                             terminal=make_terminal("constant", value=0.0),
                             controls=(0.0,), horizon=1.0,
                             lipschitz=(0.0, 0.0, 0.0))
    slope, offset = 1.3, -0.4
    parts = []
    for tag, model in (("point", _point()), ("mixed", _mixed())):
        basis = build_basis(model, 3)
        grid = SpatialGrid(-3.0, 5.0, 161)
        quad = build_quadrature(model, 16)
        xs = grid.nodes[(grid.nodes >= -1.0) & (grid.nodes <= 3.0)]
        m1 = model.moment(1)
        cases = [("const", np.full(grid.n_nodes, 2.0), np.zeros_like(xs), 0.0),
                 ("lin", slope * grid.nodes + offset,
                  np.full_like(xs, m1 * f_scale * slope),
                  f_scale * slope / basis.a11)]
        if tag == "point":
            jump_sum = [math.fsum(quad.weights * quad.nodes ** 2
                                  * np.asarray(eval_p(basis, k, quad.nodes)))
                        for k in range(1, basis.K + 1)]
            cases.append(("quad", grid.nodes ** 2,
                          2.0 * m1 * xs * f_scale + model.sigma2 * f_scale ** 2
                          + f_scale ** 2 * model.moment(2), None))
        for name, values, gen_oracle, luk1_oracle in cases:
            v = GridFunction.from_values(grid, values)
            gen = generator_Lu(v, xs, 0.0, problem, model, quad)
            parts.append((f"g_{name}_{tag}",
                          float(np.max(np.abs(gen - gen_oracle))) / tol))
            for k in range(1, basis.K + 1):
                got = np.asarray(operator_Luk(v, xs, 0.0, k, problem, model,
                                              basis, quad))
                if name == "const":
                    want = np.zeros_like(xs)
                elif name == "lin":
                    want = np.full_like(xs, luk1_oracle if k == 1 else 0.0)
                else:
                    want = f_scale ** 2 * jump_sum[k - 1] * np.ones_like(xs)
                    if k == 1:
                        want = want + 2.0 * xs * f_scale / basis.a11
                parts.append((f"h{k}_{name}_{tag}",
                              float(np.max(np.abs(got - want))) / tol))
    return _result(9, "operator exactness", parts)


def criterion_10() -> AcceptanceResult:
    """Short-horizon Monte Carlo versus the operators for v(x) = x squared.

    The generator estimate carries the exact second-order expansion term
    m1^2 delta plus a small interpolation allowance; the martingale
    coefficients are compared at plain three stderr across independent runs.
    """
    mixed = _mixed()
    basis = build_basis(mixed, 3)
    problem = ControlProblem(forward=make_forward("constant", c0=1.0),
                             driver=make_control_driver("zero"),
                             terminal=make_terminal("constant", value=0.0),
                             controls=(0.0,), horizon=1.0,
                             lipschitz=(0.0, 0.0, 0.0))
    grid = SpatialGrid(-6.0, 7.0, 1041)
    v = GridFunction.from_values(grid, grid.nodes ** 2)
    quad = build_quadrature(mixed, 16)
    x0, delta, substeps, n_paths, n_runs = 0.5, 0.05, 10, 50000, 8
    g_code = float(generator_Lu(v, x0, 0.0, problem, mixed, quad))
    h_code = [float(operator_Luk(v, x0, 0.0, k, problem, mixed, basis, quad))
              for k in (1, 2, 3)]
    spec = BsdeSpec(terminal=lambda x: x ** 2,
                    driver=lambda t, x, y, z: np.zeros_like(y))
    gen_runs = np.empty(n_runs)
    z_runs = np.empty((n_runs, 3))
    for r in range(n_runs):
        ens = simulate_ensemble(mixed, basis, 0.0, delta, substeps, n_paths,
                                child_seed(1007, r))
        state = x0 + ens.levy_values()
        gen_runs[r] = float(np.mean((state[:, -1] ** 2 - x0 ** 2) / delta))
        sol = solve_backward(spec, ens, state=state)
        z_runs[r] = sol.Z[:, 0, :].mean(axis=0)
    g_se = float(np.std(gen_runs, ddof=1) / math.sqrt(n_runs))
    g_tol = 3.0 * g_se + mixed.moment(1) ** 2 * delta + 1e-4
    parts = [("generator", abs(float(np.mean(gen_runs)) - g_code) / g_tol)]
    for k in (1, 2, 3):
        se = float(np.std(z_runs[:, k - 1], ddof=1) / math.sqrt(n_runs))
        diff = abs(float(np.mean(z_runs[:, k - 1])) - h_code[k - 1])
        parts.append((f"z{k}", diff / (3.0 * se)))
    return _result(10, "ito consistency", parts)


def criterion_11() -> AcceptanceResult:
    """Terminal shift propagates inside e^{L2 T}; refinement shrinks error."""
    bench = _benchmark()
    basis = build_basis(bench, 2)
    grid = SpatialGrid(-1.0, 3.5, 46)
    cfg = HjbConfig()
    eps, l2 = 0.1, 0.5
    base_kw = dict(forward=make_forward("linear", c1=1.0),
                   driver=make_control_driver("linear_y", b=l2),
                   controls=(0.0,), horizon=1.0, lipschitz=(1.0, l2, 0.0))
    lo = ControlProblem(terminal=make_terminal("identity"), **base_kw)
    hi = ControlProblem(terminal=make_terminal("identity").shifted(eps), **base_kw)
    sol_lo = hjb_solve(lo, bench, basis, grid, cfg)
    sol_hi = hjb_solve(hi, bench, basis, grid, cfg)
    max_diff = float(np.max(np.abs(sol_hi.W - sol_lo.W)))
    bound = eps * math.exp(l2 * 1.0) * 1.1

    oracle = lambda x: np.asarray(x) * math.exp(0.2)
    rows, _, _ = convergence_study(_benchmark_problem(), bench, basis, grid,
                                   cfg, oracle=oracle)
    ratio = rows[0].error / rows[1].error if rows[1].error > 0 else math.inf
    return _result(11, "contraction and refinement",
                   [("shift", max_diff / bound), ("refine", 1.5 / ratio)])


def criterion_12(scenario: Scenario, work_dir: str) -> AcceptanceResult:
    """Byte-identical delimited output when the whole pipeline runs twice."""
    digests: list[dict[str, str]] = []
    for tag in ("run1", "run2"):
        run_dir = os.path.join(work_dir, "determinism", tag)
        os.makedirs(run_dir, exist_ok=True)
        for runner in RUNNERS.values():
            runner(scenario, run_dir, plots=False)
        digests.append({name: report.sha256_file(os.path.join(run_dir, name))
                        for name in sorted(os.listdir(run_dir))
                        if name.endswith(".csv")})
    names = sorted(set(digests[0]) | set(digests[1]))
    differing = [n for n in names if digests[0].get(n) != digests[1].get(n)]
    measured = float(len(differing)) if names else 2.0
    detail = (f"{len(names)} files compared"
              + (", differs: " + ", ".join(differing) if differing else ""))
    return AcceptanceResult(number=12, name="determinism", measured=measured,
                            threshold=0.0, passed=bool(measured <= 0.0),
                            detail=detail)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
            criterion_11)


def run_accept(scenario: Scenario, out_dir: str, plots: bool = True) -> RunResult:
    res = RunResult()
    results = [fn() for fn in CRITERIA]
    results.append(criterion_12(scenario, out_dir))
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        res.lines.append(f"criterion {r.number:2d} {flag} {r.name}: "
                         f"measured {r.measured:.3e} vs {r.threshold:g} ({r.detail})")
        res.ok = res.ok and r.passed
    csv_path = os.path.join(out_dir, scenario.filenames["accept_csv"])
    report.write_accept_csv(csv_path, results)
    res.files.append(csv_path)
    if plots:
        fig = os.path.splitext(csv_path)[0] + ".png"
        report.fig_accept(fig, results)
        res.files.append(fig)
    return res
