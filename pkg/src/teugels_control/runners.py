"""Subcommand bodies: compute, write CSV artifacts, optionally render figures.

Each runner takes a validated Scenario and an output directory and returns
(written file paths, human summary lines, ok flag).  Runners are pure
orchestration; all numerics live in the solver modules.  CSV bytes depend
only on the scenario, never on wall clock, worker count, or plot settings.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import report
from .bsde_solver import BsdeSpec, RegressionConfig, solve_backward
from .control_value import value_dp
from .hjb_solver import HjbSolution, convergence_study
from .hjb_solver import solve as hjb_solve
from .levy_model import LevyModel
from .path_sim import empirical_bracket, simulate_ensemble
from .scenario import Scenario
from .teugels_basis import OrthoBasis, build_basis, verify_orthonormal


@dataclass
class RunResult:
    files: list[str] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)
    ok: bool = True


def _basis_of(scenario: Scenario) -> OrthoBasis:
    return build_basis(scenario.model, scenario.basis_K)


def _path(out_dir: str, scenario: Scenario, key: str) -> str:
    return os.path.join(out_dir, scenario.filenames[key])


def _fig_path(csv_path: str) -> str:
    stem, _ = os.path.splitext(csv_path)
    return stem + ".png"


def bsde_spec_from(scenario: Scenario) -> BsdeSpec:
    """Scenario [bsde] section as a solver spec; terminal acts on the path value."""
    driver = scenario.bsde_driver
    terminal = scenario.bsde_terminal
    return BsdeSpec(terminal=lambda x: terminal(x),
                    driver=lambda t, x, y, z: driver(t, x, y, z),
                    lipschitz_y=driver.lipschitz_y,
                    lipschitz_z=driver.lipschitz_z,
                    gamma=driver.gamma if driver.kind == "linear_z" else None,
                    f1=driver.f1)


def closed_form_value(scenario: Scenario):
    """W(0, x) oracle when the problem is the uncontrolled linear benchmark.

    Zero running cost, a single control, F(x) = c1 x, and a linear-family
    terminal give W(t, x) = scale * x * exp(c1 m1 (T - t)) + value.  Returns
    None for every other configuration.
    """
    problem = scenario.problem
    if (len(problem.controls) != 1 or problem.driver.kind != "zero"
            or problem.forward.kind != "linear"
            or problem.terminal.kind not in ("identity", "linear", "affine")):
        return None
    c1 = problem.forward.c1
    m1 = scenario.model.moment(1)
    growth = np.exp(c1 * m1 * problem.horizon)
    scale = 1.0 if problem.terminal.kind == "identity" else problem.terminal.scale
    shift = problem.terminal.value if problem.terminal.kind == "affine" else 0.0
    return lambda x: scale * np.asarray(x) * growth + shift


def run_basis(scenario: Scenario, out_dir: str, plots: bool = True) -> RunResult:
    res = RunResult()
    basis = _basis_of(scenario)
    defect = verify_orthonormal(basis)
    csv_path = _path(out_dir, scenario, "basis_csv")
    report.write_basis_csv(csv_path, basis, defect)
    res.files.append(csv_path)
    if plots:
        fig = _fig_path(csv_path)
        report.fig_basis(fig, basis)
        res.files.append(fig)
    res.lines.append(f"K = {basis.K} (requested {basis.requested_K}), "
                     f"orthonormality defect {defect:.3e}")
    return res


def run_simulate(scenario: Scenario, out_dir: str, plots: bool = True) -> RunResult:
    res = RunResult()
    basis = _basis_of(scenario)
    p = scenario.paths
    ens = simulate_ensemble(scenario.model, basis, 0.0, scenario.problem.horizon,
                            p.M, p.N, p.seed)
    k = basis.K
    rows = []
    mat = np.zeros((k, k))
    worst = 0.0
    for i in range(1, k + 1):
        for j in range(1, k + 1):
            mean, se = empirical_bracket(ens, i, j)
            expected = 1.0 if i == j else 0.0
            ok = abs(mean - expected) <= 5.0 * se
            rows.append([i, j, mean, se, expected, ok])
            mat[i - 1, j - 1] = mean
            if se > 0:
                worst = max(worst, abs(mean - expected) / se)
            res.ok = res.ok and ok
    csv_path = _path(out_dir, scenario, "brackets_csv")
    report.write_brackets_csv(csv_path, rows)
    res.files.append(csv_path)
    if plots:
        fig = _fig_path(csv_path)
        report.fig_brackets(fig, mat)
        res.files.append(fig)
    res.lines.append(f"bracket matrix {k}x{k} at N = {p.N}: "
                     f"worst deviation {worst:.2f} stderr "
                     f"({'ok' if res.ok else 'OUT OF BAND'})")
    return res


def run_bsde(scenario: Scenario, out_dir: str, plots: bool = True) -> RunResult:
    res = RunResult()
    basis = _basis_of(scenario)
    p = scenario.paths
    ens = simulate_ensemble(scenario.model, basis, 0.0, scenario.problem.horizon,
                            p.M, p.N, p.seed)
    sol = solve_backward(bsde_spec_from(scenario), ens,
                         reg=RegressionConfig(degree=scenario.bsde_degree))
    z_col = np.append(sol.z_norm_mean, 0.0)
    csv_path = _path(out_dir, scenario, "bsde_csv")
    report.write_bsde_csv(csv_path, sol.times, sol.y_mean, sol.y_stderr, z_col)
    res.files.append(csv_path)
    if plots:
        fig = _fig_path(csv_path)
        report.fig_bsde(fig, sol.times, sol.y_mean, sol.y_stderr)
        res.files.append(fig)
    res.lines.append(f"Y0 = {sol.y0:.6f} (stderr {sol.y0_stderr:.2e}) "
                     f"over {p.N} paths, {p.M} steps")
    return res


def run_value_mc(scenario: Scenario, out_dir: str, plots: bool = True) -> RunResult:
    res = RunResult()
    basis = _basis_of(scenario)
    est = value_dp(scenario.problem, scenario.model, basis,
                   scenario.lattice, scenario.dp)
    csv_path = _path(out_dir, scenario, "value_csv")
    report.write_value_csv(csv_path, est)
    res.files.append(csv_path)
    if plots:
        fig = _fig_path(csv_path)
        report.fig_value(fig, est)
        res.files.append(fig)
    res.lines.append(f"value surface {len(est.t_nodes)}x{len(est.x_nodes)} nodes, "
                     f"max stderr {float(np.max(est.stderr)):.3e}")
    return res


def run_hjb(scenario: Scenario, out_dir: str, plots: bool = True) -> RunResult:
    res = RunResult()
    basis = _basis_of(scenario)
    oracle = closed_form_value(scenario)
    rows, base, _fine = convergence_study(scenario.problem, scenario.model, basis,
                                          scenario.grid, scenario.hjb, oracle=oracle)
    reference = "closed_form" if oracle is not None else "refined_solution"
    surf_path = _path(out_dir, scenario, "surface_csv")
    report.write_surface_csv(surf_path, base)
    conv_path = _path(out_dir, scenario, "convergence_csv")
    report.write_convergence_csv(conv_path, rows, reference)
    res.files += [surf_path, conv_path]
    if plots:
        fig1 = _fig_path(surf_path)
        report.fig_surface(fig1, base)
        fig2 = _fig_path(conv_path)
        report.fig_convergence(fig2, rows)
        res.files += [fig1, fig2]
    res.lines.append(f"{base.n_steps} steps at dt = {base.dt:.3e} "
                     f"(stability bound {base.dt_max:.3e}), "
                     f"quadrature defect {base.quad_defect:.2e}")
    res.lines.append("refinement errors vs " + reference + ": " +
                     ", ".join(f"h={r.h:g}: {r.error:.3e}" for r in rows))
    return res


def _compare_rows(scenario: Scenario, est, sol: HjbSolution):
    rows = []
    worst = 0.0
    all_ok = True
    for j, t in enumerate(est.t_nodes):
        w_pde_row = np.asarray(sol.value_at(float(t), est.x_nodes))
        for i, x in enumerate(est.x_nodes):
            w_mc = float(est.W[j, i])
            se = float(est.stderr[j, i])
            w_pde = float(w_pde_row[i])
            diff = abs(w_mc - w_pde)
            tol = 0.01 * abs(w_pde) + 3.0 * se
            ok = diff <= tol
            rows.append([float(t), float(x), w_mc, se, w_pde, diff, tol, ok])
            all_ok = all_ok and ok
            if tol > 0:
                worst = max(worst, diff / tol)
    return rows, worst, all_ok


def run_compare(scenario: Scenario, out_dir: str, plots: bool = True) -> RunResult:
    res = RunResult()
    basis = _basis_of(scenario)
    est = value_dp(scenario.problem, scenario.model, basis,
                   scenario.lattice, scenario.dp)
    sol = hjb_solve(scenario.problem, scenario.model, basis,
                    scenario.grid, scenario.hjb)
    rows, worst, all_ok = _compare_rows(scenario, est, sol)
    res.ok = all_ok
    csv_path = _path(out_dir, scenario, "compare_csv")
    report.write_compare_csv(csv_path, rows)
    res.files.append(csv_path)
    if plots:
        fig = _fig_path(csv_path)
        report.fig_compare(fig, est.x_nodes, est.W[0], est.stderr[0],
                           np.asarray(sol.value_at(float(est.t_nodes[0]),
                                                   est.x_nodes)),
                           float(est.t_nodes[0]))
        res.files.append(fig)
    res.lines.append(f"Monte Carlo vs grid on {len(rows)} nodes: worst "
                     f"discrepancy at {worst:.2f}x tolerance "
                     f"({'ok' if all_ok else 'FAIL'})")
    return res


RUNNERS = {
    "basis": run_basis,
    "simulate": run_simulate,
    "bsde": run_bsde,
    "value-mc": run_value_mc,
    "hjb": run_hjb,
    "compare": run_compare,
}
