"""Delimited output and figures for the command-line runners.

CSV files are the contract: RFC-4180 framing (CRLF line ends, minimal
quoting), '.' decimal separator, reals at 17 significant digits so doubles
round-trip losslessly, and fully deterministic bytes for a fixed scenario.
Figures are additive convenience renderings of the same data; they are
written next to each CSV unless plotting is disabled.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .control_value import ValueEstimate
from .hjb_solver import ConvergenceRow, HjbSolution
from .teugels_basis import OrthoBasis, eval_q


def format_real(x) -> str:
    """17 significant digits; integers of float type keep a trailing .0-free form."""
    return format(float(x), ".17g")


def format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_real(value)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(cell) for cell in row])


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    scenario_digest: str
    version: str
    command: str
    duration_seconds: float
    outputs: dict[str, str]

    def write(self, path: str) -> None:
        payload = {
            "scenario_digest": self.scenario_digest,
            "version": self.version,
            "command": self.command,
            "duration_seconds": round(self.duration_seconds, 3),
            "outputs": dict(sorted(self.outputs.items())),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------- CSV bodies

def write_basis_csv(path: str, basis: OrthoBasis, defect: float) -> None:
    """Lower-triangle coefficients in long form plus the orthonormality defect."""
    rows = []
    for n in range(1, basis.K + 1):
        for j in range(1, n + 1):
            rows.append(["coef", n, j, basis.A[n - 1, j - 1]])
    rows.append(["defect", 0, 0, defect])
    write_csv(path, ["kind", "n", "j", "value"], rows)


def write_brackets_csv(path: str, rows) -> None:
    """Rows: (i, j, mean, stderr, expected, pass)."""
    write_csv(path, ["i", "j", "mean", "stderr", "expected", "pass"], rows)


def write_bsde_csv(path: str, times: np.ndarray, y_mean: np.ndarray,
                   y_stderr: np.ndarray, z_norm_mean: np.ndarray) -> None:
    rows = [[t, ym, ys, zn] for t, ym, ys, zn
            in zip(times, y_mean, y_stderr, z_norm_mean)]
    write_csv(path, ["t", "y_mean", "y_stderr", "z_norm_mean"], rows)


def write_value_csv(path: str, est: ValueEstimate) -> None:
    rows = []
    for j, t in enumerate(est.t_nodes):
        for i, x in enumerate(est.x_nodes):
            rows.append([t, x, est.W[j, i], est.stderr[j, i], int(est.policy[j, i])])
    write_csv(path, ["t", "x", "W", "stderr", "policy"], rows)


def write_surface_csv(path: str, sol: HjbSolution) -> None:
    rows = []
    nodes = sol.grid.nodes
    for r, t in enumerate(sol.t_report):
        for i, x in enumerate(nodes):
            rows.append([t, x, sol.W[r, i], int(sol.policy[r, i])])
    write_csv(path, ["t", "x", "W", "policy"], rows)


def write_convergence_csv(path: str, rows: list[ConvergenceRow],
                          reference: str) -> None:
    body = [[r.h, r.dt, r.error, reference] for r in rows]
    write_csv(path, ["h", "dt", "error", "reference"], body)


def write_compare_csv(path: str, rows) -> None:
    """Rows: (t, x, w_mc, stderr, w_pde, abs_diff, tolerance, pass)."""
    write_csv(path, ["t", "x", "w_mc", "stderr", "w_pde", "abs_diff",
                     "tolerance", "pass"], rows)


def write_accept_csv(path: str, results) -> None:
    rows = [[r.number, r.name, r.measured, r.threshold, r.passed]
            for r in results]
    write_csv(path, ["criterion", "name", "measured", "threshold", "pass"], rows)


# ------------------------------------------------------------------- figures

def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_basis(path: str, basis: OrthoBasis, x_lo: float = -2.0,
              x_hi: float = 2.0) -> None:
    xs = np.linspace(x_lo, x_hi, 401)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for n in range(1, basis.K + 1):
        ax.plot(xs, np.asarray(eval_q(basis, n, xs)), label=f"q{n - 1}")
    ax.set_xlabel("x")
    ax.set_ylabel("q(x)")
    ax.set_title("orthonormal polynomial family")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def fig_brackets(path: str, mat: np.ndarray) -> None:
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    im = ax.imshow(mat, cmap="coolwarm", vmin=-0.2, vmax=1.2)
    k = mat.shape[0]
    for i in range(k):
        for j in range(k):
            ax.text(j, i, f"{mat[i, j]:.3f}", ha="center", va="center", fontsize=8)
    ax.set_xticks(range(k), [str(i + 1) for i in range(k)])
    ax.set_yticks(range(k), [str(i + 1) for i in range(k)])
    ax.set_title("realized bracket matrix / T")
    fig.colorbar(im, ax=ax, shrink=0.85)
    _finish(fig, path)


def fig_bsde(path: str, times: np.ndarray, y_mean: np.ndarray,
             y_stderr: np.ndarray) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(times, y_mean, color="tab:blue", label="Y mean")
    ax.fill_between(times, y_mean - 3 * y_stderr, y_mean + 3 * y_stderr,
                    color="tab:blue", alpha=0.25, label="±3 stderr")
    ax.set_xlabel("t")
    ax.set_ylabel("Y")
    ax.set_title("backward solution mean")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def fig_value(path: str, est: ValueEstimate) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for j, t in enumerate(est.t_nodes):
        ax.plot(est.x_nodes, est.W[j], label=f"t={t:g}", alpha=0.85)
    ax.set_xlabel("x")
    ax.set_ylabel("W")
    ax.set_title("Monte Carlo value surface")
    ax.legend(loc="best", fontsize=7)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def fig_surface(path: str, sol: HjbSolution) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    nodes = sol.grid.nodes
    for r, t in enumerate(sol.t_report):
        ax.plot(nodes, sol.W[r], label=f"t={t:.3g}", alpha=0.85)
    ax.set_xlabel("x")
    ax.set_ylabel("W")
    ax.set_title("grid value surface")
    ax.legend(loc="best", fontsize=7)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def fig_convergence(path: str, rows: list[ConvergenceRow]) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    hs = [r.h for r in rows]
    errs = [r.error for r in rows]
    ax.loglog(hs, errs, "o-", color="tab:red")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.set_title("refinement study")
    ax.grid(alpha=0.3, which="both")
    _finish(fig, path)


def fig_compare(path: str, x_nodes: np.ndarray, w_mc: np.ndarray,
                stderr: np.ndarray, w_pde: np.ndarray, t: float) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(x_nodes, w_mc, yerr=3 * stderr, fmt="o", markersize=3.5,
                color="tab:blue", label="Monte Carlo ±3 stderr")
    ax.plot(x_nodes, w_pde, color="tab:orange", label="grid solver")
    ax.set_xlabel("x")
    ax.set_ylabel("W")
    ax.set_title(f"value function at t={t:g}")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def fig_accept(path: str, results) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    nums = [r.number for r in results]
    colors = ["tab:green" if r.passed else "tab:red" for r in results]
    ax.barh(nums, [1.0] * len(nums), color=colors, alpha=0.8)
    for r in results:
        ax.text(0.02, r.number, f"{r.number}. {r.name}", va="center", fontsize=8)
    ax.set_yticks([])
    ax.set_xticks([])
    ax.invert_yaxis()
    ax.set_title("acceptance criteria")
    _finish(fig, path)
