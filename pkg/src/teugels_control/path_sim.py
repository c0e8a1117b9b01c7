"""Exact finite-activity Levy path simulation and power-jump increments.

Jumps are compound Poisson (exact times and sizes), the diffusion part is
sampled on a uniform grid, and the small-jump compensator is folded into the
simulated drift so the mean of L_t is m_1 * t exactly.

RNG streams are counter-based (Philox).  simulate() keys its stream by
(seed, path_index) so a path's draw is independent of how many other paths
exist or which worker produces it.  simulate_ensemble() draws the whole
ensemble from one stream with a fixed draw order (counts, normals, times,
sizes) for vectorized speed; reductions over the ensemble are in path order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .levy_model import LevyModel
from .teugels_basis import OrthoBasis, eval_p

# stream tag separating ensemble draws from per-path streams under one seed
ENSEMBLE_STREAM_TAG = np.uint64(0x7E09_5EED_0000_0001)


def _path_rng(seed: int, path_index: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(path_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _ensemble_rng(seed: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), ENSEMBLE_STREAM_TAG], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class LevyPath:
    """One simulated path on a uniform grid over [t_start, T]."""

    times: np.ndarray
    diffusion_increments: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    drift_rate: float
    sigma: float

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def step_increments(self) -> np.ndarray:
        """dL per grid step: drift + diffusion + jumps landing in the step."""
        m = len(self.times) - 1
        out = self.drift_rate * self.dt + self.sigma * self.diffusion_increments
        if len(self.jump_times):
            steps = np.searchsorted(self.times, self.jump_times, side="left") - 1
            np.add.at(out, steps, self.jump_sizes)
        return out

    def grid_values(self) -> np.ndarray:
        """L at the grid times, starting from 0."""
        vals = np.zeros(len(self.times))
        vals[1:] = np.cumsum(self.step_increments())
        return vals


@dataclass(frozen=True)
class TeugelsIncrements:
    """Per-step compensated power increments dY and orthonormal increments dH."""

    times: np.ndarray
    dY: np.ndarray  # (M, i_top)
    dH: np.ndarray  # (M, K)
    jump_steps: np.ndarray
    jump_sizes: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def simulate(model: LevyModel, t_start: float, horizon: float, steps: int,
             seed: int, path_index: int = 0) -> LevyPath:
    """One path with its own counter-based stream keyed by (seed, path_index)."""
    if horizon <= t_start:
        raise ValueError("horizon must exceed t_start")
    if steps < 1:
        raise ValueError("need at least one step")
    rng = _path_rng(seed, path_index)
    times = np.linspace(t_start, horizon, steps + 1)
    normals = rng.standard_normal(steps) * np.sqrt((horizon - t_start) / steps)
    mass = model.jumps.total_mass
    if mass > 0.0:
        count = int(rng.poisson(mass * (horizon - t_start)))
        jt = np.sort(t_start + rng.random(count) * (horizon - t_start))
        js = model.jumps.sample_sizes(rng, count)
    else:
        jt = np.zeros(0)
        js = np.zeros(0)
    return LevyPath(times=times, diffusion_increments=normals, jump_times=jt,
                    jump_sizes=js, drift_rate=model.drift_rate,
                    sigma=float(np.sqrt(model.sigma2)))


def teugels_increments(path: LevyPath, basis: OrthoBasis,
                       i_top: int | None = None) -> TeugelsIncrements:
    """Compensated power increments and orthonormal increments for one path.

    dY column i-1 is the step increment of Y^(i) = L^(i) - m_i t, where L^(1)
    is the process itself and L^(i), i >= 2, sums i-th powers of the jumps.
    dH = dY A^T restricted to the basis size.
    """
    model = basis.model
    if i_top is None:
        i_top = max(basis.K, 2)
    if i_top > model.i_max:
        raise ValueError(f"moment index {i_top} exceeds i_max={model.i_max}")
    m = len(path.times) - 1
    dt = path.dt
    if len(path.jump_times):
        steps = np.searchsorted(path.times, path.jump_times, side="left") - 1
    else:
        steps = np.zeros(0, dtype=int)
    d_y = np.empty((m, i_top))
    d_y[:, 0] = path.step_increments() - model.moment(1) * dt
    for i in range(2, i_top + 1):
        power_sum = np.zeros(m)
        if len(steps):
            np.add.at(power_sum, steps, path.jump_sizes ** i)
        d_y[:, i - 1] = power_sum - model.moment(i) * dt
    d_h = d_y[:, : basis.K] @ basis.A.T
    return TeugelsIncrements(times=path.times, dY=d_y, dH=d_h,
                             jump_steps=steps, jump_sizes=path.jump_sizes)


def reconstruct_L(inc: TeugelsIncrements, basis: OrthoBasis) -> np.ndarray:
    """Step increments of L recovered from the first orthonormal increment.

    dL = dH^(1) / a11 + m_1 dt, exact up to roundoff.
    """
    m1 = basis.model.moment(1)
    return inc.dH[:, 0] / basis.a11 + m1 * inc.dt


@dataclass(frozen=True)
class PathEnsemble:
    """Vectorized ensemble: per-step dL and dH plus flat jump records."""

    times: np.ndarray       # (M+1,)
    dL: np.ndarray          # (N, M)
    dH: np.ndarray          # (N, M, K)
    jump_path: np.ndarray   # (J,) path index per jump, ascending
    jump_step: np.ndarray   # (J,)
    jump_sizes: np.ndarray  # (J,)
    basis: OrthoBasis

    @property
    def n_paths(self) -> int:
        return self.dL.shape[0]

    @property
    def n_steps(self) -> int:
        return self.dL.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def levy_values(self) -> np.ndarray:
        """L at grid times per path, shape (N, M+1), starting from 0."""
        vals = np.zeros((self.dL.shape[0], self.dL.shape[1] + 1))
        np.cumsum(self.dL, axis=1, out=vals[:, 1:])
        return vals


def simulate_ensemble(model: LevyModel, basis: OrthoBasis, t_start: float,
                      horizon: float, steps: int, n_paths: int,
                      seed: int) -> PathEnsemble:
    """N paths from one counter-based stream with a fixed draw order."""
    if horizon <= t_start:
        raise ValueError("horizon must exceed t_start")
    rng = _ensemble_rng(seed)
    times = np.linspace(t_start, horizon, steps + 1)
    dt = (horizon - t_start) / steps
    span = horizon - t_start
    mass = model.jumps.total_mass
    if mass > 0.0:
        counts = rng.poisson(mass * span, size=n_paths)
    else:
        counts = np.zeros(n_paths, dtype=np.int64)
    normals = rng.standard_normal((n_paths, steps))
    total = int(counts.sum())
    if total:
        jtimes = t_start + rng.random(total) * span
        jsizes = model.jumps.sample_sizes(rng, total)
        jpath = np.repeat(np.arange(n_paths), counts)
        jstep = np.searchsorted(times, jtimes, side="left") - 1
    else:
        jsizes = np.zeros(0)
        jpath = np.zeros(0, dtype=int)
        jstep = np.zeros(0, dtype=int)

    d_l = np.empty((n_paths, steps))
    d_l[:] = model.drift_rate * dt
    d_l += np.sqrt(model.sigma2) * np.sqrt(dt) * normals
    if total:
        np.add.at(d_l, (jpath, jstep), jsizes)

    coeff = basis.A
    k_dim = basis.K
    d_h = np.zeros((n_paths, steps, k_dim))
    d_y1 = d_l - model.moment(1) * dt
    for k in range(k_dim):
        d_h[:, :, k] += coeff[k, 0] * d_y1
    for j in range(2, k_dim + 1):
        power_sum = np.zeros((n_paths, steps))
        if total:
            np.add.at(power_sum, (jpath, jstep), jsizes ** j)
        d_yj = power_sum - model.moment(j) * dt
        for k in range(j - 1, k_dim):
            d_h[:, :, k] += coeff[k, j - 1] * d_yj
    return PathEnsemble(times=times, dL=d_l, dH=d_h, jump_path=jpath,
                        jump_step=jstep, jump_sizes=jsizes, basis=basis)


def empirical_bracket(ens: PathEnsemble | list[TeugelsIncrements], i: int, j: int,
                      basis: OrthoBasis | None = None) -> tuple[float, float]:
    """Mean and stderr of the realized bracket [H^(i), H^(j)]_T / T.

    Per path the realized covariation is a_{i1} a_{j1} sigma2 (T - t_start)
    plus sum of p_i p_j over the path's jumps; strong orthogonality makes the
    expectation delta_ij (T - t_start).
    """
    if isinstance(ens, PathEnsemble):
        basis = ens.basis
        span = float(ens.times[-1] - ens.times[0])
        n = ens.n_paths
        per_path = np.full(n, basis.a(i, 1) * basis.a(j, 1) * basis.model.sigma2 * span)
        if len(ens.jump_sizes):
            prod = np.asarray(eval_p(basis, i, ens.jump_sizes)) * \
                np.asarray(eval_p(basis, j, ens.jump_sizes))
            per_path += np.bincount(ens.jump_path, weights=prod, minlength=n)
    else:
        if basis is None:
            raise ValueError("basis required for a list of TeugelsIncrements")
        span = float(ens[0].times[-1] - ens[0].times[0])
        n = len(ens)
        base = basis.a(i, 1) * basis.a(j, 1) * basis.model.sigma2 * span
        per_path = np.array([
            base + float(np.sum(np.asarray(eval_p(basis, i, inc.jump_sizes)) *
                                np.asarray(eval_p(basis, j, inc.jump_sizes))))
            for inc in ens
        ])
    per_path = per_path / span
    mean = float(np.mean(per_path))
    stderr = float(np.std(per_path, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, stderr
