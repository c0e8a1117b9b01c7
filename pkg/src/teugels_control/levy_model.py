"""Finite-activity Levy models and their power moments.

A model is a drift, a Brownian variance and a jump measure from one of three
parametric families (no jumps, finitely many point masses, two-sided
exponential).  Everything downstream (orthonormal bases, simulation, solvers)
consumes the model only through the moment table and the weighted inner
product defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

KIND_NONE = "none"
KIND_POINT = "point_masses"
KIND_TWO_EXP = "two_sided_exponential"

DEFAULT_I_MAX = 10


@dataclass(frozen=True)
class JumpMeasure:
    """Jump measure nu restricted to finite-activity parametric families.

    kind "none"                   : nu = 0.
    kind "point_masses"           : nu = sum_j intensities[j] * delta(locations[j]),
                                    locations nonzero, intensities positive.
    kind "two_sided_exponential"  : density lam * (p * alpha * exp(-alpha x) on x > 0
                                    plus (1 - p) * beta * exp(beta x) on x < 0).
    """

    kind: str
    locations: tuple[float, ...] = ()
    intensities: tuple[float, ...] = ()
    lam: float = 0.0
    p_up: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (KIND_NONE, KIND_POINT, KIND_TWO_EXP):
            raise ValueError(f"unknown jump measure kind {self.kind!r}")
        if self.kind == KIND_POINT:
            if len(self.locations) != len(self.intensities) or not self.locations:
                raise ValueError("point_masses needs matching nonempty locations and intensities")
            if any(c == 0.0 for c in self.locations):
                raise ValueError("point mass location must be nonzero")
            if any(l <= 0.0 for l in self.intensities):
                raise ValueError("point mass intensity must be positive")
        if self.kind == KIND_TWO_EXP:
            if self.lam <= 0.0:
                raise ValueError("two_sided_exponential needs lam > 0")
            if not 0.0 <= self.p_up <= 1.0:
                raise ValueError("two_sided_exponential needs p in [0, 1]")
            if self.alpha <= 0.0 or self.beta <= 0.0:
                raise ValueError("two_sided_exponential needs alpha, beta > 0")

    @staticmethod
    def none() -> "JumpMeasure":
        return JumpMeasure(KIND_NONE)

    @staticmethod
    def point_masses(atoms: list[tuple[float, float]]) -> "JumpMeasure":
        """Atoms as (location, intensity) pairs."""
        locs = tuple(float(c) for c, _ in atoms)
        lams = tuple(float(l) for _, l in atoms)
        return JumpMeasure(KIND_POINT, locations=locs, intensities=lams)

    @staticmethod
    def two_sided_exponential(lam: float, p_up: float, alpha: float, beta: float) -> "JumpMeasure":
        return JumpMeasure(KIND_TWO_EXP, lam=float(lam), p_up=float(p_up),
                           alpha=float(alpha), beta=float(beta))

    @property
    def total_mass(self) -> float:
        """nu(R), the expected jump arrival rate."""
        if self.kind == KIND_NONE:
            return 0.0
        if self.kind == KIND_POINT:
            return float(sum(self.intensities))
        return self.lam

    def raw_moment(self, i: int) -> float:
        """integral x^i nu(dx) for i >= 0 (i = 0 gives the total mass)."""
        if i < 0:
            raise ValueError("moment order must be nonnegative")
        if self.kind == KIND_NONE:
            return 0.0
        if self.kind == KIND_POINT:
            return float(math.fsum(l * c**i for c, l in zip(self.locations, self.intensities)))
        fact = float(math.factorial(i))
        pos = self.p_up * fact / self.alpha**i
        neg = (1.0 - self.p_up) * ((-1.0) ** i) * fact / self.beta**i
        return self.lam * (pos + neg)

    def small_jump_mean(self) -> float:
        """integral of x over |x| < 1, the compensator folded into the drift."""
        if self.kind == KIND_NONE:
            return 0.0
        if self.kind == KIND_POINT:
            return float(math.fsum(l * c for c, l in zip(self.locations, self.intensities)
                                   if abs(c) < 1.0))
        # integral_0^1 x a e^{-ax} dx = (1 - e^{-a})/a - e^{-a}, mirrored on the left
        up = (1.0 - math.exp(-self.alpha)) / self.alpha - math.exp(-self.alpha)
        dn = (1.0 - math.exp(-self.beta)) / self.beta - math.exp(-self.beta)
        return self.lam * (self.p_up * up - (1.0 - self.p_up) * dn)

    def sample_sizes(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n i.i.d. jump sizes from the normalized measure."""
        if n == 0:
            return np.zeros(0)
        if self.kind == KIND_NONE:
            raise ValueError("cannot sample jump sizes from an empty measure")
        if self.kind == KIND_POINT:
            probs = np.asarray(self.intensities) / self.total_mass
            idx = rng.choice(len(self.locations), size=n, p=probs)
            return np.asarray(self.locations)[idx]
        up = rng.random(n) < self.p_up
        out = np.where(up,
                       rng.exponential(1.0 / self.alpha, size=n),
                       -rng.exponential(1.0 / self.beta, size=n))
        return out


@dataclass(frozen=True)
class MomentTable:
    """Moments m_1..m_i_max of a model.

    m_1 carries the drift convention (mean rate of the whole process); m_i for
    i >= 2 is the i-th power moment of the jump measure alone.  Even entries
    of index >= 2 must be nonnegative and the family must satisfy
    Cauchy-Schwarz, both checked at build time.
    """

    i_max: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.i_max < 2:
            raise ValueError("i_max must be at least 2")
        if len(self.values) != self.i_max:
            raise ValueError("moment table length mismatch")
        for i in range(2, self.i_max + 1, 2):
            if self.values[i - 1] < 0.0:
                raise ValueError(f"even moment m_{i} is negative: {self.values[i - 1]}")
        # indices start at 1 on both sides, so m_1 (which mixes in the drift)
        # never enters the bilinear bound
        for i in range(1, self.i_max // 2 + 1):
            for j in range(1, self.i_max // 2 + 1):
                lhs = self.values[i + j - 1] ** 2
                rhs = self.values[2 * i - 1] * self.values[2 * j - 1]
                if lhs > rhs * (1.0 + 1e-12) + 1e-300:
                    raise ValueError(f"Cauchy-Schwarz violated at m_{i + j}")

    def m(self, i: int) -> float:
        if not 1 <= i <= self.i_max:
            raise ValueError(f"moment index {i} exceeds i_max={self.i_max}")
        return self.values[i - 1]


@dataclass(frozen=True)
class LevyModel:
    """Levy triplet (b, sigma2, jumps) with moments exposed up to i_max."""

    b: float
    sigma2: float
    jumps: JumpMeasure
    i_max: int = DEFAULT_I_MAX

    def __post_init__(self) -> None:
        if self.sigma2 < 0.0:
            raise ValueError("sigma2 must be nonnegative")
        if self.i_max < 2:
            raise ValueError("i_max must be at least 2")

    @cached_property
    def m1(self) -> float:
        """Mean rate: drift plus the large-jump first moment."""
        return self.b + self.jumps.raw_moment(1) - self.jumps.small_jump_mean()

    @cached_property
    def drift_rate(self) -> float:
        """Simulated drift per unit time after folding the small-jump compensator."""
        return self.b - self.jumps.small_jump_mean()

    def moment(self, i: int) -> float:
        """m_1 is the mean rate; m_i = integral x^i nu(dx) for 2 <= i <= i_max."""
        if i < 1 or i > self.i_max:
            raise ValueError(f"moment index {i} outside 1..i_max={self.i_max}")
        if i == 1:
            return self.m1
        return self.jumps.raw_moment(i)

    @cached_property
    def moments(self) -> MomentTable:
        vals = tuple(self.moment(i) for i in range(1, self.i_max + 1))
        return MomentTable(i_max=self.i_max, values=vals)

    def mu_inner(self, i: int, j: int) -> float:
        """Inner product of x^i and x^j under mu(dx) = x^2 nu(dx) + sigma2 delta_0.

        Equals m_{i+j+2} plus sigma2 when i = j = 0.
        """
        if i < 0 or j < 0:
            raise ValueError("monomial degrees must be nonnegative")
        order = i + j + 2
        if order > self.i_max:
            raise ValueError(f"moment index {order} exceeds i_max={self.i_max}")
        val = self.jumps.raw_moment(order)
        if i == 0 and j == 0:
            val += self.sigma2
        return val

    def gram(self, size: int) -> np.ndarray:
        """Gram matrix of monomials 1, x, .., x^{size-1} under mu."""
        g = np.empty((size, size))
        for i in range(size):
            for j in range(size):
                g[i, j] = self.mu_inner(i, j)
        return g


def validate(model: LevyModel) -> list[str]:
    """Diagnostics (not errors): degeneracies and overflow risks."""
    notes: list[str] = []
    if model.sigma2 == 0.0 and model.jumps.kind == KIND_NONE:
        notes.append("degenerate: deterministic drift (sigma2 = 0 and no jumps)")
    if model.sigma2 == 0.0 and model.jumps.kind != KIND_NONE:
        notes.append("no diffusion part: basis rank limited to the jump atom count")
    top = model.jumps.raw_moment(model.i_max)
    if not math.isfinite(top):
        notes.append(f"moment m_{model.i_max} is not finite")
    elif abs(top) > 1e12:
        notes.append(f"moment m_{model.i_max} is large ({top:.3e}); "
                     "Gram conditioning may degrade")
    if model.jumps.kind == KIND_TWO_EXP and min(model.jumps.alpha, model.jumps.beta) < 0.5:
        notes.append("heavy exponential tail (rate < 0.5): high moments grow fast")
    return notes
