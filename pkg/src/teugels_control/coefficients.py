"""Registry of coefficient functions used by solvers and scenario files.

Every driver, terminal, forward coefficient and control-cost shape that a
scenario can name lives here, so text configs map one-to-one onto callables.
Drivers are vectorized over paths: y has shape (N,), z has shape (N, K).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Driver:
    """BSDE driver f(t, x, y, z) with optional linear-in-z decomposition.

    For kinds in the linear class the driver splits as f1(t, y) + gamma . z
    with gamma a constant vector; the comparison checker requires that split.
    lipschitz_y / lipschitz_z are the declared constants of the kind.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    gamma: tuple[float, ...] = ()

    def __call__(self, t, x, y, z) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        base = np.zeros_like(y)
        if self.kind == "zero":
            return base
        if self.kind == "constant":
            return base + self.a
        if self.kind == "linear_y":
            return self.a + self.b * y
        if self.kind == "time_affine":
            return base + self.a + self.c * t
        if self.kind == "linear_z":
            out = self.a + self.b * y
            if self.gamma:
                g = np.asarray(self.gamma)
                zz = np.asarray(z, dtype=np.float64)
                out = out + zz[..., : len(g)] @ g
            return out
        raise ValueError(f"unknown driver kind {self.kind!r}")

    @property
    def z_free(self) -> bool:
        return self.kind in ("zero", "constant", "linear_y", "time_affine") or \
            (self.kind == "linear_z" and not any(self.gamma))

    @property
    def lipschitz_y(self) -> float:
        return abs(self.b)

    @property
    def lipschitz_z(self) -> float:
        if self.kind == "linear_z" and self.gamma:
            return float(np.linalg.norm(self.gamma))
        return 0.0

    def f1(self, t, y) -> np.ndarray:
        """z-free part of the linear decomposition."""
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "time_affine":
            return np.zeros_like(y) + self.a + self.c * t
        return self.a + self.b * y + np.zeros_like(y)

    def ode_parts(self) -> tuple:
        """(a(t), b(t)) of dY = -(a + bY) dt for z-free kinds, for the ODE oracle."""
        if not self.z_free:
            raise ValueError("driver is not z-free; no scalar ODE form")
        if self.kind == "time_affine":
            return (lambda t: self.a + self.c * t), (lambda t: 0.0)
        return (lambda t: self.a), (lambda t: self.b)


DRIVER_KINDS = ("zero", "constant", "linear_y", "time_affine", "linear_z")


def make_driver(kind: str, *, a: float = 0.0, b: float = 0.0, c: float = 0.0,
                gamma: tuple[float, ...] = ()) -> Driver:
    if kind not in DRIVER_KINDS:
        raise ValueError(f"unknown driver kind {kind!r}; known: {DRIVER_KINDS}")
    return Driver(kind=kind, a=a, b=b, c=c, gamma=tuple(float(g) for g in gamma))


@dataclass(frozen=True)
class Terminal:
    """Terminal functional of the forward state: g(x)."""

    kind: str
    value: float = 0.0
    scale: float = 1.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "constant":
            return np.full_like(x, self.value)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "linear":
            return self.scale * x
        if self.kind == "affine":
            return self.scale * x + self.value
        if self.kind == "quadratic":
            # value acts as an additive offset here too
            return self.scale * x * x + self.value
        raise ValueError(f"unknown terminal kind {self.kind!r}")

    def shifted(self, eps: float) -> "Terminal":
        """Same functional plus the constant eps."""
        if self.kind == "constant":
            return Terminal(kind="constant", value=self.value + eps)
        if self.kind == "identity":
            return Terminal(kind="affine", value=eps, scale=1.0)
        if self.kind == "linear":
            return Terminal(kind="affine", value=eps, scale=self.scale)
        return Terminal(kind=self.kind, value=self.value + eps, scale=self.scale)

    @property
    def lipschitz(self) -> float:
        """Global Lipschitz constant where one exists; None-like inf for quadratic."""
        if self.kind == "constant":
            return 0.0
        if self.kind in ("identity",):
            return 1.0
        if self.kind in ("linear", "affine"):
            return abs(self.scale)
        return float("inf")


TERMINAL_KINDS = ("constant", "identity", "linear", "affine", "quadratic")


def make_terminal(kind: str, *, value: float = 0.0, scale: float = 1.0) -> Terminal:
    if kind not in TERMINAL_KINDS:
        raise ValueError(f"unknown terminal kind {kind!r}; known: {TERMINAL_KINDS}")
    return Terminal(kind=kind, value=value, scale=scale)


@dataclass(frozen=True)
class ForwardCoefficient:
    """State coefficient F(t, x, u) multiplying dL in the controlled forward SDE."""

    kind: str
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0

    def __call__(self, t, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "constant":
            return np.full_like(x, self.c0)
        if self.kind == "linear":
            return self.c1 * x
        if self.kind == "affine_u":
            return self.c0 + self.c1 * x + self.c2 * np.asarray(u, dtype=np.float64) \
                + np.zeros_like(x)
        raise ValueError(f"unknown forward coefficient kind {self.kind!r}")

    @property
    def lipschitz_x(self) -> float:
        if self.kind == "constant":
            return 0.0
        return abs(self.c1)

    def bound_on(self, x_lo: float, x_hi: float, controls) -> float:
        """max |F| over a state interval and a finite control set."""
        corners = []
        for x in (x_lo, x_hi):
            for u in controls:
                corners.append(abs(float(self(0.0, np.float64(x), u))))
        return max(corners)


FORWARD_KINDS = ("constant", "linear", "affine_u")


def make_forward(kind: str, *, c0: float = 0.0, c1: float = 0.0,
                 c2: float = 0.0) -> ForwardCoefficient:
    if kind not in FORWARD_KINDS:
        raise ValueError(f"unknown forward coefficient kind {kind!r}; known: {FORWARD_KINDS}")
    return ForwardCoefficient(kind=kind, c0=c0, c1=c1, c2=c2)


@dataclass(frozen=True)
class ControlDriver:
    """Running cost f(t, x, y, z, u) for controlled problems."""

    kind: str
    a: float = 0.0
    b: float = 0.0
    gamma: tuple[float, ...] = ()

    def __call__(self, t, x, y, z, u) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "constant":
            return np.zeros_like(y) + self.a
        if self.kind == "linear_y":
            return self.a + self.b * y + np.zeros_like(y)
        if self.kind == "control_cost":
            # a * u^2 + b * y; convex in the control, linear in y
            uu = np.asarray(u, dtype=np.float64)
            return self.a * uu * uu + self.b * y + np.zeros_like(y)
        if self.kind == "linear_z":
            out = self.a + self.b * y + np.zeros_like(y)
            if self.gamma:
                g = np.asarray(self.gamma)
                zz = np.asarray(z, dtype=np.float64)
                out = out + zz[..., : len(g)] @ g
            return out
        raise ValueError(f"unknown control driver kind {self.kind!r}")

    @property
    def lipschitz_y(self) -> float:
        return abs(self.b)

    @property
    def lipschitz_z(self) -> float:
        if self.kind == "linear_z" and self.gamma:
            return float(np.linalg.norm(self.gamma))
        return 0.0


CONTROL_DRIVER_KINDS = ("zero", "constant", "linear_y", "control_cost", "linear_z")


def make_control_driver(kind: str, *, a: float = 0.0, b: float = 0.0,
                        gamma: tuple[float, ...] = ()) -> ControlDriver:
    if kind not in CONTROL_DRIVER_KINDS:
        raise ValueError(f"unknown control driver kind {kind!r}; known: {CONTROL_DRIVER_KINDS}")
    return ControlDriver(kind=kind, a=a, b=b, gamma=tuple(float(g) for g in gamma))
