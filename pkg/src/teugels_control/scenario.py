"""Scenario files: sectioned key = value text mapping onto solver inputs.

A scenario is one UTF-8 file with bracketed section headers, '#' comments,
and key = value lines.  Parsing is strict: unknown sections or keys, missing
required keys, and type mismatches are collected and reported together as
errors, each naming its section and key.  Seeds are always explicit; nothing
defaults to wall-clock state.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .coefficients import (
    CONTROL_DRIVER_KINDS,
    DRIVER_KINDS,
    FORWARD_KINDS,
    TERMINAL_KINDS,
    ControlDriver,
    Driver,
    Terminal,
    make_control_driver,
    make_driver,
    make_forward,
    make_terminal,
)
from .control_value import ControlProblem, DpConfig, ValueLattice
from .hjb_solver import HjbConfig, SpatialGrid
from .levy_model import KIND_NONE, KIND_POINT, KIND_TWO_EXP, JumpMeasure, LevyModel
from .teugels_basis import build_basis


class ScenarioError(ValueError):
    """All validation problems of one file, each naming section and key."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        lines = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"invalid scenario:\n{lines}")


SECTIONS = ("model", "basis", "paths", "bsde", "problem",
            "lattice", "grid", "hjb", "outputs")

OUTPUT_FILE_KEYS = {
    "basis_csv": "basis.csv",
    "brackets_csv": "brackets.csv",
    "bsde_csv": "bsde.csv",
    "value_csv": "value_mc.csv",
    "surface_csv": "hjb_surface.csv",
    "convergence_csv": "hjb_convergence.csv",
    "compare_csv": "compare.csv",
    "accept_csv": "acceptance.csv",
    "manifest_json": "manifest.json",
}


@dataclass(frozen=True)
class PathsConfig:
    M: int
    N: int
    seed: int


@dataclass(frozen=True)
class Scenario:
    model: LevyModel
    basis_K: int
    paths: PathsConfig
    bsde_driver: Driver
    bsde_terminal: Terminal
    bsde_degree: int
    problem: ControlProblem
    lattice: ValueLattice
    dp: DpConfig
    grid: SpatialGrid
    hjb: HjbConfig
    out_dir: str | None
    filenames: dict[str, str] = field(repr=False)
    digest: str = ""


class _Section:
    """Typed reads of one section's keys; records every problem found."""

    def __init__(self, name: str, raw: dict[str, str], errors: list[str]):
        self.name = name
        self.raw = raw
        self.seen: set[str] = set()
        self.errors = errors

    def error(self, key: str, reason: str) -> None:
        self.errors.append(f"[{self.name}] {key}: {reason}")

    def _fetch(self, key: str, required: bool):
        self.seen.add(key)
        if key not in self.raw:
            if required:
                self.error(key, "missing required key")
            return None
        return self.raw[key].strip()

    def _number(self, key: str, required: bool, default, conv, type_name: str,
                check=None):
        text = self._fetch(key, required)
        if text is None:
            return default
        try:
            val = conv(text)
        except ValueError:
            self.error(key, f"expected {type_name}, got {text!r}")
            return default
        if check is not None:
            reason = check(val)
            if reason:
                self.error(key, reason)
                return default
        return val

    def req_float(self, key: str, check=None) -> float | None:
        return self._number(key, True, None, float, "a real number", check)

    def opt_float(self, key: str, default: float, check=None) -> float:
        return self._number(key, False, default, float, "a real number", check)

    def req_int(self, key: str, check=None) -> int | None:
        return self._number(key, True, None, int, "an integer", check)

    def opt_int(self, key: str, default: int, check=None) -> int:
        return self._number(key, False, default, int, "an integer", check)

    def req_choice(self, key: str, choices) -> str | None:
        text = self._fetch(key, True)
        if text is None:
            return None
        if text not in choices:
            self.error(key, f"unknown value {text!r}; known: {', '.join(choices)}")
            return None
        return text

    def opt_str(self, key: str, default: str | None) -> str | None:
        text = self._fetch(key, False)
        return default if text is None else text

    def float_list(self, key: str, required: bool) -> tuple[float, ...] | None:
        text = self._fetch(key, required)
        if text is None:
            return None if required else ()
        try:
            return tuple(float(tok) for tok in text.split(","))
        except ValueError:
            self.error(key, f"expected comma-separated reals, got {text!r}")
            return None if required else ()

    def finish(self) -> None:
        for key in sorted(set(self.raw) - self.seen):
            self.error(key, "unknown key")


def _positive(name: str):
    return lambda v: None if v > 0 else f"{name} must be positive, got {v}"


def _at_least(n: int):
    return lambda v: None if v >= n else f"must be at least {n}, got {v}"


def _parse_model(sec: _Section) -> LevyModel | None:
    b = sec.req_float("b")
    sigma2 = sec.req_float("sigma2", lambda v: None if v >= 0 else
                           f"must be nonnegative, got {v}")
    kind = sec.req_choice("jump.kind", (KIND_NONE, KIND_POINT, KIND_TWO_EXP))
    # 0 marks "not given"; the caller fills in 2K + 2 once K is known
    i_max = sec.opt_int("i_max", 0, _at_least(2))

    jumps = None
    if kind == KIND_NONE:
        jumps = JumpMeasure.none()
    elif kind == KIND_POINT:
        locs = sec.float_list("jump.locations", True)
        lams = sec.float_list("jump.intensities", True)
        if locs is not None and lams is not None:
            if len(locs) != len(lams):
                sec.error("jump.locations",
                          f"{len(locs)} locations but {len(lams)} intensities")
            elif any(c == 0.0 for c in locs):
                sec.error("jump.locations", "locations must be nonzero")
            elif any(l <= 0.0 for l in lams):
                sec.error("jump.intensities", "intensities must be positive")
            else:
                jumps = JumpMeasure.point_masses(list(zip(locs, lams)))
    elif kind == KIND_TWO_EXP:
        lam = sec.req_float("jump.lam", _positive("lam"))
        p = sec.req_float("jump.p", lambda v: None if 0.0 <= v <= 1.0 else
                          f"must lie in [0, 1], got {v}")
        alpha = sec.req_float("jump.alpha", _positive("alpha"))
        beta = sec.req_float("jump.beta", _positive("beta"))
        if None not in (lam, p, alpha, beta):
            jumps = JumpMeasure.two_sided_exponential(lam, p, alpha, beta)

    if None in (b, sigma2) or jumps is None:
        return None
    if sigma2 == 0.0 and jumps.kind == KIND_NONE:
        sec.error("sigma2", "degenerate deterministic process "
                  "(sigma2 = 0 with no jumps) is rejected")
        return None
    if i_max:
        return LevyModel(b=b, sigma2=sigma2, jumps=jumps, i_max=i_max)
    return LevyModel(b=b, sigma2=sigma2, jumps=jumps)


def _parse_driver(sec: _Section, make, kinds) -> Driver | ControlDriver | None:
    kind = sec.req_choice("driver", kinds)
    a = sec.opt_float("driver.a", 0.0)
    b = sec.opt_float("driver.b", 0.0)
    gamma = sec.float_list("driver.gamma", False)
    kwargs = {"a": a, "b": b, "gamma": gamma or ()}
    if make is make_driver:
        kwargs["c"] = sec.opt_float("driver.c", 0.0)
    if kind is None:
        return None
    return make(kind, **kwargs)


def _parse_terminal(sec: _Section) -> Terminal | None:
    kind = sec.req_choice("terminal", TERMINAL_KINDS)
    value = sec.opt_float("terminal.value", 0.0)
    scale = sec.opt_float("terminal.scale", 1.0)
    if kind is None:
        return None
    return make_terminal(kind, value=value, scale=scale)


def parse_scenario(text: str, digest: str = "") -> Scenario:
    """Validate scenario text; raises ScenarioError listing every problem."""
    errors: list[str] = []
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        strict=True, interpolation=None, default_section="#default#")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError([f"file: not parseable: {exc}"]) from exc

    present = {name: dict(parser[name]) for name in parser.sections()}
    for name in sorted(set(present) - set(SECTIONS)):
        errors.append(f"[{name}]: unknown section")
    for name in SECTIONS:
        if name not in present and name != "outputs":
            errors.append(f"[{name}]: missing required section")

    def section(name: str) -> _Section:
        return _Section(name, present.get(name, {}), errors)

    sec = section("model")
    model = _parse_model(sec) if "model" in present else None
    sec.finish()

    sec = section("basis")
    K = sec.req_int("K", lambda v: None if 1 <= v <= 8 else
                    f"must lie in 1..8, got {v}") if "basis" in present else None
    sec.finish()

    sec = section("paths")
    if "paths" in present:
        M = sec.req_int("M", _at_least(1))
        N = sec.req_int("N", _at_least(1))
        seed = sec.req_int("seed")
        paths = PathsConfig(M, N, seed) if None not in (M, N, seed) else None
    else:
        paths = None
    sec.finish()

    sec = section("bsde")
    if "bsde" in present:
        bsde_driver = _parse_driver(sec, make_driver, DRIVER_KINDS)
        bsde_terminal = _parse_terminal(sec)
        bsde_degree = sec.opt_int("degree", 3, lambda v: None if 0 <= v <= 3 else
                                  f"must lie in 0..3, got {v}")
    else:
        bsde_driver = bsde_terminal = None
        bsde_degree = 3
    sec.finish()

    sec = section("problem")
    problem = None
    if "problem" in present:
        fwd_kind = sec.req_choice("forward", FORWARD_KINDS)
        c0 = sec.opt_float("forward.c0", 0.0)
        c1 = sec.opt_float("forward.c1", 0.0)
        c2 = sec.opt_float("forward.c2", 0.0)
        ctrl_driver = _parse_driver(sec, make_control_driver, CONTROL_DRIVER_KINDS)
        terminal = _parse_terminal(sec)
        controls = sec.float_list("controls", True)
        if controls is not None and len(controls) == 0:
            sec.error("controls", "must list at least one control value")
            controls = None
        horizon = sec.req_float("horizon", _positive("horizon"))
        lipschitz = sec.float_list("lipschitz", False)
        if lipschitz and len(lipschitz) != 3:
            sec.error("lipschitz", f"expected 3 constants, got {len(lipschitz)}")
            lipschitz = ()
        if None not in (fwd_kind, ctrl_driver, terminal, controls, horizon):
            forward = make_forward(fwd_kind, c0=c0, c1=c1, c2=c2)
            if not lipschitz:
                lipschitz = (forward.lipschitz_x, ctrl_driver.lipschitz_y,
                             ctrl_driver.lipschitz_z)
            problem = ControlProblem(forward=forward, driver=ctrl_driver,
                                     terminal=terminal, controls=controls,
                                     horizon=horizon, lipschitz=tuple(lipschitz))
    sec.finish()

    sec = section("lattice")
    lattice = None
    dp = None
    if "lattice" in present:
        x_min = sec.req_float("x_min")
        x_max = sec.req_float("x_max")
        n_x = sec.req_int("n_x", _at_least(2))
        n_t = sec.req_int("n_t", _at_least(2))
        n_paths = sec.req_int("n_paths", _at_least(100))
        substeps = sec.opt_int("substeps", 8, _at_least(1))
        lat_seed = sec.req_int("seed")
        lat_degree = sec.opt_int("degree", 3, lambda v: None if 0 <= v <= 3 else
                                 f"must lie in 0..3, got {v}")
        if None not in (x_min, x_max, n_x, n_t, n_paths, lat_seed):
            if x_max <= x_min:
                sec.error("x_max", f"must exceed x_min={x_min}, got {x_max}")
            elif problem is not None:
                lattice = ValueLattice(
                    t_nodes=np.linspace(0.0, problem.horizon, n_t),
                    x_nodes=np.linspace(x_min, x_max, n_x))
                dp = DpConfig(n_paths=n_paths, substeps=substeps,
                              seed=lat_seed, degree=lat_degree)
    sec.finish()

    sec = section("grid")
    grid = None
    if "grid" in present:
        gx_min = sec.req_float("x_min")
        gx_max = sec.req_float("x_max")
        n_nodes = sec.req_int("n_nodes", _at_least(3))
        if None not in (gx_min, gx_max, n_nodes):
            if gx_max <= gx_min:
                sec.error("x_max", f"must exceed x_min={gx_min}, got {gx_max}")
            else:
                grid = SpatialGrid(gx_min, gx_max, n_nodes)
    sec.finish()

    sec = section("hjb")
    hjb = None
    if "hjb" in present:
        n_steps = sec.opt_int("n_steps", 0, _at_least(0))
        quad_order = sec.opt_int("quad_order", 16, _at_least(2))
        cfl_safety = sec.opt_float("cfl_safety", 0.9,
                                   lambda v: None if 0.0 < v < 1.0 else
                                   f"must lie in (0, 1), got {v}")
        k_dim = sec.opt_int("k_dim", 1, _at_least(1))
        report_slices = sec.opt_int("report_slices", 11, _at_least(2))
        hjb = HjbConfig(n_steps=n_steps, quad_order=quad_order,
                        cfl_safety=cfl_safety, k_dim=k_dim,
                        report_slices=report_slices)
    sec.finish()

    sec = section("outputs")
    out_dir = sec.opt_str("directory", None)
    filenames = dict(OUTPUT_FILE_KEYS)
    for key in OUTPUT_FILE_KEYS:
        name = sec.opt_str(key, filenames[key])
        if name is not None:
            filenames[key] = name
    sec.finish()

    # cross-section consistency, only on parts that parsed cleanly
    if model is not None and K is not None:
        if "i_max" not in present.get("model", {}):
            model = LevyModel(b=model.b, sigma2=model.sigma2, jumps=model.jumps,
                              i_max=max(2 * K + 2, model.i_max))
        if model.i_max < 2 * K + 2:
            errors.append(f"[model] i_max: must be at least 2K+2 = {2 * K + 2} "
                          f"for K = {K}, got {model.i_max}")
        else:
            try:
                built = build_basis(model, K)
            except ValueError as exc:
                errors.append(f"[basis] K: {exc}")
            else:
                if built.K < K:
                    errors.append(f"[basis] K: K exceeds basis rank {built.K}")
    if K is not None and hjb is not None and hjb.k_dim > K:
        errors.append(f"[hjb] k_dim: must not exceed K = {K}, got {hjb.k_dim}")
    if K is not None and bsde_driver is not None and len(bsde_driver.gamma) > K:
        errors.append(f"[bsde] driver.gamma: {len(bsde_driver.gamma)} components "
                      f"exceed K = {K}")
    if K is not None and problem is not None and len(problem.driver.gamma) > K:
        errors.append(f"[problem] driver.gamma: {len(problem.driver.gamma)} "
                      f"components exceed K = {K}")

    if errors:
        raise ScenarioError(errors)
    return Scenario(model=model, basis_K=K, paths=paths,
                    bsde_driver=bsde_driver, bsde_terminal=bsde_terminal,
                    bsde_degree=bsde_degree, problem=problem, lattice=lattice,
                    dp=dp, grid=grid, hjb=hjb, out_dir=out_dir,
                    filenames=filenames, digest=digest)


def load_scenario(path: str) -> Scenario:
    """Read, digest, and validate a scenario file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    digest = hashlib.sha256(raw).hexdigest()
    return parse_scenario(raw.decode("utf-8"), digest=digest)
