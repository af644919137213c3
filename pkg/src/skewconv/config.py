"""Flat ``section.key = value`` experiment configuration.

Values are parsed by the field type of the owning block.  Elements of H or
of the entrance space are written in a small expression syntax::

    vec(1, 0)            coordinate vector (matrix kind)
    bump(c, w[, h])      h exp(-(y - c)^2 / (2 w^2)) on a grid kind
    unit_bump(c, w)      the same bump scaled to unit H norm
    delta(z:w, z:w)      heat-kernel measure path; plane atoms as "z1 z2:w"
    absorb(a; z:w, ...)  a k_s + sum w p_s(z, .) on the absorbing half-line
    zero                 the zero element

Lists of weighted elements (``law.gaussian``, ``law.jumps``) separate
entries with ``|`` and prefix each with its coefficient: ``1.0 vec(1)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from typing import NewType, get_type_hints

import numpy as np

from .entrance import (
    AbsorbingMeasure,
    EntranceNormParams,
    EntrancePath,
    HeatMeasure,
    SignedMeasureAtoms,
    embed_J,
)
from .grid import GridFunction
from .sclaw import IDLaw, SCSemigroupSpec
from .semigroup import (
    SemigroupSpec,
    absorbing_halfline,
    heat_line,
    heat_plane,
    matrix_semigroup,
)

KINDS = ("matrix", "heat_line", "heat_plane", "absorbing_halfline")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


Floats = NewType("Floats", tuple)  # comma-separated floats
Entries = NewType("Entries", tuple)  # "|"-separated "coef element" pairs
Element = NewType("Element", str)


@dataclass(frozen=True)
class SemigroupBlock:
    kind: str = "matrix"
    matrix: str = "-1"
    half_width: float | None = None  # none: the kind's default
    length: float = 10.0
    count: int | None = None
    weight: str = "gamma"
    c0: float | None = None
    b0: float | None = None


@dataclass(frozen=True)
class EntranceBlock:
    b: float | None = None
    alpha: float | None = None
    s_min: float = 1e-4
    s_max: float | None = None
    rho: float = 1.1
    order: int = 4
    tolerance: float = 1e-6


@dataclass(frozen=True)
class LawBlock:
    mode: str = "differentiable"
    gaussian: Entries = ()
    jumps: Entries = ()


@dataclass(frozen=True)
class SimulationBlock:
    x0: Element = "zero"
    times: Floats = (0.5, 1.0)
    n_steps: int = 256
    n_paths: int = 1000
    seed: int = 1
    section: float = 0.0
    test_functions: Entries = ()
    write_paths: int = 5


@dataclass(frozen=True)
class VerifyBlock:
    random_cases: int = 100
    mc_paths: int = 20000
    sc_pairs: int = 5
    functionals: int = 20


@dataclass(frozen=True)
class OutputsBlock:
    dir: str = "out"
    pairings: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    semigroup: SemigroupBlock = field(default_factory=SemigroupBlock)
    entrance: EntranceBlock = field(default_factory=EntranceBlock)
    law: LawBlock = field(default_factory=LawBlock)
    simulation: SimulationBlock = field(default_factory=SimulationBlock)
    verify: VerifyBlock = field(default_factory=VerifyBlock)
    outputs: OutputsBlock = field(default_factory=OutputsBlock)


SECTIONS = {f.name: f.default_factory for f in fields(ExperimentConfig)}


# ---------------------------------------------------------------- parsing

def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _parse_value(key: str, hint, raw: str):
    raw = raw.strip()
    try:
        if hint is Floats:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if hint is Entries:
            return tuple(e.strip() for e in raw.split("|") if e.strip())
        if hint is bool:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {raw!r}")
            return raw.lower() in ("true", "1", "yes")
        if hint in (float | None, int | None) and raw.lower() in ("", "none", "auto"):
            return None
        if hint in (float, float | None):
            return float(raw)
        if hint in (int, int | None):
            return int(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt_float(v)
    if isinstance(v, tuple):
        if all(isinstance(x, float) for x in v) and v:
            return ", ".join(_fmt_float(x) for x in v)
        return " | ".join(v)
    return str(v)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises ``ConfigError`` naming the offending key."""
    values: dict[str, dict] = {name: {} for name in SECTIONS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'section.key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(key, "unknown section")
        block = SECTIONS[section]
        hints = get_type_hints(block)
        if name not in hints:
            raise ConfigError(key, "unknown key")
        if name in values[section]:
            raise ConfigError(key, "duplicate key")
        values[section][name] = _parse_value(key, hints[name], raw)
    cfg = ExperimentConfig(**{s: replace(SECTIONS[s](), **values[s]) for s in SECTIONS})
    build(cfg)  # re-validate every constraint of the referenced modules
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical form: every key, section order fixed, floats at 17 digits."""
    lines = []
    for s in SECTIONS:
        block = getattr(cfg, s)
        for f in fields(block):
            lines.append(f"{s}.{f.name} = {_format_value(getattr(block, f.name))}")
    return "\n".join(lines) + "\n"


def with_seed(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return cfg
    return replace(cfg, simulation=replace(cfg.simulation, seed=int(seed)))


# ------------------------------------------------------------- building

@dataclass(frozen=True, eq=False)
class Experiment:
    config: ExperimentConfig
    spec: SemigroupSpec
    params: EntranceNormParams
    alpha: float
    sc: SCSemigroupSpec
    x0: EntrancePath
    test_functions: tuple


def _matrix(key, raw: str) -> np.ndarray:
    try:
        rows = [[float(v) for v in r.replace(",", " ").split()] for r in raw.split(";")]
        a = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(key, "matrix must be square; separate rows with ';'")
    return a


def build_semigroup(blk: SemigroupBlock) -> SemigroupSpec:
    if blk.kind not in KINDS:
        raise ConfigError("semigroup.kind", f"expected one of {KINDS}")
    if blk.kind == "matrix":
        return matrix_semigroup(_matrix("semigroup.matrix", blk.matrix), c0=blk.c0, b0=blk.b0)
    if blk.c0 is not None or blk.b0 is not None:
        raise ConfigError("semigroup.c0", "growth overrides apply to the matrix kind only")
    if blk.count is not None and blk.count < 3:
        raise ConfigError("semigroup.count", "need at least 3 grid points")
    grid = {k: v for k, v in (("half_width", blk.half_width), ("count", blk.count)) if v is not None}
    if blk.kind == "heat_line":
        return heat_line(**grid)
    if blk.kind == "heat_plane":
        return heat_plane(**grid)
    grid.pop("half_width", None)
    try:
        return absorbing_halfline(blk.length, weight=blk.weight, **grid)
    except ValueError as exc:
        raise ConfigError("semigroup.weight", str(exc)) from None


_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$", re.S)


def _atoms(key, body: str, dim: int) -> SignedMeasureAtoms:
    pairs = []
    for item in body.split(","):
        if not item.strip():
            continue
        loc, sep, w = item.partition(":")
        if not sep:
            raise ConfigError(key, f"atom {item.strip()!r} needs 'location:weight'")
        z = [float(v) for v in loc.split()]
        if len(z) != dim:
            raise ConfigError(key, f"atom location needs {dim} coordinates")
        pairs.append((z if dim > 1 else z[0], float(w)))
    try:
        return SignedMeasureAtoms.from_pairs(pairs, dim=dim)
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def parse_element(key: str, text: str, spec: SemigroupSpec):
    """GridFunction for H expressions, EntrancePath for measure expressions."""
    m = _CALL.match(text)
    if not m:
        raise ConfigError(key, f"cannot parse element {text!r}")
    name, body = m.group(1), m.group(2) or ""
    grid = spec.grid
    try:
        if name == "zero":
            return GridFunction(np.zeros(grid.size), grid)
        if name == "vec":
            if spec.kind != "matrix":
                raise ConfigError(key, "vec(...) needs the matrix kind")
            v = [float(x) for x in body.split(",")]
            return GridFunction(np.array(v), grid)
        if name in ("bump", "unit_bump"):
            if spec.kind == "matrix":
                raise ConfigError(key, f"{name}(...) needs a grid kind")
            args = [float(x) for x in body.split(",")]
            c, w = args[0], args[1]
            h = args[2] if len(args) > 2 and name == "bump" else 1.0
            f = grid.discretize(lambda p: h * np.exp(-np.sum((p - c) ** 2, axis=1) / (2 * w * w)))
            return f * (1.0 / f.norm()) if name == "unit_bump" else f
        if name == "delta":
            if not spec.is_heat:
                raise ConfigError(key, "delta(...) needs a heat kind")
            return HeatMeasure(spec, _atoms(key, body, grid.dim))
        if name == "absorb":
            if spec.kind != "absorbing_halfline":
                raise ConfigError(key, "absorb(...) needs the absorbing_halfline kind")
            a, _, rest = body.partition(";")
            return AbsorbingMeasure(spec, float(a), _atoms(key, rest, 1))
    except ConfigError:
        raise
    except (ValueError, IndexError) as exc:
        raise ConfigError(key, f"{text!r}: {exc}") from None
    raise ConfigError(key, f"unknown element {name!r}")


def _as_path(key, el, spec) -> EntrancePath:
    return el if isinstance(el, EntrancePath) else embed_J(spec, el)


def _entries(key, entries, spec, carrier):
    out = []
    for j, e in enumerate(entries):
        coef, _, expr = e.strip().partition(" ")
        k = f"{key}[{j}]"
        try:
            c = float(coef)
        except ValueError:
            raise ConfigError(k, f"entry {e!r} must start with its coefficient") from None
        if c < 0:
            raise ConfigError(k, "coefficients must be non-negative")
        el = parse_element(k, expr, spec)
        if carrier == "entrance":
            el = _as_path(k, el, spec)
        elif isinstance(el, EntrancePath):
            raise ConfigError(k, "differentiable mode needs elements of H")
        out.append((c, el))
    return tuple(out)


def build(cfg: ExperimentConfig) -> Experiment:
    spec = build_semigroup(cfg.semigroup)
    e = cfg.entrance
    b = spec.b0 + 1.0 if e.b is None else e.b
    if b <= spec.b0:
        raise ConfigError("entrance.b", f"must exceed the growth bound b0 = {spec.b0:.6g}")
    alpha = spec.b0 + 1.0 if e.alpha is None else e.alpha
    if alpha <= spec.b0:
        raise ConfigError("entrance.alpha", f"must exceed the growth bound b0 = {spec.b0:.6g}")
    if not 0 < e.s_min or (e.s_max is not None and e.s_max <= e.s_min):
        raise ConfigError("entrance.s_min", "need 0 < s_min < s_max")
    if e.rho <= 1:
        raise ConfigError("entrance.rho", "panel ratio must exceed 1")
    params = EntranceNormParams(b, s_min=e.s_min, s_max=e.s_max, rho=e.rho, order=e.order)

    law_blk = cfg.law
    if law_blk.mode not in ("differentiable", "entrance"):
        raise ConfigError("law.mode", "expected 'differentiable' or 'entrance'")
    carrier = "H" if law_blk.mode == "differentiable" else "entrance"
    gauss = _entries("law.gaussian", law_blk.gaussian, spec, carrier)
    jumps = _entries("law.jumps", law_blk.jumps, spec, carrier)
    try:
        law = IDLaw(gaussian=gauss, jumps=jumps, carrier=carrier)
    except ValueError as exc:
        raise ConfigError("law.gaussian", str(exc)) from None
    sc = SCSemigroupSpec(law_blk.mode, law, spec, params)

    sim = cfg.simulation
    x0 = _as_path("simulation.x0", parse_element("simulation.x0", sim.x0, spec), spec)
    times = np.asarray(sim.times)
    if times.size == 0 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ConfigError("simulation.times", "need positive increasing times")
    if sim.n_steps < 1:
        raise ConfigError("simulation.n_steps", "must be >= 1")
    if sim.n_paths < 1:
        raise ConfigError("simulation.n_paths", "N must be >= 1")
    if sim.seed < 0:
        raise ConfigError("simulation.seed", "must be non-negative")
    k = times * sim.n_steps / times[-1]
    if np.any(np.abs(k - np.round(k)) > 1e-9):
        raise ConfigError("simulation.times", "every time must sit on the driver grid")
    if sim.section < 0:
        raise ConfigError("simulation.section", "must be non-negative")
    tests = []
    for j, expr in enumerate(sim.test_functions):
        el = parse_element(f"simulation.test_functions[{j}]", expr, spec)
        if isinstance(el, EntrancePath):
            raise ConfigError(f"simulation.test_functions[{j}]", "test functions live in H")
        tests.append(el)
    v = cfg.verify
    for name in ("random_cases", "mc_paths", "sc_pairs", "functionals"):
        if getattr(v, name) < 1:
            raise ConfigError(f"verify.{name}", "must be >= 1")
    return Experiment(cfg, spec, params, alpha, sc, x0, tuple(tests))
