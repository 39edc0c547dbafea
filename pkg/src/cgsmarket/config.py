"""Run configuration: TOML with fixed sections, strict keys, validated domains."""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .genome import MutationRates


class ConfigError(Exception):
    exit_code = 2


class ConfigFileMissing(ConfigError):
    exit_code = 4


class ConfigSyntaxError(ConfigError):
    exit_code = 5


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    stimulus: tuple[float, ...]
    base_value: float
    copies: int = 1
    holders: tuple[int, ...] = ()


@dataclass(frozen=True)
class EnsembleSpec:
    id: str
    operator: int
    members: tuple[str, ...]
    linkage: float = 1.0


@dataclass(frozen=True)
class ClusterSpec:
    center: tuple[float, ...]
    weight: float = 1.0
    spread: float = 0.05
    extent: tuple[float, ...] | None = None
    flexibility: float | None = None


@dataclass(frozen=True)
class ScriptedTrade:
    tick: int
    buyer: int
    seller: int
    object: str
    price: float
    buyer_value: float | None = None


@dataclass(frozen=True)
class Config:
    # simulation
    seed: int = 0
    ticks: int = 50
    population: int = 20
    initial_balance: float = 1000.0
    allow_mint: bool = False
    compositional_every: int = 5
    snapshot_every: int = 10
    rescale_on_novel: bool = True
    imitation: bool = True
    # genome
    n_dims: int = 2
    n_anchors: int = 3
    hash_len: int = 32
    homogeneous: bool = False
    mutation: MutationRates = MutationRates()
    # feedback
    band: tuple[float, float] = (0.2, 0.8)
    delta: float = 0.05
    relink_after: int = 3
    # network
    theta_fam: float = 0.3
    alpha_tol: float = 0.1
    step: float = 0.2
    eps_sc: float = 0.05
    neighbor_radius: float = 0.5
    # analysis
    fold_threshold: float = 2.0
    rho: float = 2.0
    outlier_k: float = 1.5
    bubble_window: int = 5
    gain_floor: float = 0.0
    bubble_fold: float = 1.5
    # output
    out_dir: str = "out"
    # catalog and set-up
    objects: tuple[ObjectSpec, ...] = ()
    ensembles: tuple[EnsembleSpec, ...] = ()
    clusters: tuple[ClusterSpec, ...] = ()
    script: tuple[ScriptedTrade, ...] = field(default=())

    def to_dict(self) -> dict:
        return _to_sections(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


SECTIONS = {
    "simulation": ("seed", "ticks", "population", "initial_balance", "allow_mint",
                   "compositional_every", "snapshot_every", "rescale_on_novel", "imitation"),
    "genome": ("n_dims", "n_anchors", "hash_len", "homogeneous"),
    "mutation": tuple(f.name for f in fields(MutationRates)),
    "feedback": ("band", "delta", "relink_after"),
    "network": ("theta_fam", "alpha_tol", "step", "eps_sc", "neighbor_radius"),
    "analysis": ("fold_threshold", "rho", "outlier_k", "bubble_window", "gain_floor",
                 "bubble_fold"),
    "output": ("out_dir",),
}
TABLE_ARRAYS = {
    "objects": ObjectSpec,
    "ensembles": EnsembleSpec,
    "clusters": ClusterSpec,
    "script": ScriptedTrade,
}


def _to_sections(cfg: Config) -> dict:
    out: dict = {}
    for section, keys in SECTIONS.items():
        if section == "mutation":
            out[section] = asdict(cfg.mutation)
            continue
        out[section] = {k: _plain(getattr(cfg, k)) for k in keys}
    for name in TABLE_ARRAYS:
        items = [{k: _plain(v) for k, v in asdict(item).items() if v is not None}
                 for item in getattr(cfg, name)]
        if items:
            out[name] = items
    return out


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _coerce(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a table")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key {unknown[0]!r}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def from_dict(data: dict) -> Config:
    """Build and validate a Config from the sectioned mapping."""
    kwargs: dict = {}
    for section, value in data.items():
        if section in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"[{section}] must be a table")
            unknown = sorted(set(value) - set(SECTIONS[section]))
            if unknown:
                raise ConfigError(f"[{section}]: unknown key {unknown[0]!r}")
            if section == "mutation":
                try:
                    kwargs["mutation"] = MutationRates(**value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"[mutation]: {exc}") from None
                continue
            for k, v in value.items():
                kwargs[k] = tuple(v) if isinstance(v, list) else v
        elif section in TABLE_ARRAYS:
            if not isinstance(value, list):
                raise ConfigError(f"[[{section}]] must be an array of tables")
            kwargs[section] = tuple(
                _coerce(TABLE_ARRAYS[section], item, f"[[{section}]] #{i}")
                for i, item in enumerate(value)
            )
        else:
            raise ConfigError(f"unknown key {section!r}")
    cfg = Config(**kwargs)
    try:
        validate(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed value: {exc}") from None
    return _normalise(cfg)


_FLOAT_FIELDS = ("initial_balance", "delta", "theta_fam", "alpha_tol", "step", "eps_sc",
                 "neighbor_radius", "fold_threshold", "rho", "outlier_k", "gain_floor",
                 "bubble_fold")


def _floats(xs):
    return tuple(float(x) for x in xs)


def _normalise(cfg: Config) -> Config:
    """Integers written where reals are meant become floats, so equal
    settings always serialise (and hash) identically."""
    changes = {name: float(getattr(cfg, name)) for name in _FLOAT_FIELDS}
    changes["band"] = _floats(cfg.band)
    changes["mutation"] = MutationRates(**{f.name: float(getattr(cfg.mutation, f.name))
                                           for f in fields(MutationRates)})
    changes["objects"] = tuple(replace(o, stimulus=_floats(o.stimulus),
                                       base_value=float(o.base_value)) for o in cfg.objects)
    changes["ensembles"] = tuple(replace(e, linkage=float(e.linkage)) for e in cfg.ensembles)
    changes["clusters"] = tuple(
        replace(c, center=_floats(c.center), weight=float(c.weight), spread=float(c.spread),
                extent=None if c.extent is None else _floats(c.extent),
                flexibility=None if c.flexibility is None else float(c.flexibility))
        for c in cfg.clusters)
    changes["script"] = tuple(
        replace(t, price=float(t.price),
                buyer_value=None if t.buyer_value is None else float(t.buyer_value))
        for t in cfg.script)
    return replace(cfg, **changes)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool))


def validate(cfg: Config) -> None:
    for name in ("seed", "ticks", "population", "compositional_every", "snapshot_every",
                 "n_dims", "n_anchors", "hash_len", "relink_after", "bubble_window"):
        _check(_is_int(getattr(cfg, name)), f"{name} must be an integer")
    for name in ("allow_mint", "rescale_on_novel", "imitation", "homogeneous"):
        _check(isinstance(getattr(cfg, name), bool), f"{name} must be true or false")
    for name in _FLOAT_FIELDS:
        _check(_is_num(getattr(cfg, name)) and not math.isnan(getattr(cfg, name)),
               f"{name} must be a number")

    _check(cfg.population >= 2, "population must be >= 2")
    _check(cfg.ticks >= 1, "ticks must be >= 1")
    _check(cfg.seed >= 0, "seed must be >= 0")
    _check(cfg.n_dims >= 1 and cfg.n_anchors >= 1 and cfg.hash_len >= 1,
           "n_dims, n_anchors and hash_len must be >= 1")
    _check(cfg.compositional_every >= 1, "compositional_every must be >= 1")
    _check(cfg.snapshot_every >= 1, "snapshot_every must be >= 1")
    _check(math.isfinite(cfg.initial_balance) and cfg.initial_balance >= 0,
           "initial_balance must be finite and >= 0")
    _check(len(cfg.band) == 2 and all(_is_num(b) for b in cfg.band)
           and 0.0 <= cfg.band[0] <= cfg.band[1] <= 1.0,
           "band must be [lo, hi] with 0 <= lo <= hi <= 1")
    _check(0.0 < cfg.delta < 1.0, "delta must lie in (0, 1)")
    _check(cfg.relink_after >= 0, "relink_after must be >= 0 (0 disables relinking)")
    _check(0.0 <= cfg.theta_fam <= 1.0, "theta_fam must lie in [0, 1]")
    _check(cfg.alpha_tol >= 0 and math.isfinite(cfg.alpha_tol), "alpha_tol must be >= 0")
    _check(0.0 < cfg.step <= 1.0, "step must lie in (0, 1]")
    _check(0.0 < cfg.eps_sc <= 1.0, "eps_sc must lie in (0, 1]")
    _check(cfg.neighbor_radius >= 0, "neighbor_radius must be >= 0")
    _check(cfg.fold_threshold >= 1.0, "fold_threshold must be >= 1")
    _check(cfg.rho > 0 and math.isfinite(cfg.rho), "rho must be positive")
    _check(cfg.outlier_k > 0 and math.isfinite(cfg.outlier_k), "outlier_k must be positive")
    _check(cfg.bubble_window >= 1, "bubble_window must be >= 1")
    _check(math.isfinite(cfg.gain_floor), "gain_floor must be finite")
    _check(cfg.bubble_fold >= 1.0, "bubble_fold must be >= 1")
    _check(isinstance(cfg.out_dir, str) and cfg.out_dir != "", "out_dir must be a path")

    _check(len(cfg.objects) >= 1, "at least one [[objects]] entry is required")
    ids = [o.id for o in cfg.objects]
    _check(len(set(ids)) == len(ids), "object ids must be unique")
    for o in cfg.objects:
        _check(isinstance(o.id, str) and o.id != "" and "," not in o.id,
               f"object id {o.id!r} must be a non-empty string without commas")
        _check(len(o.stimulus) == cfg.n_dims and all(_is_num(x) and math.isfinite(x)
                                                     for x in o.stimulus),
               f"object {o.id}: stimulus needs {cfg.n_dims} finite coordinates")
        _check(_is_num(o.base_value) and math.isfinite(o.base_value) and o.base_value > 0,
               f"object {o.id}: base_value must be positive")
        _check(_is_int(o.copies) and o.copies >= 1, f"object {o.id}: copies must be >= 1")
        _check(len(o.holders) in (0, o.copies),
               f"object {o.id}: holders must list one agent per copy")
        _check(all(_is_int(h) and 0 <= h < cfg.population for h in o.holders),
               f"object {o.id}: holders must be agent ids")

    eids = [e.id for e in cfg.ensembles]
    _check(len(set(eids)) == len(eids), "ensemble ids must be unique")
    _check(not set(eids) & set(ids), "ensemble ids must differ from object ids")
    for e in cfg.ensembles:
        _check(isinstance(e.id, str) and e.id != "" and "," not in e.id,
               f"ensemble id {e.id!r} must be a non-empty string without commas")
        _check(_is_int(e.operator) and 0 <= e.operator < cfg.population,
               f"ensemble {e.id}: operator must be an agent id")
        _check(len(e.members) >= 2 and len(set(e.members)) == len(e.members),
               f"ensemble {e.id}: needs >= 2 distinct members")
        _check(all(m in ids for m in e.members), f"ensemble {e.id}: unknown member")
        _check(_is_num(e.linkage) and e.linkage > 0, f"ensemble {e.id}: linkage must be > 0")

    for i, c in enumerate(cfg.clusters):
        _check(len(c.center) == cfg.n_dims and all(0.0 <= x <= 1.0 for x in c.center),
               f"cluster {i}: center needs {cfg.n_dims} coordinates in [0, 1]")
        _check(c.weight > 0, f"cluster {i}: weight must be > 0")
        _check(c.spread >= 0, f"cluster {i}: spread must be >= 0")
        _check(c.extent is None or (len(c.extent) == cfg.n_dims
                                    and all(0.0 <= x <= 1.0 for x in c.extent)),
               f"cluster {i}: extent needs {cfg.n_dims} values in [0, 1]")
        _check(c.flexibility is None or 0.0 <= c.flexibility <= 1.0,
               f"cluster {i}: flexibility must lie in [0, 1]")

    for i, s in enumerate(cfg.script):
        _check(_is_int(s.tick) and 1 <= s.tick <= cfg.ticks, f"script {i}: tick out of range")
        _check(all(_is_int(a) and 0 <= a < cfg.population for a in (s.buyer, s.seller))
               and s.buyer != s.seller, f"script {i}: buyer/seller must be distinct agents")
        _check(s.object in ids, f"script {i}: unknown object {s.object!r}")
        _check(_is_num(s.price) and s.price >= 0, f"script {i}: price must be >= 0")


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigFileMissing(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigFileMissing(f"cannot read {path}: {exc}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigSyntaxError(f"{path}: {exc}") from None
    return from_dict(data)


def default_config() -> Config:
    """A small runnable scenario: four objects, one bundle, two cultural clusters."""
    return Config(
        hash_len=200,
        objects=(
            ObjectSpec("A", (0.3, 0.3), 40.0, copies=4),
            ObjectSpec("B", (0.5, 0.5), 60.0, copies=4),
            ObjectSpec("C", (0.7, 0.7), 80.0, copies=4),
            ObjectSpec("D", (0.9, 0.2), 50.0, copies=2),
        ),
        ensembles=(EnsembleSpec("ABC", 0, ("A", "B", "C"), 1.0),),
        clusters=(
            ClusterSpec((0.3, 0.35), weight=1.0, spread=0.05),
            ClusterSpec((0.7, 0.65), weight=1.0, spread=0.05),
        ),
    )


def dump_config(cfg: Config) -> str:
    return tomli_w.dumps(cfg.to_dict())
