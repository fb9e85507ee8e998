"""Run configuration: JSON schema, defaults and validation."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields

from .judges import Construction, JudgeKind

UPDATE_MODES = ("exact_mirror", "sgd_loss_paper", "sgd_loss_corrected")
SCHEDULES = ("constant", "harmonic", "explicit")
GAME_KINDS = ("uniform", "condorcet", "cyclic")
INITS = ("uniform", "random")


class ConfigError(ValueError):
    """Schema violation; the message names the field and the constraint."""

    def __init__(self, field_name: str, constraint: str):
        super().__init__(f"{field_name}: {constraint}")
        self.field = field_name
        self.constraint = constraint


@dataclass
class GeneratorConfig:
    seed: int = 0
    n: int = 3
    contexts: int = 1
    kind: str = "cyclic"


@dataclass
class Schedule:
    """Step sizes ``gamma_t`` for ``t = 1, 2, ...``."""

    kind: str = "constant"
    gamma: float = 0.1
    values: tuple = ()

    def __call__(self, t: int) -> float:
        if self.kind == "constant":
            return self.gamma
        if self.kind == "harmonic":
            return self.gamma / t
        return float(self.values[t - 1])

    @property
    def constant(self) -> float | None:
        return self.gamma if self.kind == "constant" else None


@dataclass
class RunConfig:
    game_file: str | None = None
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    update_mode: str = "exact_mirror"
    judge: str = "ground_truth_deterministic"
    noise_epsilon: float = 0.0
    construction: str = "smoothed_preferred"
    mu: float = 0.01
    schedule: str = "constant"
    gamma: float = 0.1
    gammas: list = field(default_factory=list)
    T: int = 2000
    lr: float = 0.1
    batch: int = 1
    floor: float = 1e-9
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "runs"
    convergence_tol: float = 0.0
    delta_literal_eq2: bool = False
    sequential: bool = False
    init: str = "uniform"
    shared_init: bool = True
    sigma: float = 1.0
    p_norm: float = 1.0
    nash_tol: float = 1e-6
    nash_max_iter: int = 1_000_000
    compare_modes: list = field(default_factory=list)

    @property
    def step_schedule(self) -> Schedule:
        return Schedule(self.schedule, self.gamma, tuple(self.gammas))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def replace(self, **changes) -> "RunConfig":
        doc = self.to_dict()
        for k, v in changes.items():
            _set_path(doc, k, v)
        return parse_config(doc)


def _set_path(doc: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = doc
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(dotted, "is not a nested object")
    cur[keys[-1]] = value


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _require(cond: bool, name: str, constraint: str) -> None:
    if not cond:
        raise ConfigError(name, constraint)


def parse_config(document) -> RunConfig:
    """Validate a JSON document (str or dict) and apply defaults.

    Raises:
        ConfigError: on unknown keys, wrong types or broken constraints.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise ConfigError("<document>", f"invalid JSON ({e.msg})") from None
    if not isinstance(document, dict):
        raise ConfigError("<document>", "must be a JSON object")
    doc = copy.deepcopy(document)

    known = {f.name for f in fields(RunConfig)}
    for k in doc:
        _require(k in known, k, "unknown key")
    gen_doc = doc.pop("generator", {}) or {}
    _require(isinstance(gen_doc, dict), "generator", "must be an object")
    gen_known = {f.name for f in fields(GeneratorConfig)}
    for k in gen_doc:
        _require(k in gen_known, f"generator.{k}", "unknown key")
    gen = GeneratorConfig(**gen_doc)
    cfg = RunConfig(generator=gen, **doc)

    _require(_is_int(gen.seed) and gen.seed >= 0, "generator.seed", "non-negative integer")
    _require(_is_int(gen.n) and gen.n >= 2, "generator.n", "integer >= 2")
    _require(_is_int(gen.contexts) and gen.contexts >= 1, "generator.contexts", "integer >= 1")
    _require(gen.kind in GAME_KINDS, "generator.kind", f"one of {GAME_KINDS}")
    _require(cfg.game_file is None or isinstance(cfg.game_file, str), "game_file", "path string or null")

    _require(cfg.update_mode in UPDATE_MODES, "update_mode", f"one of {UPDATE_MODES}")
    kinds = tuple(k.value for k in JudgeKind)
    _require(cfg.judge in kinds, "judge", f"one of {kinds}")
    _require(_is_num(cfg.noise_epsilon) and 0 <= cfg.noise_epsilon < 0.5, "noise_epsilon", "in [0, 1/2)")
    cons = tuple(c.value for c in Construction)
    _require(cfg.construction in cons, "construction", f"one of {cons}")
    _require(_is_num(cfg.mu) and 0 <= cfg.mu <= 1, "mu", "in [0, 1]")

    _require(cfg.schedule in SCHEDULES, "schedule", f"one of {SCHEDULES}")
    _require(_is_num(cfg.gamma) and 0 < cfg.gamma <= 1, "gamma", "in (0, 1]")
    _require(_is_int(cfg.T) and cfg.T >= 0, "T", "non-negative integer")
    if cfg.schedule == "explicit":
        _require(isinstance(cfg.gammas, list) and len(cfg.gammas) >= cfg.T, "gammas", "list with at least T entries")
        _require(all(_is_num(v) and 0 < v <= 1 for v in cfg.gammas), "gammas", "every entry in (0, 1]")
    else:
        _require(isinstance(cfg.gammas, list), "gammas", "list")

    _require(_is_num(cfg.lr) and cfg.lr > 0, "lr", "positive")
    _require(_is_int(cfg.batch) and cfg.batch >= 1, "batch", "integer >= 1")
    _require(_is_num(cfg.floor) and 0 <= cfg.floor < 0.5 / gen.n, "floor", "in [0, 1/(2n))")
    _require(isinstance(cfg.seeds, list) and len(cfg.seeds) > 0, "seeds", "non-empty list")
    _require(all(_is_int(s) and s >= 0 for s in cfg.seeds), "seeds", "non-negative integers")
    _require(len(set(cfg.seeds)) == len(cfg.seeds), "seeds", "distinct")
    _require(isinstance(cfg.output_dir, str) and cfg.output_dir != "", "output_dir", "non-empty path")
    _require(_is_num(cfg.convergence_tol) and cfg.convergence_tol >= 0, "convergence_tol", "non-negative")
    for name in ("delta_literal_eq2", "sequential", "shared_init"):
        _require(isinstance(getattr(cfg, name), bool), name, "boolean")
    _require(cfg.init in INITS, "init", f"one of {INITS}")
    _require(_is_num(cfg.sigma) and cfg.sigma > 0, "sigma", "positive")
    _require(_is_num(cfg.p_norm) and cfg.p_norm >= 1, "p_norm", ">= 1")
    _require(_is_num(cfg.nash_tol) and cfg.nash_tol > 0, "nash_tol", "positive")
    _require(_is_int(cfg.nash_max_iter) and cfg.nash_max_iter >= 1, "nash_max_iter", "integer >= 1")
    _require(isinstance(cfg.compare_modes, list) and all(m in UPDATE_MODES for m in cfg.compare_modes),
             "compare_modes", f"list of {UPDATE_MODES}")
    cfg.gamma = float(cfg.gamma)
    cfg.noise_epsilon = float(cfg.noise_epsilon)
    cfg.mu = float(cfg.mu)
    cfg.lr = float(cfg.lr)
    cfg.floor = float(cfg.floor)
    cfg.convergence_tol = float(cfg.convergence_tol)
    cfg.sigma = float(cfg.sigma)
    cfg.p_norm = float(cfg.p_norm)
    cfg.nash_tol = float(cfg.nash_tol)
    cfg.gammas = [float(v) for v in cfg.gammas]
    return cfg
