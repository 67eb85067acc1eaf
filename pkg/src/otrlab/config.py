"""Scenario configuration: YAML schema, defaults and strict validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .contract import DEFAULT_PRICING, validate_pricing
from .econ import EconParams, Strategy
from .model_exec import ModelSpec, QualityModel, ScoreProfile, table4_quality
from .simnet import CostParams, LatencyParams

BASELINES = ("OTR", "OPML", "ZKML", "PoQ")
PRESETS = ("paper-defaults", "downgrade-attack", "broken-tee", "rho-sweep", "pricing-bands")


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, path, message, line=None):
        self.path, self.line = path, line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


class ValidationError(ConfigError):
    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class SequencerConfig:
    id: str
    strategy: Strategy = Strategy.HONEST
    stake: float = 1.0e6
    serves: str = ""
    claims: str = ""
    weight: float = 1.0
    quality_profile: str = ""


@dataclass(frozen=True)
class FishermenConfig:
    count: int = 1
    p_fish: float = 0.9
    stake: float = 1.0e4


@dataclass(frozen=True)
class SecurityConfig:
    rho: Optional[float] = 0.01
    pricing: Optional[Tuple[Tuple[float, float], ...]] = None
    bond_fraction: float = 0.1
    fisherman_reward: float = 0.5
    dispute_timeout: float = 30.0
    dispute_move_time: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    models: Tuple[ModelSpec, ...]
    binaries: Dict[str, str] = field(default_factory=dict)
    registry: Tuple[Tuple[str, str], ...] = ()
    sequencers: Tuple[SequencerConfig, ...] = ()
    fishermen: FishermenConfig = FishermenConfig()
    econ: EconParams = EconParams()
    latency: LatencyParams = LatencyParams()
    costs: CostParams = CostParams()
    security: SecurityConfig = SecurityConfig()
    quality: QualityModel = field(default_factory=table4_quality)
    queries: int = 1000
    batch_size: int = 16
    query_pool: int = 1000
    query_value: float = 0.5
    arrival_rate: float = 1.0
    baselines: Tuple[str, ...] = ("OTR",)
    name: str = ""

    @property
    def model_map(self) -> Dict[str, ModelSpec]:
        return {m.model_id: m for m in self.models}

    def rho(self) -> float:
        if self.security.pricing is not None:
            from .contract import choose_rho

            return choose_rho(self.query_value, self.security.pricing)
        return self.security.rho

    def econ_params(self) -> EconParams:
        """EconParams with rho and p_fish taken from the scenario."""
        return dataclasses.replace(self.econ, rho=self.rho(), p_fish=self.fishermen.p_fish)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


# -- parsing ------------------------------------------------------------------

_TOP = {
    "name", "seed", "queries", "batch_size", "query_pool", "query_value", "arrival_rate",
    "baselines", "models", "registry", "sequencers", "fishermen", "econ", "security",
    "latency", "costs", "quality",
}
_MODEL = {"model_id", "layer_count", "ops_per_layer", "theta_seed", "cost_per_query",
          "native_latency", "binary_version"}
_SEQ = {"id", "strategy", "stake", "serves", "claims", "weight", "quality_profile"}
_FISH = {f.name for f in dataclasses.fields(FishermenConfig)}
_SEC = {f.name for f in dataclasses.fields(SecurityConfig)}
_ECON = {"r_user", "c_small", "c_large", "g_cheat", "l_slash"}
_LAT = {"t_native", "t_tee", "tee_overhead", "t_sig", "t_zk_prove", "t_zkml_full", "t_chal",
        "poq_overhead"}
_COST = {f.name for f in dataclasses.fields(CostParams)}
_QUAL = {"judge_count", "acceptance_threshold", "profiles"}
_PROFILE = {f.name for f in dataclasses.fields(ScoreProfile)}


def _unknown(d: dict, allowed: set, where: str, problems: List[str]) -> None:
    for k in d:
        if k not in allowed:
            problems.append(f"{where}{k}: unknown key")


def _section(raw: dict, key: str, problems: List[str]) -> dict:
    v = raw.get(key, {})
    if v is None:
        return {}
    if not isinstance(v, dict):
        problems.append(f"{key}: expected a mapping")
        return {}
    return v


def _num(d, key, where, problems, default, lo=None, hi=None, kind=float):
    if key not in d:
        return default
    v = d[key]
    if v is None and default is None:
        return None
    if isinstance(v, str):
        # YAML 1.1 reads exponent forms without a sign ("1.0e9") as strings
        try:
            v = float(v)
        except ValueError:
            pass
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{where}{key}: expected a number, got {v!r}")
        return default
    if kind is int and (not isinstance(v, int) and not float(v).is_integer()):
        problems.append(f"{where}{key}: expected an integer, got {v!r}")
        return default
    v = kind(v)
    if lo is not None and v < lo:
        problems.append(f"{where}{key}: {v} < {lo}")
    if hi is not None and v > hi:
        problems.append(f"{where}{key}: {v} > {hi}")
    return v


def from_dict(raw: Dict[str, Any]) -> ScenarioConfig:
    """Build and validate a ScenarioConfig, reporting every problem at once."""
    problems: List[str] = []
    if not isinstance(raw, dict):
        raise ValidationError(["top level: expected a mapping"])
    _unknown(raw, _TOP, "", problems)
    if "seed" not in raw:
        problems.append("seed: required")
    seed = _num(raw, "seed", "", problems, 0, lo=0, hi=2**64 - 1, kind=int)

    # models
    models: List[ModelSpec] = []
    binaries: Dict[str, str] = {}
    raw_models = raw.get("models") or []
    if not isinstance(raw_models, list) or not raw_models:
        problems.append("models: at least one model is required")
        raw_models = []
    for i, m in enumerate(raw_models):
        w = f"models[{i}]."
        if not isinstance(m, dict):
            problems.append(f"models[{i}]: expected a mapping")
            continue
        _unknown(m, _MODEL, w, problems)
        mid = m.get("model_id")
        if not isinstance(mid, str) or not mid:
            problems.append(f"{w}model_id: required string")
            continue
        if mid in binaries:
            problems.append(f"{w}model_id: duplicate {mid!r}")
        try:
            spec = ModelSpec(
                model_id=mid,
                layer_count=_num(m, "layer_count", w, problems, 8, lo=1, kind=int),
                ops_per_layer=_num(m, "ops_per_layer", w, problems, 8, lo=1, kind=int),
                theta_seed=_num(m, "theta_seed", w, problems, i + 1, lo=0, hi=2**64 - 1, kind=int),
                cost_per_query=_num(m, "cost_per_query", w, problems, 0.0, lo=0),
                native_latency=_num(m, "native_latency", w, problems, None, lo=0),
            )
        except ValueError as e:
            problems.append(f"{w}{e}")
            continue
        models.append(spec)
        binaries[mid] = str(m.get("binary_version", "v1"))
    model_ids = set(binaries)

    # registry
    registry: List[Tuple[str, str]] = []
    raw_reg = raw.get("registry")
    if raw_reg is None:
        registry = [(mid, binaries[mid]) for mid in binaries]
    elif not isinstance(raw_reg, list):
        problems.append("registry: expected a list")
    else:
        for i, r in enumerate(raw_reg):
            if not isinstance(r, dict):
                problems.append(f"registry[{i}]: expected a mapping")
                continue
            _unknown(r, {"model_id", "binary_version"}, f"registry[{i}].", problems)
            mid = r.get("model_id")
            if mid not in model_ids:
                problems.append(f"registry[{i}].model_id: unknown model {mid!r}")
                continue
            registry.append((mid, str(r.get("binary_version", binaries[mid]))))

    # sequencers
    sequencers: List[SequencerConfig] = []
    raw_seq = raw.get("sequencers")
    if raw_seq is None:
        if models:
            first = models[0].model_id
            sequencers = [SequencerConfig("seq-0", Strategy.HONEST, 1.0e6, first, first, 1.0, "honest-70b")]
    elif not isinstance(raw_seq, list) or not raw_seq:
        problems.append("sequencers: expected a non-empty list")
    else:
        seen = set()
        for i, s in enumerate(raw_seq):
            w = f"sequencers[{i}]."
            if not isinstance(s, dict):
                problems.append(f"sequencers[{i}]: expected a mapping")
                continue
            _unknown(s, _SEQ, w, problems)
            sid = s.get("id", f"seq-{i}")
            if sid in seen:
                problems.append(f"{w}id: duplicate {sid!r}")
            seen.add(sid)
            try:
                strategy = Strategy(s.get("strategy", "honest"))
            except ValueError:
                problems.append(f"{w}strategy: one of {[x.value for x in Strategy]}")
                strategy = Strategy.HONEST
            default_model = models[0].model_id if models else ""
            claims = s.get("claims", default_model)
            serves = s.get("serves", claims)
            for key, val in (("claims", claims), ("serves", serves)):
                if val not in model_ids:
                    problems.append(f"{w}{key}: unknown model {val!r}")
            profile = s.get("quality_profile", "honest-70b" if strategy is Strategy.HONEST else "adversarial-8b")
            sequencers.append(SequencerConfig(
                id=str(sid),
                strategy=strategy,
                stake=_num(s, "stake", w, problems, 1.0e6, lo=0),
                serves=serves,
                claims=claims,
                weight=_num(s, "weight", w, problems, 1.0, lo=0),
                quality_profile=profile,
            ))
        if sequencers and sum(s.weight for s in sequencers) <= 0:
            problems.append("sequencers: weights must not all be zero")

    f = _section(raw, "fishermen", problems)
    _unknown(f, _FISH, "fishermen.", problems)
    fishermen = FishermenConfig(
        count=_num(f, "count", "fishermen.", problems, 1, lo=0, kind=int),
        p_fish=_num(f, "p_fish", "fishermen.", problems, 0.9, lo=0, hi=1),
        stake=_num(f, "stake", "fishermen.", problems, 1.0e4, lo=0),
    )

    e = _section(raw, "econ", problems)
    _unknown(e, _ECON, "econ.", problems)
    d = EconParams()
    econ_kw = {k: _num(e, k, "econ.", problems, getattr(d, k), lo=0) for k in sorted(_ECON)}

    sec = _section(raw, "security", problems)
    _unknown(sec, _SEC, "security.", problems)
    pricing = None
    if "pricing" in sec:
        p = sec["pricing"]
        if p == "default":
            pricing = DEFAULT_PRICING
        elif isinstance(p, list) and all(isinstance(b, (list, tuple)) and len(b) == 2 for b in p):
            pricing = tuple((float(a), float(b)) for a, b in p)
            problems.extend(f"security.pricing: {m}" for m in validate_pricing(pricing))
        else:
            problems.append("security.pricing: expected 'default' or a list of [bound, rho] pairs")
    if "rho" in sec and pricing is not None:
        problems.append("security: give either rho or pricing, not both")
    rho = None if pricing is not None else _num(sec, "rho", "security.", problems, 0.01, lo=0, hi=1)
    security = SecurityConfig(
        rho=rho,
        pricing=pricing,
        bond_fraction=_num(sec, "bond_fraction", "security.", problems, 0.1, lo=0),
        fisherman_reward=_num(sec, "fisherman_reward", "security.", problems, 0.5, lo=0, hi=1),
        dispute_timeout=_num(sec, "dispute_timeout", "security.", problems, 30.0, lo=0),
        dispute_move_time=_num(sec, "dispute_move_time", "security.", problems, 1.0, lo=0),
    )
    if security.dispute_move_time > security.dispute_timeout:
        problems.append("security.dispute_move_time: exceeds dispute_timeout")

    lat = _section(raw, "latency", problems)
    _unknown(lat, _LAT, "latency.", problems)
    dl = LatencyParams()
    lat_kw = {k: _num(lat, k, "latency.", problems, getattr(dl, k), lo=0)
              for k in ("tee_overhead", "t_sig", "t_zk_prove", "t_zkml_full", "t_chal", "poq_overhead")}
    if "t_tee" in lat and "t_native" in lat:
        problems.append("latency: give either t_tee or t_native, not both")
    if "t_tee" in lat:
        t_tee = _num(lat, "t_tee", "latency.", problems, dl.t_tee, lo=0)
        latency = LatencyParams.from_t_tee(t_tee, **lat_kw) if lat_kw["tee_overhead"] > 0 else dl
        if lat_kw["tee_overhead"] <= 0:
            problems.append("latency.tee_overhead: must be > 0 when t_tee is given")
    else:
        latency = LatencyParams(t_native=_num(lat, "t_native", "latency.", problems, dl.t_native, lo=0), **lat_kw)

    c = _section(raw, "costs", problems)
    _unknown(c, _COST, "costs.", problems)
    dc = CostParams()
    costs = CostParams(**{k: _num(c, k, "costs.", problems, getattr(dc, k), lo=0) for k in sorted(_COST)})

    q = _section(raw, "quality", problems)
    _unknown(q, _QUAL, "quality.", problems)
    base = table4_quality()
    profiles = dict(base.profiles)
    if "profiles" in q:
        if not isinstance(q["profiles"], dict):
            problems.append("quality.profiles: expected a mapping")
        else:
            for name, prof in q["profiles"].items():
                w = f"quality.profiles.{name}."
                if not isinstance(prof, dict):
                    problems.append(f"quality.profiles.{name}: expected a mapping")
                    continue
                _unknown(prof, _PROFILE, w, problems)
                try:
                    profiles[name] = ScoreProfile(
                        judge_mean=_num(prof, "judge_mean", w, problems, 0.5, lo=0, hi=1),
                        judge_std=_num(prof, "judge_std", w, problems, 0.0, lo=0),
                        human_mean=_num(prof, "human_mean", w, problems, 0.5, lo=0, hi=1),
                        human_std=_num(prof, "human_std", w, problems, 0.0, lo=0),
                        large_model=bool(prof.get("large_model", False)),
                    )
                except ValueError as err:
                    problems.append(f"{w}{err}")
    quality = QualityModel(
        profiles=profiles,
        judge_count=_num(q, "judge_count", "quality.", problems, 1, lo=1, kind=int),
        acceptance_threshold=_num(q, "acceptance_threshold", "quality.", problems, 0.80, lo=0, hi=1),
    )
    for s in sequencers:
        if s.quality_profile not in quality.profiles:
            problems.append(f"sequencers.{s.id}.quality_profile: unknown profile {s.quality_profile!r}")

    baselines = raw.get("baselines", ["OTR"])
    if not isinstance(baselines, list) or not baselines:
        problems.append("baselines: expected a non-empty list")
        baselines = ["OTR"]
    for b in baselines:
        if b not in BASELINES:
            problems.append(f"baselines: unknown baseline {b!r} (choose from {', '.join(BASELINES)})")

    queries = _num(raw, "queries", "", problems, 1000, lo=1, kind=int)
    batch_size = _num(raw, "batch_size", "", problems, 16, lo=1, kind=int)
    query_pool = _num(raw, "query_pool", "", problems, 1000, lo=1, kind=int)
    query_value = _num(raw, "query_value", "", problems, 0.5, lo=0)
    arrival_rate = _num(raw, "arrival_rate", "", problems, 1.0, lo=0)
    if "arrival_rate" in raw and arrival_rate <= 0:
        problems.append("arrival_rate: must be > 0")

    if problems:
        raise ValidationError(problems)
    econ = EconParams(**econ_kw, rho=0.0, p_fish=fishermen.p_fish)
    cfg = ScenarioConfig(
        seed=seed,
        models=tuple(models),
        binaries=binaries,
        registry=tuple(registry),
        sequencers=tuple(sequencers),
        fishermen=fishermen,
        econ=econ,
        latency=latency,
        costs=costs,
        security=security,
        quality=quality,
        queries=queries,
        batch_size=batch_size,
        query_pool=query_pool,
        query_value=query_value,
        arrival_rate=arrival_rate,
        baselines=tuple(baselines),
        name=str(raw.get("name", "")),
    )
    return dataclasses.replace(cfg, econ=cfg.econ_params())


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(path, e.strerror or str(e)) from None
    return parse_config_text(text, path)


def parse_config_text(text: str, path="<string>") -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else None
        raise ParseError(path, e.problem or str(e), line) from None
    except yaml.YAMLError as e:
        raise ParseError(path, str(e)) from None
    return from_dict(raw if raw is not None else {})


def preset_path(name: str):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("otrlab") / "presets" / f"{name}.yaml"


def load_preset(name: str) -> ScenarioConfig:
    ref = preset_path(name)
    return parse_config_text(ref.read_text(), f"preset:{name}")


def resolve_config_arg(arg: str) -> ScenarioConfig:
    """A path, or ``preset:NAME`` / a bare preset name."""
    name = arg[len("preset:"):] if arg.startswith("preset:") else arg
    if name in PRESETS and not Path(arg).exists():
        return load_preset(name)
    return parse_config(arg)


def to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    """Fully-resolved config with every default filled in."""
    lat = cfg.latency
    return {
        "name": cfg.name,
        "seed": cfg.seed,
        "queries": cfg.queries,
        "batch_size": cfg.batch_size,
        "query_pool": cfg.query_pool,
        "query_value": cfg.query_value,
        "arrival_rate": cfg.arrival_rate,
        "baselines": list(cfg.baselines),
        "models": [
            {**dataclasses.asdict(m), "binary_version": cfg.binaries[m.model_id]} for m in cfg.models
        ],
        "registry": [{"model_id": m, "binary_version": v} for m, v in cfg.registry],
        "sequencers": [
            {**dataclasses.asdict(s), "strategy": s.strategy.value} for s in cfg.sequencers
        ],
        "fishermen": dataclasses.asdict(cfg.fishermen),
        "econ": {k: getattr(cfg.econ, k) for k in sorted(_ECON)},
        "security": {
            **{k: getattr(cfg.security, k) for k in ("bond_fraction", "fisherman_reward",
                                                     "dispute_timeout", "dispute_move_time")},
            **({"pricing": [list(b) for b in cfg.security.pricing]}
               if cfg.security.pricing is not None else {"rho": cfg.security.rho}),
        },
        "latency": {
            "t_native": lat.t_native, "tee_overhead": lat.tee_overhead,
            "t_sig": lat.t_sig, "t_zk_prove": lat.t_zk_prove, "t_zkml_full": lat.t_zkml_full,
            "t_chal": lat.t_chal, "poq_overhead": lat.poq_overhead,
        },
        "costs": dataclasses.asdict(cfg.costs),
        "quality": {
            "judge_count": cfg.quality.judge_count,
            "acceptance_threshold": cfg.quality.acceptance_threshold,
            "profiles": {k: dataclasses.asdict(v) for k, v in sorted(cfg.quality.profiles.items())},
        },
    }


def echo_yaml(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
