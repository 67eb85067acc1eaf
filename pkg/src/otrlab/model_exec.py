"""Mock deterministic models and the PoQ score sampler.

A model is a keyed hash chain: ``layer_count`` layers of ``ops_per_layer``
ops, each op one SHA-256 step keyed by the weight seed and its position.
That gives bisection a real trace to walk while staying bitwise
deterministic. Only layer outputs are stored; op states inside a layer are
recomputed on demand.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from .hashing import H, digest

_OP_TAG = b"otr/op"


class IndexOutOfRange(IndexError):
    pass


class UnknownStrategy(KeyError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    layer_count: int
    ops_per_layer: int
    theta_seed: int
    cost_per_query: float = 0.0
    # None: fall back to the scenario's LatencyParams.t_native
    native_latency: Optional[float] = None

    def __post_init__(self):
        if self.layer_count < 1 or self.ops_per_layer < 1:
            raise ValueError(f"{self.model_id}: layer_count and ops_per_layer must be >= 1")
        if not 0 <= self.theta_seed < 2**64:
            raise ValueError(f"{self.model_id}: theta_seed must fit in 64 bits")
        if self.cost_per_query < 0:
            raise ValueError(f"{self.model_id}: cost_per_query must be >= 0")
        if self.native_latency is not None and self.native_latency < 0:
            raise ValueError(f"{self.model_id}: native_latency must be >= 0")


def op_step(theta_seed: int, layer: int, op: int, state: bytes) -> bytes:
    """One chained op: the single step adjudicated on-chain in a dispute."""
    return hashlib.sha256(
        _OP_TAG + theta_seed.to_bytes(8, "big") + layer.to_bytes(4, "big")
        + op.to_bytes(4, "big") + state
    ).digest()


def layer_step(theta_seed: int, layer: int, state: bytes, ops_per_layer: int) -> bytes:
    prefix = _OP_TAG + theta_seed.to_bytes(8, "big") + layer.to_bytes(4, "big")
    sha = hashlib.sha256
    for op in range(ops_per_layer):
        state = sha(prefix + op.to_bytes(4, "big") + state).digest()
    return state


def detokenize(final_state: bytes) -> bytes:
    return digest(b"otr/detok", final_state)


@dataclass(frozen=True)
class ExecutionTrace:
    query_hash: bytes
    layer_states: Tuple[bytes, ...]
    response: bytes

    @property
    def final_state(self) -> bytes:
        return self.layer_states[-1]

    def layer_input(self, layer: int) -> bytes:
        """State entering ``layer``; the query hash for layer 0."""
        return self.query_hash if layer == 0 else self.layer_states[layer - 1]


@lru_cache(maxsize=16384)
def run_inference(spec: ModelSpec, query: bytes) -> ExecutionTrace:
    """Compute ``r = F_theta(q)`` and its layer-level trace."""
    qh = H(query)
    state = qh
    states = []
    for layer in range(spec.layer_count):
        state = layer_step(spec.theta_seed, layer, state, spec.ops_per_layer)
        states.append(state)
    return ExecutionTrace(qh, tuple(states), detokenize(state))


def op_states(trace: ExecutionTrace, spec: ModelSpec, layer: int) -> list:
    """All ``ops_per_layer`` op outputs of ``layer``; the last equals the layer state."""
    if not 0 <= layer < spec.layer_count:
        raise IndexOutOfRange(f"layer {layer} outside [0, {spec.layer_count})")
    state = trace.layer_input(layer)
    out = []
    for op in range(spec.ops_per_layer):
        state = op_step(spec.theta_seed, layer, op, state)
        out.append(state)
    return out


def op_state(trace: ExecutionTrace, spec: ModelSpec, layer: int, op: int) -> bytes:
    if not 0 <= op < spec.ops_per_layer:
        raise IndexOutOfRange(f"op {op} outside [0, {spec.ops_per_layer})")
    return op_states(trace, spec, layer)[op]


# -- quality scores ---------------------------------------------------------


@dataclass(frozen=True)
class ScoreProfile:
    judge_mean: float
    judge_std: float
    human_mean: float
    human_std: float
    large_model: bool = False

    def __post_init__(self):
        for name in ("judge_mean", "human_mean"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("judge_std", "human_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class QualityModel:
    """Per-strategy judge/human score distributions and the PoQ acceptance rule.

    ``judge_count`` assessors each draw a clamped Gaussian; the final score
    is their mean (reward shaping treated as identity).
    """

    profiles: Dict[str, ScoreProfile] = field(default_factory=dict)
    judge_count: int = 1
    acceptance_threshold: float = 0.80

    def __post_init__(self):
        if self.judge_count < 1:
            raise ValueError("judge_count must be >= 1")
        # thresholds above 1 are legal here (an unreachable bar); config
        # validation keeps user-facing values in [0, 1]
        if self.acceptance_threshold < 0:
            raise ValueError("acceptance_threshold must be >= 0")

    def profile(self, strategy: str) -> ScoreProfile:
        try:
            return self.profiles[strategy]
        except KeyError:
            raise UnknownStrategy(strategy) from None


def table4_quality(judge_count: int = 1, acceptance_threshold: float = 0.80) -> QualityModel:
    """Score distributions of the downgrade-attack experiment, as reported."""
    return QualityModel(
        profiles={
            "honest-70b": ScoreProfile(0.91, 0.02, 0.88, 0.03, large_model=True),
            "standard-8b": ScoreProfile(0.76, 0.04, 0.65, 0.05),
            "adversarial-8b": ScoreProfile(0.89, 0.03, 0.52, 0.08),
        },
        judge_count=judge_count,
        acceptance_threshold=acceptance_threshold,
    )


def sample_poq_scores(qm: QualityModel, strategy: str, rng: np.random.Generator, size: int):
    """Vectorised form of :func:`sample_poq_score`: two arrays of length ``size``."""
    p = qm.profile(strategy)
    if p.judge_std == 0:
        judge = np.full(size, p.judge_mean)
    else:
        draws = rng.normal(p.judge_mean, p.judge_std, size=(size, qm.judge_count))
        judge = np.clip(draws, 0.0, 1.0).mean(axis=1)
    if p.human_std == 0:
        human = np.full(size, p.human_mean)
    else:
        human = np.clip(rng.normal(p.human_mean, p.human_std, size=size), 0.0, 1.0)
    return judge, human


def sample_poq_score(qm: QualityModel, strategy: str, rng: np.random.Generator):
    judge, human = sample_poq_scores(qm, strategy, rng, 1)
    return float(judge[0]), float(human[0])
