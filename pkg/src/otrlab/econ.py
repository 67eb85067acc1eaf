"""Rational-sequencer economics.

Closed forms for detection probability, cheating profit and the
deterrence inequality, plus per-query settlement rules for the PoQ baseline
and for OTR outcome streams.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .model_exec import QualityModel, sample_poq_scores


class DomainError(ValueError):
    pass


class Strategy(enum.Enum):
    HONEST = "honest"
    DOWNGRADE = "downgrade"  # cheaper binary, truthful attestation
    LAZY = "lazy"  # stolen key, no inference at all
    FORGED_ATTESTATION = "forged"  # stolen key, cheaper model, claims the large one

    @property
    def cheats(self) -> bool:
        return self is not Strategy.HONEST


@dataclass(frozen=True)
class EconParams:
    rho: float = 0.01
    p_fish: float = 0.9
    g_cheat: float = 0.80
    l_slash: float = 90.0
    r_user: float = 0.90
    c_small: float = 0.10
    c_large: float = 0.90

    def __post_init__(self):
        for name in ("rho", "p_fish"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")
        for name in ("g_cheat", "l_slash", "r_user", "c_small", "c_large"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")


def p_catch(rho: float, p_fish: float) -> float:
    """Union of the spot-check and fisherman detection channels."""
    for name, v in (("rho", rho), ("p_fish", p_fish)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name}={v} outside [0, 1]")
    return 1.0 - (1.0 - rho) * (1.0 - p_fish)


def expected_cheat_profit(params: EconParams) -> float:
    p = p_catch(params.rho, params.p_fish)
    return (1.0 - p) * (params.r_user - params.c_small) - p * params.l_slash


def will_cheat(params: EconParams) -> bool:
    """True iff cheating is (weakly) profitable; ties resolve to honest."""
    p = p_catch(params.rho, params.p_fish)
    return (1.0 - p) * params.g_cheat > p * params.l_slash


def cheat_threshold_l_slash(params: EconParams) -> float:
    """Smallest slashing penalty at which the sequencer stays honest."""
    p = p_catch(params.rho, params.p_fish)
    if p == 0:
        return float("inf")
    return (1.0 - p) * params.g_cheat / p


def simulate_cheat_settlements(params: EconParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Per-query profits of a downgrading cheater with independent detection draws."""
    spot = rng.random(n) < params.rho
    fish = rng.random(n) < params.p_fish
    caught = spot | fish
    return np.where(caught, -params.l_slash, params.r_user - params.c_small)


def poq_baseline_settlement(
    qm: QualityModel,
    strategy: str,
    params: EconParams,
    rng: np.random.Generator,
    n: Optional[int] = None,
):
    """Profit per query under PoQ: paid iff the judge score clears the bar.

    There is no execution check and therefore no slashing. With ``n`` given,
    returns an array of ``n`` settlements instead of one float.
    """
    profile = qm.profile(strategy)
    cost = params.c_large if profile.large_model else params.c_small
    judge, _ = sample_poq_scores(qm, strategy, rng, 1 if n is None else n)
    profit = np.where(judge >= qm.acceptance_threshold, params.r_user, 0.0) - cost
    return float(profit[0]) if n is None else profit


def otr_settlement(strategy: Strategy, params: EconParams, outcomes: Iterable[str]) -> list:
    """Per-query profit from a stream of contract outcome statuses.

    ``outcomes`` holds one status value per query ("Rejected", "HardFinal",
    "Slashed", ...). Rejected queries earn nothing and still pay for the
    model that ran; slashed queries lose the penalty; final ones earn the
    fee minus the served model's cost.
    """
    cost = {
        Strategy.HONEST: params.c_large,
        Strategy.DOWNGRADE: params.c_small,
        Strategy.FORGED_ATTESTATION: params.c_small,
        Strategy.LAZY: 0.0,
    }[strategy]
    out = []
    for status in outcomes:
        status = getattr(status, "value", status)
        if status == "Rejected":
            out.append(-cost)
        elif status == "Slashed":
            out.append(-params.l_slash)
        else:
            out.append(params.r_user - cost)
    return out


def profit_root_in_p_fish(params: EconParams) -> Optional[float]:
    """p_fish at which expected cheating profit crosses zero, if in [0, 1]."""
    gain = params.r_user - params.c_small
    # E = (1-p)gain - p L = 0  ->  p* = gain / (gain + L)
    if gain + params.l_slash == 0:
        return None
    p_star = gain / (gain + params.l_slash)
    # p = 1 - (1-rho)(1-pf)  ->  pf = 1 - (1-p)/(1-rho)
    if params.rho >= 1.0:
        return None
    pf = 1.0 - (1.0 - p_star) / (1.0 - params.rho)
    return pf if 0.0 <= pf <= 1.0 else None
