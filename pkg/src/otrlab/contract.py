"""The simulated on-chain verifier.

Holds the model registry (PoEA), runs the batch verification logic
(VRF-triggered spot-check or optimistic window), and routes slashing
through a :class:`~otrlab.ledger.StakeLedger`.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .attest import CommitmentTuple, QuoteStatus, RootOfTrust, verify_quote
from .dispute import (
    DisputeSession,
    Outcome,
    WindowClosed,
    open_dispute,
)
from .hashing import H, digest, hexd, u64
from .ledger import InsufficientStake, StakeLedger
from .model_exec import ModelSpec, run_inference

# -- registry ---------------------------------------------------------------


class AmbiguousAttribution(Exception):
    pass


class PoEAStatus(enum.Enum):
    ACCEPT = "Accept"
    REJECT_UNREGISTERED = "RejectUnregistered"
    REJECT_WRONG_MODEL = "RejectWrongModel"
    REJECT_BAD_QUOTE = "RejectBadQuote"


class ModelRegistry:
    """model_id -> set of admissible enclave measurements."""

    def __init__(self) -> None:
        self.entries: Dict[str, frozenset] = {}
        self._owner: Dict[bytes, str] = {}

    def register(self, model_id: str, mrenclave: bytes) -> "ModelRegistry":
        owner = self._owner.get(mrenclave)
        if owner is not None and owner != model_id:
            raise AmbiguousAttribution(f"{hexd(mrenclave)[:16]} already attributed to {owner}")
        self.entries[model_id] = self.entries.get(model_id, frozenset()) | {mrenclave}
        self._owner[mrenclave] = model_id
        return self

    def owner_of(self, mrenclave: bytes) -> Optional[str]:
        return self._owner.get(mrenclave)

    def __contains__(self, model_id: str) -> bool:
        return model_id in self.entries


def register_model(registry: ModelRegistry, model_id: str, mrenclave: bytes) -> ModelRegistry:
    return registry.register(model_id, mrenclave)


def verify_poea(
    registry: ModelRegistry,
    tup: CommitmentTuple,
    claimed_model: str,
    root: RootOfTrust,
) -> PoEAStatus:
    """Accept iff the quote verifies and its measurement belongs to ``claimed_model``."""
    if verify_quote(tup, root) is not QuoteStatus.VALID:
        return PoEAStatus.REJECT_BAD_QUOTE
    owner = registry.owner_of(tup.mrenclave)
    if owner is None:
        return PoEAStatus.REJECT_UNREGISTERED
    if owner != claimed_model:
        return PoEAStatus.REJECT_WRONG_MODEL
    return PoEAStatus.ACCEPT


# -- VRF ----------------------------------------------------------------------


def vrf_eval(key: bytes, seed: bytes, block_height: int) -> Tuple[float, bytes]:
    """Keyed-digest VRF. Value is the leading 53 bits of the proof in [0, 1)."""
    proof = digest(b"otr/vrf", key, seed, u64(block_height))
    value = (int.from_bytes(proof[:8], "big") >> 11) / 2.0**53
    return value, proof


def vrf_verify(key: bytes, seed: bytes, block_height: int, value: float, proof: bytes) -> bool:
    return vrf_eval(key, seed, block_height) == (value, proof)


def vrf_index(proof: bytes, n: int) -> int:
    """Spot-check index drawn from the same VRF output."""
    return int.from_bytes(digest(b"otr/vrf-index", proof), "big") % n


# -- pricing ------------------------------------------------------------------

# (lower bound in USD, rho) bands
DEFAULT_PRICING: Tuple[Tuple[float, float], ...] = (
    (0.0, 0.0),
    (1.0, 0.01),
    (100.0, 0.1),
    (1000.0, 1.0),
)


def validate_pricing(policy: Sequence[Tuple[float, float]]) -> List[str]:
    problems = []
    if not policy:
        return ["pricing policy is empty"]
    bounds = [b for b, _ in policy]
    rhos = [r for _, r in policy]
    if bounds != sorted(bounds) or len(set(bounds)) != len(bounds):
        problems.append("pricing bounds must be strictly ascending")
    if any(not 0.0 <= r <= 1.0 for r in rhos):
        problems.append("pricing rho values must lie in [0, 1]")
    if rhos != sorted(rhos):
        problems.append("pricing rho values must be non-decreasing")
    return problems


def choose_rho(query_value: float, policy: Sequence[Tuple[float, float]] = DEFAULT_PRICING) -> float:
    """Spot-check probability for a query worth ``query_value`` USD.

    A value between two bounds takes the lower band's rho.
    """
    bounds = [b for b, _ in policy]
    i = bisect.bisect_right(bounds, query_value) - 1
    return policy[max(i, 0)][1]


# -- batches and outcomes -----------------------------------------------------


class Mode(enum.Enum):
    SPOT_CHECK = "SpotCheck"
    OPTIMISTIC = "Optimistic"


class Status(enum.Enum):
    PROVISIONALLY_FINAL = "ProvisionallyFinal"
    HARD_FINAL = "HardFinal"
    SLASHED = "Slashed"
    REJECTED = "Rejected"


class SpotResult(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"


class MissingQueryData(KeyError):
    pass


@dataclass(frozen=True)
class Batch:
    batch_id: str
    tuples: Tuple[CommitmentTuple, ...]
    block_height: int
    sequencer_id: str
    sequencer_stake: float
    model_id: str

    def __post_init__(self):
        if not self.tuples:
            raise ValueError("a batch holds at least one tuple")
        if any(t.sequencer_id != self.sequencer_id for t in self.tuples):
            raise ValueError("all tuples in a batch must come from its sequencer")

    @property
    def n(self) -> int:
        return len(self.tuples)


@dataclass
class VerificationOutcome:
    batch_id: str
    mode: Optional[Mode]
    status: Status
    finality_time: float
    checked_index: Optional[int] = None
    vrf_value: Optional[float] = None
    window_closes_at: Optional[float] = None
    poea: Optional[PoEAStatus] = None
    spot_result: Optional[SpotResult] = None

    @property
    def terminal(self) -> bool:
        return self.status in (Status.HARD_FINAL, Status.SLASHED, Status.REJECTED)


@dataclass(frozen=True)
class ContractEvent:
    time: float
    kind: str
    batch_id: str
    detail: str = ""

    def to_line(self) -> str:
        return f"t={self.time!r} contract {self.kind} {self.batch_id} {self.detail}".rstrip()


def spot_check(
    tup: CommitmentTuple,
    claimed_model: str,
    specs: Mapping[str, ModelSpec],
    da: Mapping[bytes, bytes],
) -> SpotResult:
    """Simulated validity proof: re-execute the claimed model on the DA payload."""
    spec = specs[claimed_model]
    try:
        query = da[tup.query_hash]
    except KeyError:
        raise MissingQueryData(hexd(tup.query_hash)) from None
    if H(query) != tup.query_hash:
        return SpotResult.FAIL
    trace = run_inference(spec, query)
    if trace.response != tup.response or H(tup.response) != tup.response_hash:
        return SpotResult.FAIL
    return SpotResult.PASS


@dataclass
class SecurityParams:
    rho: float = 0.01
    t_chal: float = 3600.0
    t_zk_prove: float = 30.0
    l_slash: float = 90.0
    bond_fraction: float = 0.1
    fisherman_reward: float = 0.5
    dispute_timeout: float = 30.0

    @property
    def bond(self) -> float:
        return self.bond_fraction * self.l_slash


class Verifier:
    """The contract: intake, attribution and spot-check verification, windows, slashing."""

    def __init__(
        self,
        registry: ModelRegistry,
        root: RootOfTrust,
        ledger: StakeLedger,
        specs: Mapping[str, ModelSpec],
        vrf_key: bytes,
        params: Optional[SecurityParams] = None,
        da: Optional[Dict[bytes, bytes]] = None,
    ) -> None:
        self.registry = registry
        self.root = root
        self.ledger = ledger
        self.specs = dict(specs)
        self.vrf_key = vrf_key
        self.params = params or SecurityParams()
        self.da: Dict[bytes, bytes] = {} if da is None else da
        self.outcomes: Dict[str, VerificationOutcome] = {}
        self.batches: Dict[str, Batch] = {}
        self.sessions: Dict[str, DisputeSession] = {}
        self.events: List[ContractEvent] = []

    def _log(self, time: float, kind: str, batch_id: str, detail: str = "") -> None:
        self.events.append(ContractEvent(time, kind, batch_id, detail))

    def required_stake(self, batch: Batch) -> float:
        return self.params.l_slash * batch.n

    def publish(self, query: bytes) -> bytes:
        """Put a query payload on the DA layer; returns its hash."""
        qh = H(query)
        self.da[qh] = query
        return qh

    def process_batch(
        self,
        batch: Batch,
        now: float,
        xi: bytes,
        rho: Optional[float] = None,
    ) -> VerificationOutcome:
        rho = self.params.rho if rho is None else rho
        if batch.batch_id in self.outcomes:
            raise ValueError(f"batch {batch.batch_id} already processed")
        if self.ledger.balance(batch.sequencer_id) < self.required_stake(batch):
            raise InsufficientStake(batch.sequencer_id)
        self.batches[batch.batch_id] = batch

        for i, tup in enumerate(batch.tuples):
            status = verify_poea(self.registry, tup, batch.model_id, self.root)
            if status is not PoEAStatus.ACCEPT:
                out = VerificationOutcome(batch.batch_id, None, Status.REJECTED, now, poea=status)
                self.outcomes[batch.batch_id] = out
                self._log(now, "batch_rejected", batch.batch_id, f"index={i} reason={status.value}")
                return out
        self._log(now, "batch_accepted", batch.batch_id, f"n={batch.n} seq={batch.sequencer_id}")

        value, proof = vrf_eval(self.vrf_key, xi, batch.block_height)
        if value < rho:
            i = vrf_index(proof, batch.n)
            self._log(now, "spot_check_triggered", batch.batch_id, f"index={i} vrf={value!r}")
            result = spot_check(batch.tuples[i], batch.model_id, self.specs, self.da)
            done = now + self.params.t_zk_prove
            out = VerificationOutcome(
                batch.batch_id, Mode.SPOT_CHECK, Status.HARD_FINAL, done,
                checked_index=i, vrf_value=value, spot_result=result,
            )
            self.outcomes[batch.batch_id] = out
            self._log(done, "spot_check_result", batch.batch_id, result.value)
            if result is SpotResult.FAIL:
                self._slash_batch(batch, done, "spot_check_failed")
            return out

        closes = now + self.params.t_chal
        out = VerificationOutcome(
            batch.batch_id, Mode.OPTIMISTIC, Status.PROVISIONALLY_FINAL, now,
            vrf_value=value, window_closes_at=closes,
        )
        self.outcomes[batch.batch_id] = out
        self._log(now, "window_opened", batch.batch_id, f"closes={closes!r}")
        return out

    def _slash_batch(self, batch: Batch, now: float, reason: str):
        out = self.outcomes[batch.batch_id]
        out.status = Status.SLASHED
        out.finality_time = now
        event = self.ledger.slash(
            batch.sequencer_id, self.required_stake(batch), reason, offense=batch.batch_id, time=now
        )
        self._log(now, "slash", batch.batch_id,
                  f"who={batch.sequencer_id} amount={event.amount!r} shortfall={event.shortfall!r} reason={reason}")
        return event

    def expire_window(self, batch_id: str, now: float) -> VerificationOutcome:
        out = self.outcomes[batch_id]
        if out.status is Status.PROVISIONALLY_FINAL:
            if now < out.window_closes_at:
                raise ValueError(f"window for {batch_id} still open")
            if any(s.batch_id == batch_id and s.outcome is None for s in self.sessions.values()):
                raise ValueError(f"dispute on {batch_id} still running")
            out.status = Status.HARD_FINAL
            out.finality_time = out.window_closes_at
            self._log(now, "window_expired", batch_id, "hard_final")
        return out

    def open_fraud_proof(
        self,
        batch_id: str,
        tuple_index: int,
        claimant: str,
        claimant_trace_root: bytes,
        defendant_trace_root: bytes,
        now: float,
    ) -> DisputeSession:
        out = self.outcomes[batch_id]
        if out.status is not Status.PROVISIONALLY_FINAL:
            raise WindowClosed(f"{batch_id} is {out.status.value}")
        batch = self.batches[batch_id]
        spec = self.specs[batch.model_id]
        sid = f"{batch_id}/d{len(self.sessions)}"
        session = open_dispute(
            sid, batch_id, tuple_index, claimant, batch.sequencer_id,
            batch.tuples[tuple_index].query_hash,
            claimant_trace_root, defendant_trace_root,
            bond=self.params.bond,
            claimant_stake=self.ledger.balance(claimant),
            layer_count=spec.layer_count,
            ops_per_layer=spec.ops_per_layer,
            now=now,
            window_closes_at=out.window_closes_at,
            timeout=self.params.dispute_timeout,
        )
        self.ledger.escrow(("bond", sid), claimant, self.params.bond)
        self.sessions[sid] = session
        self._log(now, "dispute_opened", batch_id, f"session={sid} index={tuple_index} claimant={claimant}")
        return session

    def settle_dispute(self, session: DisputeSession, now: float) -> Outcome:
        """Apply a closed session's outcome to stake and batch status."""
        if session.outcome is None:
            raise ValueError("session not closed")
        batch = self.batches[session.batch_id]
        key = ("bond", session.session_id)
        if session.outcome is Outcome.CLAIMANT_WINS:
            event = self._slash_batch(batch, now, "fraud_proof")
            self.ledger.release(key)
            self.ledger.pay_from_pool(session.claimant, self.params.fisherman_reward * event.amount)
        else:
            self.ledger.release(key, to=session.defendant)
            self._log(now, "bond_forfeited", batch.batch_id,
                      f"who={session.claimant} amount={self.params.bond!r}")
        self._log(now, "dispute_closed", batch.batch_id,
                  f"session={session.session_id} outcome={session.outcome.value} rounds={session.rounds}")
        return session.outcome
