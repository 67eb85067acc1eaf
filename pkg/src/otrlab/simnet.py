"""Discrete-event harness: clock, finality tiers, cost accounting, metrics.

``run_scenario`` drives sequencer populations through attestation, batch
verification and fisherman disputes on a single-threaded event loop. Every
random draw comes from one seeded generator, so a (config, seed) pair
replays to identical metrics and audit lines.
"""

from __future__ import annotations

import dataclasses
import enum
import heapq
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from .attest import Vendor, generate_quote, make_nonce, measure_enclave
from .contract import (
    Batch,
    Mode,
    ModelRegistry,
    SecurityParams,
    Status,
    Verifier,
)
from .dispute import CorruptedView, DisputeError, Outcome, Phase, TraceView
from .econ import Strategy, otr_settlement, poq_baseline_settlement
from .hashing import digest, hexd, u64
from .ledger import InsufficientStake
from .model_exec import run_inference

DEFAULT_T_TEE = 0.5
DEFAULT_TEE_OVERHEAD = 1.15


@dataclass(frozen=True)
class LatencyParams:
    t_native: float = DEFAULT_T_TEE / DEFAULT_TEE_OVERHEAD
    tee_overhead: float = DEFAULT_TEE_OVERHEAD
    t_sig: float = 0.001
    t_zk_prove: float = 30.0
    t_zkml_full: float = 1200.0
    t_chal: float = 3600.0
    poq_overhead: float = 0.05

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")

    @property
    def t_tee(self) -> float:
        return self.tee_overhead * self.t_native

    @classmethod
    def from_t_tee(cls, t_tee: float, tee_overhead: float = DEFAULT_TEE_OVERHEAD, **kw) -> "LatencyParams":
        return cls(t_native=t_tee / tee_overhead, tee_overhead=tee_overhead, **kw)


@dataclass(frozen=True)
class CostParams:
    """USD per query. Defaults are the gas line items of the cost table."""

    cost_tee_compute: float = 0.0
    # spot-check proving expense attributed to each query of a checked batch
    cost_zk_prove: float = 0.30
    cost_blob: float = 0.05
    cost_sig_verify: float = 0.02
    cost_zk_verify_onchain: float = 45.00
    cost_dispute: float = 2.50
    cost_opml_verify: float = 0.01

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")


def finality_latency(mode: Mode, lat: LatencyParams) -> float:
    """Time to (provisional) finality of one query in a batch verified in ``mode``."""
    if mode is Mode.SPOT_CHECK:
        return lat.t_tee + lat.t_zk_prove
    return lat.t_tee + lat.t_sig


def hard_finality_latency(mode: Mode, lat: LatencyParams) -> float:
    if mode is Mode.SPOT_CHECK:
        return lat.t_tee + lat.t_zk_prove
    return lat.t_tee + lat.t_chal


def amortized_latency(rho: float, lat: LatencyParams) -> float:
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho outside [0, 1]")
    return lat.t_tee + rho * lat.t_zk_prove


def expected_finality_latency(rho: float, lat: LatencyParams) -> float:
    """Mean of :func:`finality_latency` when each batch is checked w.p. ``rho``."""
    return rho * finality_latency(Mode.SPOT_CHECK, lat) + (1 - rho) * finality_latency(Mode.OPTIMISTIC, lat)


def amortized_cost(rho: float, costs: CostParams) -> float:
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho outside [0, 1]")
    return costs.cost_tee_compute + costs.cost_blob + costs.cost_sig_verify + rho * costs.cost_zk_prove


def opml_cost(costs: CostParams) -> float:
    return costs.cost_blob + costs.cost_opml_verify


def zkml_cost(costs: CostParams) -> float:
    return costs.cost_blob + costs.cost_zk_verify_onchain


# -- event queue --------------------------------------------------------------


class TimeTravel(Exception):
    pass


class EventKind(enum.Enum):
    QUERY_SUBMITTED = "QuerySubmitted"
    INFERENCE_DONE = "InferenceDone"
    BATCH_COMMITTED = "BatchCommitted"
    SPOT_CHECK_DONE = "SpotCheckDone"
    WINDOW_EXPIRED = "WindowExpired"
    DISPUTE_ROUND = "DisputeRound"
    SLASH_EXECUTED = "SlashExecuted"


@dataclass(order=True, frozen=True)
class SimEvent:
    time: float
    seq: int
    kind: EventKind = field(compare=False)
    payload: Any = field(compare=False, default=None)


class EventQueue:
    """Time-ordered queue; equal times pop in insertion order."""

    def __init__(self) -> None:
        self.clock = 0.0
        self._heap: List[SimEvent] = []
        self._seq = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: float, kind: EventKind, payload: Any = None) -> SimEvent:
        if time < self.clock:
            raise TimeTravel(f"{kind.value} at {time} before clock {self.clock}")
        event = SimEvent(time, next(self._seq), kind, payload)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> SimEvent:
        event = heapq.heappop(self._heap)
        self.clock = event.time
        return event

    def run(self, handler: Callable[[SimEvent], None]) -> int:
        n = 0
        while self._heap:
            handler(self.pop())
            n += 1
        return n


def schedule(queue: EventQueue, event: SimEvent) -> EventQueue:
    """Insert an already-built event (keeps its time, assigns a fresh sequence)."""
    queue.schedule(event.time, event.kind, event.payload)
    return queue


# -- metrics ------------------------------------------------------------------


@dataclass
class QueryRecord:
    query_id: int
    sequencer: str
    strategy: str
    submit_time: float
    batch_id: str = ""
    mode: str = ""
    status: str = ""
    finality_latency: float = math.nan
    hard_finality_latency: float = math.nan
    cost: float = 0.0
    profit: float = 0.0


@dataclass
class RunMetrics:
    baseline: str
    records: List[QueryRecord]
    audit: List[str]
    makespan: float
    slash_count: int = 0
    fraud_detections: int = 0
    cheat_attempts: int = 0
    disputes: int = 0
    t_native: float = 0.0

    def _col(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def finality_samples(self) -> np.ndarray:
        x = self._col("finality_latency")
        return x[~np.isnan(x)]

    @property
    def hard_finality_samples(self) -> np.ndarray:
        x = self._col("hard_finality_latency")
        return x[~np.isnan(x)]

    @property
    def cost_samples(self) -> np.ndarray:
        return self._col("cost")

    @property
    def l_avg(self) -> float:
        x = self.finality_samples
        return float(x.mean()) if x.size else math.nan

    @property
    def l_avg_stderr(self) -> float:
        x = self.finality_samples
        return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan

    @property
    def amortized_cost(self) -> float:
        return float(self.cost_samples.mean()) if self.records else math.nan

    @property
    def throughput(self) -> float:
        return len(self.records) / self.makespan if self.makespan > 0 else math.nan

    @property
    def eta(self) -> float:
        """Verification overhead ratio T_verify / T_inference."""
        if not self.t_native:
            return math.nan
        return (self.l_avg - self.t_native) / self.t_native

    @property
    def status_counts(self) -> Counter:
        return Counter(r.status for r in self.records)

    @property
    def provisional_count(self) -> int:
        return sum(1 for r in self.records if r.mode == Mode.OPTIMISTIC.value and self.baseline == "OTR")

    @property
    def hard_count(self) -> int:
        return len(self.records) - self.provisional_count

    def profits(self, adversarial: Optional[bool] = None) -> np.ndarray:
        rows = self.records
        if adversarial is not None:
            rows = [r for r in rows if (r.strategy != Strategy.HONEST.value) == adversarial]
        return np.array([r.profit for r in rows], dtype=float)

    @property
    def adversary_mean_profit(self) -> float:
        p = self.profits(adversarial=True)
        return float(p.mean()) if p.size else math.nan

    @property
    def slashed_queries(self) -> int:
        return self.status_counts.get(Status.SLASHED.value, 0)


# -- scenario run -------------------------------------------------------------


def _query_payload(i: int) -> bytes:
    return b"prompt-%06d" % i


def derive_seed(seed: int, *parts: bytes) -> int:
    return int.from_bytes(digest(b"otr/seed", u64(seed), *parts)[:8], "big")


class _Sim:
    """One OTR (or OPML) run. Internal; use :func:`run_scenario`."""

    def __init__(self, cfg, baseline: str) -> None:
        self.cfg = cfg
        self.baseline = baseline
        self.opml = baseline == "OPML"
        self.rng = np.random.default_rng(derive_seed(cfg.seed, baseline.encode()))
        self.lat: LatencyParams = cfg.latency
        self.costs: CostParams = cfg.costs
        self.specs = cfg.model_map
        self.rho = 0.0 if self.opml else cfg.rho()
        self.queue = EventQueue()
        self.audit: List[str] = []
        self.records: List[QueryRecord] = []
        self.batch_queries: Dict[str, List[int]] = {}
        self.batch_seq: Dict[str, Any] = {}
        self.views: Dict[str, Any] = {}
        self.cheat_attempts = 0
        self.disputes = 0
        self.fraud_detections = 0
        self.xi = digest(b"otr/xi-genesis", u64(cfg.seed))
        self.height = 0
        self.fishers = [f"fisher-{i}" for i in range(cfg.fishermen.count)]

        vendor = Vendor(digest(b"otr/vendor-seed", u64(cfg.seed)))
        self.registry = ModelRegistry()
        for model_id, version in cfg.registry:
            self.registry.register(model_id, measure_enclave(model_id, version))
        from .ledger import StakeLedger

        self.ledger = StakeLedger()
        for s in cfg.sequencers:
            self.ledger.deposit(s.id, s.stake)
        for f in self.fishers:
            self.ledger.deposit(f, cfg.fishermen.stake)
        self.initial_total = self.ledger.total()
        econ = cfg.econ
        self.verifier = Verifier(
            self.registry,
            vendor.root_of_trust(),
            self.ledger,
            self.specs,
            vrf_key=digest(b"otr/vrf-key", u64(cfg.seed)),
            params=SecurityParams(
                rho=self.rho,
                t_chal=self.lat.t_chal,
                t_zk_prove=self.lat.t_zk_prove,
                l_slash=econ.l_slash,
                bond_fraction=cfg.security.bond_fraction,
                fisherman_reward=cfg.security.fisherman_reward,
                dispute_timeout=cfg.security.dispute_timeout,
            ),
        )
        self.enclaves = {}
        for s in cfg.sequencers:
            compromised = s.strategy in (Strategy.FORGED_ATTESTATION, Strategy.LAZY)
            self.enclaves[s.id] = vendor.provision(
                f"{s.id}/enclave", s.serves, cfg.binaries[s.serves], compromised=compromised
            )
        self.claimed_mr = {}
        for model_id in self.specs:
            omega = self.registry.entries.get(model_id)
            if omega:
                self.claimed_mr[model_id] = sorted(omega)[0]
        self.seq_by_id = {s.id: s for s in cfg.sequencers}

    # -- helpers -------------------------------------------------------------

    def log(self, t: float, kind: str, detail: str) -> None:
        self.audit.append(f"t={t!r} {kind} {detail}")

    def drain_contract(self) -> None:
        for e in self.verifier.events:
            self.audit.append(e.to_line())
        self.verifier.events.clear()

    def t_tee_for(self, model_id: str) -> float:
        spec = self.specs[model_id]
        native = self.lat.t_native if spec.native_latency is None else spec.native_latency
        return (1.0 if self.opml else self.lat.tee_overhead) * native

    def served_cost(self, seq) -> float:
        return 0.0 if seq.strategy is Strategy.LAZY else self.specs[seq.serves].cost_per_query

    # -- setup -----------------------------------------------------------------

    def submit_all(self) -> None:
        cfg = self.cfg
        weights = np.array([s.weight for s in cfg.sequencers], dtype=float)
        weights /= weights.sum()
        n = cfg.batch_size
        t = 0.0
        qid = 0
        epoch = 0
        while qid < cfg.queries:
            size = min(n, cfg.queries - qid)
            seq = cfg.sequencers[int(self.rng.choice(len(weights), p=weights))]
            pool = self.rng.integers(0, cfg.query_pool, size=size)
            ids = list(range(qid, qid + size))
            for i, p in zip(ids, pool):
                self.records.append(QueryRecord(i, seq.id, seq.strategy.value, t))
            self.queue.schedule(t, EventKind.QUERY_SUBMITTED,
                                {"epoch": epoch, "seq": seq.id, "ids": ids, "pool": [int(p) for p in pool]})
            qid += size
            epoch += 1
            t += float(self.rng.exponential(1.0 / cfg.arrival_rate))

    # -- handlers ---------------------------------------------------------------

    def handle(self, ev: SimEvent) -> None:
        getattr(self, "on_" + ev.kind.name.lower())(ev)
        self.drain_contract()

    def on_query_submitted(self, ev: SimEvent) -> None:
        p = ev.payload
        seq = self.seq_by_id[p["seq"]]
        self.log(ev.time, "QuerySubmitted", f"epoch={p['epoch']} seq={seq.id} n={len(p['ids'])}")
        self.queue.schedule(ev.time + self.t_tee_for(seq.serves), EventKind.INFERENCE_DONE, p)

    def on_inference_done(self, ev: SimEvent) -> None:
        p = ev.payload
        seq = self.seq_by_id[p["seq"]]
        enclave = self.enclaves[seq.id]
        claimed = self.specs[seq.claims]
        served = self.specs[seq.serves]
        forged = self.claimed_mr.get(seq.claims) if enclave.compromised else None
        tuples = []
        views = []
        for qid, pool_idx in zip(p["ids"], p["pool"]):
            query = _query_payload(pool_idx)
            qh = self.verifier.publish(query)
            if seq.strategy is Strategy.LAZY:
                response = digest(b"otr/lazy", qh, u64(qid))
            else:
                response = run_inference(served, query).response
            tup = generate_quote(enclave, qh, response, make_nonce(ev.time, qid), seq.id,
                                 forged_mrenclave=forged)
            tuples.append(tup)
            views.append(self._defendant_view(seq, claimed, query, qid))
        self.height += 1
        batch_id = f"b{p['epoch']:06d}"
        batch = Batch(batch_id, tuple(tuples), self.height, seq.id, self.ledger.balance(seq.id), seq.claims)
        self.batch_queries[batch_id] = p["ids"]
        self.batch_seq[batch_id] = seq
        self.views[batch_id] = views
        for qid in p["ids"]:
            self.records[qid].batch_id = batch_id
        self.log(ev.time, "InferenceDone", f"batch={batch_id} seq={seq.id}")
        self.queue.schedule(ev.time, EventKind.BATCH_COMMITTED, batch)

    def _defendant_view(self, seq, claimed, query: bytes, qid: int):
        honest = run_inference(claimed, query)
        if seq.strategy is Strategy.HONEST:
            return TraceView(claimed, honest)
        # A sequencer that did not run the claimed model fabricates the
        # trace from some point on; where is its choice.
        layer = int(self.rng.integers(0, claimed.layer_count))
        op = int(self.rng.integers(0, claimed.ops_per_layer))
        return CorruptedView(claimed, honest, layer, op, salt=u64(qid))

    def _set(self, batch_id: str, **kw) -> None:
        for qid in self.batch_queries[batch_id]:
            rec = self.records[qid]
            for k, v in kw.items():
                setattr(rec, k, v)

    def on_batch_committed(self, ev: SimEvent) -> None:
        batch: Batch = ev.payload
        seq = self.batch_seq[batch.batch_id]
        self.log(ev.time, "BatchCommitted", f"batch={batch.batch_id} n={batch.n} xi={hexd(self.xi)[:16]}")
        if seq.strategy is not Strategy.HONEST:
            self.cheat_attempts += 1
        t_in = ev.time - self.records[self.batch_queries[batch.batch_id][0]].submit_time
        self._set(batch.batch_id, cost=self.costs.cost_blob + self.costs.cost_tee_compute
                  + (self.costs.cost_opml_verify if self.opml else self.costs.cost_sig_verify))
        if self.opml:
            out = self._opml_intake(batch, ev.time)
        else:
            try:
                out = self.verifier.process_batch(batch, ev.time, self.xi)
            except InsufficientStake:
                self.log(ev.time, "BatchRefused", f"batch={batch.batch_id} reason=insufficient_stake")
                self._set(batch.batch_id, status=Status.REJECTED.value)
                self._advance_xi(batch.batch_id, "refused")
                return
        self._advance_xi(batch.batch_id, out.status.value + (out.mode.value if out.mode else ""))
        if out.status is Status.REJECTED:
            self._set(batch.batch_id, status=Status.REJECTED.value)
            return
        if out.mode is Mode.SPOT_CHECK:
            self._set(batch.batch_id, mode=out.mode.value,
                      finality_latency=t_in + self.lat.t_zk_prove,
                      hard_finality_latency=t_in + self.lat.t_zk_prove)
            for qid in self.batch_queries[batch.batch_id]:
                self.records[qid].cost += self.costs.cost_zk_prove
            self.queue.schedule(out.finality_time, EventKind.SPOT_CHECK_DONE, batch.batch_id)
            return
        self._set(batch.batch_id, mode=Mode.OPTIMISTIC.value,
                  finality_latency=t_in + (self.lat.t_chal if self.opml else self.lat.t_sig))
        self.queue.schedule(out.window_closes_at, EventKind.WINDOW_EXPIRED, batch.batch_id)
        if self.fishers and self.rng.random() < self.cfg.fishermen.p_fish:
            self._fisherman_watch(batch, ev.time)

    def _opml_intake(self, batch: Batch, now: float):
        # No attestation and no spot-checks: straight into the optimistic window.
        from .contract import VerificationOutcome

        v = self.verifier
        v.batches[batch.batch_id] = batch
        out = VerificationOutcome(batch.batch_id, Mode.OPTIMISTIC, Status.PROVISIONALLY_FINAL, now,
                                  window_closes_at=now + v.params.t_chal)
        v.outcomes[batch.batch_id] = out
        v._log(now, "window_opened", batch.batch_id, f"closes={out.window_closes_at!r}")
        return out

    def _advance_xi(self, batch_id: str, outcome: str) -> None:
        self.xi = digest(b"otr/xi", self.xi, batch_id.encode(), outcome.encode())

    def _fisherman_watch(self, batch: Batch, now: float) -> None:
        fisher = self.fishers[int(self.rng.integers(0, len(self.fishers)))]
        spec = self.specs[batch.model_id]
        for i, tup in enumerate(batch.tuples):
            query = self.verifier.da[tup.query_hash]
            mine = run_inference(spec, query)
            if mine.response != tup.response:
                at = now + self.t_tee_for(batch.model_id)
                self.queue.schedule(at, EventKind.DISPUTE_ROUND,
                                    {"open": True, "batch": batch.batch_id, "index": i,
                                     "fisher": fisher, "trace": mine})
                return

    def on_dispute_round(self, ev: SimEvent) -> None:
        p = ev.payload
        move = self.cfg.security.dispute_move_time
        if p.get("open"):
            batch_id, i = p["batch"], p["index"]
            defendant = self.views[batch_id][i]
            claimant = TraceView(self.specs[self.verifier.batches[batch_id].model_id], p["trace"])
            try:
                session = self.verifier.open_fraud_proof(
                    batch_id, i, p["fisher"], claimant.final_state, defendant.final_state, ev.time)
            except (DisputeError, InsufficientStake) as e:
                self.log(ev.time, "DisputeRefused", f"batch={batch_id} reason={type(e).__name__}")
                return
            self.disputes += 1
            self.log(ev.time, "DisputeRound", f"session={session.session_id} open")
            self.queue.schedule(ev.time + 2 * move, EventKind.DISPUTE_ROUND,
                                {"session": session, "def": defendant, "cla": claimant})
            return
        session = p["session"]
        if session.phase in (Phase.LAYER_BISECT, Phase.OP_BISECT):
            key = session.probe()
            session.submit(session.turn, p["def"].state(key), ev.time - move)
            session.submit(session.turn, p["cla"].state(key), ev.time)
            self.audit.append(session.transcript[-1].to_line())
            self.queue.schedule(ev.time + 2 * move, EventKind.DISPUTE_ROUND, p)
            return
        spec = self.specs[self.verifier.batches[session.batch_id].model_id]
        session.resolve(spec)
        self.log(ev.time, "DisputeRound", f"session={session.session_id} adjudicated={session.outcome.value}")
        self.queue.schedule(ev.time, EventKind.SLASH_EXECUTED, session)

    def on_slash_executed(self, ev: SimEvent) -> None:
        session = ev.payload
        outcome = self.verifier.settle_dispute(session, ev.time)
        self.log(ev.time, "SlashExecuted", f"session={session.session_id} outcome={outcome.value}")
        if outcome is Outcome.CLAIMANT_WINS:
            self.fraud_detections += 1
            per_query = self.costs.cost_dispute / len(self.batch_queries[session.batch_id])
            for qid in self.batch_queries[session.batch_id]:
                rec = self.records[qid]
                rec.cost += per_query
                rec.hard_finality_latency = ev.time - rec.submit_time
                rec.status = Status.SLASHED.value
                if self.opml:
                    rec.finality_latency = rec.hard_finality_latency

    def on_spot_check_done(self, ev: SimEvent) -> None:
        out = self.verifier.outcomes[ev.payload]
        self.log(ev.time, "SpotCheckDone", f"batch={ev.payload} result={out.spot_result.value} status={out.status.value}")
        if out.status is Status.SLASHED:
            self.fraud_detections += 1
        self._set(ev.payload, status=out.status.value)

    def on_window_expired(self, ev: SimEvent) -> None:
        batch_id = ev.payload
        running = any(s.batch_id == batch_id and s.outcome is None for s in self.verifier.sessions.values())
        if running:
            self.queue.schedule(ev.time + self.cfg.security.dispute_move_time, EventKind.WINDOW_EXPIRED, batch_id)
            return
        out = self.verifier.expire_window(batch_id, ev.time)
        self.log(ev.time, "WindowExpired", f"batch={batch_id} status={out.status.value}")
        if out.status is Status.HARD_FINAL:
            for qid in self.batch_queries[batch_id]:
                rec = self.records[qid]
                rec.status = Status.HARD_FINAL.value
                rec.hard_finality_latency = out.finality_time - rec.submit_time

    # -- settlement -------------------------------------------------------------

    def settle(self) -> None:
        econ = self.cfg.econ
        slashed_amount = {e.offense: e.amount for e in self.ledger.slash_events}
        for r in self.records:
            seq = self.seq_by_id[r.sequencer]
            c = self.served_cost(seq)
            params = dataclasses.replace(econ, c_small=c, c_large=c)
            if r.status == Status.SLASHED.value:
                # realised penalty: the batch slash split over its queries
                n = len(self.batch_queries[r.batch_id])
                params = dataclasses.replace(params, l_slash=slashed_amount.get(r.batch_id, 0.0) / n)
            r.profit = otr_settlement(seq.strategy, params, [r.status])[0]

    def run(self) -> RunMetrics:
        self.submit_all()
        self.queue.run(self.handle)
        self.settle()
        makespan = max((r.submit_time + r.finality_latency for r in self.records
                        if not math.isnan(r.finality_latency)), default=0.0)
        return RunMetrics(
            baseline=self.baseline,
            records=self.records,
            audit=self.audit,
            makespan=makespan,
            slash_count=len(self.ledger.slash_events),
            fraud_detections=self.fraud_detections,
            cheat_attempts=self.cheat_attempts,
            disputes=self.disputes,
            t_native=self.lat.t_native,
        )


def _run_zkml(cfg) -> RunMetrics:
    rng = np.random.default_rng(derive_seed(cfg.seed, b"ZKML"))
    lat, costs = cfg.latency, cfg.costs
    weights = np.array([s.weight for s in cfg.sequencers], dtype=float)
    weights /= weights.sum()
    records, audit = [], []
    t = 0.0
    for qid in range(cfg.queries):
        seq = cfg.sequencers[int(rng.choice(len(weights), p=weights))]
        # a validity proof for the claimed model cannot be produced by a cheater
        honest = seq.strategy is Strategy.HONEST
        status = Status.HARD_FINAL.value if honest else Status.REJECTED.value
        cost_served = 0.0 if seq.strategy is Strategy.LAZY else cfg.model_map[seq.serves].cost_per_query
        params = dataclasses.replace(cfg.econ, c_small=cost_served, c_large=cost_served)
        rec = QueryRecord(qid, seq.id, seq.strategy.value, t, mode="Validity", status=status,
                          finality_latency=lat.t_zkml_full if honest else math.nan,
                          hard_finality_latency=lat.t_zkml_full if honest else math.nan,
                          cost=zkml_cost(costs))
        rec.profit = otr_settlement(seq.strategy, params, [status])[0]
        records.append(rec)
        audit.append(f"t={t!r} ZKML query={qid} seq={seq.id} status={status}")
        t += float(rng.exponential(1.0 / (cfg.arrival_rate * cfg.batch_size)))
    makespan = max((r.submit_time + r.finality_latency for r in records
                    if not math.isnan(r.finality_latency)), default=0.0)
    return RunMetrics("ZKML", records, audit, makespan,
                      cheat_attempts=sum(r.strategy != "honest" for r in records), t_native=lat.t_native)


def _run_poq(cfg) -> RunMetrics:
    rng = np.random.default_rng(derive_seed(cfg.seed, b"PoQ"))
    lat, costs = cfg.latency, cfg.costs
    weights = np.array([s.weight for s in cfg.sequencers], dtype=float)
    weights /= weights.sum()
    records, audit = [], []
    t = 0.0
    for qid in range(cfg.queries):
        seq = cfg.sequencers[int(rng.choice(len(weights), p=weights))]
        spec = cfg.model_map[seq.serves]
        cost_served = 0.0 if seq.strategy is Strategy.LAZY else spec.cost_per_query
        params = dataclasses.replace(cfg.econ, c_small=cost_served, c_large=cost_served)
        profit = poq_baseline_settlement(cfg.quality, seq.quality_profile, params, rng)
        accepted = profit + cost_served > 0
        native = lat.t_native if spec.native_latency is None else spec.native_latency
        latency = native * (1.0 + lat.poq_overhead)
        status = "Accepted" if accepted else "Rejected"
        records.append(QueryRecord(qid, seq.id, seq.strategy.value, t, mode="Judge", status=status,
                                   finality_latency=latency, hard_finality_latency=latency,
                                   cost=costs.cost_blob, profit=profit))
        audit.append(f"t={t!r} PoQ query={qid} seq={seq.id} status={status}")
        t += float(rng.exponential(1.0 / (cfg.arrival_rate * cfg.batch_size)))
    makespan = max((r.submit_time + r.finality_latency for r in records), default=0.0)
    return RunMetrics("PoQ", records, audit, makespan,
                      cheat_attempts=sum(r.strategy != "honest" for r in records), t_native=lat.t_native)


class ConfigInvalid(ValueError):
    pass


def run_scenario(cfg, baseline: str = "OTR") -> RunMetrics:
    """Run one baseline of a validated :class:`~otrlab.config.ScenarioConfig`."""
    if baseline in ("OTR", "OPML"):
        if not cfg.sequencers:
            raise ConfigInvalid("sequencers: at least one is required")
        sim = _Sim(cfg, baseline)
        metrics = sim.run()
        drift = abs(sim.ledger.total() - sim.initial_total)
        if drift > 1e-6 * max(1.0, sim.initial_total):
            raise AssertionError(f"stake not conserved: drift {drift}")
        return metrics
    if baseline == "ZKML":
        return _run_zkml(cfg)
    if baseline == "PoQ":
        return _run_poq(cfg)
    raise ConfigInvalid(f"baseline: unknown {baseline!r}")
