"""The fisherman game: two-party bisection over an execution trace.

The search first narrows the disagreement to one layer, then to one op
inside that layer, and finally re-executes that single op.

Bounds are an inclusive candidate range ``[lo, hi]`` for the first
divergent index. Each round probes ``m = (lo + hi) // 2``; agreement there
moves ``lo`` to ``m + 1``, disagreement moves ``hi`` to ``m``. A phase ends
when one candidate is left, so a trace of ``L`` layers and ``M`` ops takes at
most ``ceil(log2 L) + ceil(log2 M)`` rounds plus the adjudication step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .hashing import digest, hexd, u64
from .model_exec import ExecutionTrace, ModelSpec, op_states, op_step


class DisputeError(Exception):
    pass


class WindowClosed(DisputeError):
    pass


class InsufficientBond(DisputeError):
    pass


class NoDivergence(DisputeError):
    pass


class NotYourTurn(DisputeError):
    pass


class WrongPhase(DisputeError):
    pass


class Phase(enum.Enum):
    LAYER_BISECT = "LayerBisect"
    OP_BISECT = "OpBisect"
    ADJUDICATE = "Adjudicate"
    CLOSED = "Closed"


class Outcome(enum.Enum):
    DEFENDANT_WINS = "DefendantWins"
    CLAIMANT_WINS = "ClaimantWins"


class Party(enum.Enum):
    DEFENDANT = "defendant"
    CLAIMANT = "claimant"


# State keys: ("query",), ("layer", i), ("op", layer, op)
StateKey = Tuple


@dataclass(frozen=True)
class TranscriptRecord:
    session_id: str
    phase: str
    lo: int
    hi: int
    probe: StateKey
    defendant_digest: bytes
    claimant_digest: bytes
    time: float

    def to_line(self) -> str:
        probe = ":".join(str(p) for p in self.probe)
        return (
            f"dispute {self.session_id} {self.phase} lo={self.lo} hi={self.hi} "
            f"probe={probe} def={hexd(self.defendant_digest)} "
            f"cla={hexd(self.claimant_digest)} t={self.time!r}"
        )

    def to_bytes(self) -> bytes:
        return self.to_line().encode()


@dataclass
class DisputeSession:
    session_id: str
    batch_id: str
    tuple_index: int
    claimant: str
    defendant: str
    claimant_bond: float
    layer_count: int
    ops_per_layer: int
    phase: Phase = Phase.LAYER_BISECT
    lo: int = 0
    hi: int = 0
    turn: Party = Party.DEFENDANT
    asserted_states: Dict[StateKey, Tuple[bytes, bytes]] = field(default_factory=dict)
    outcome: Optional[Outcome] = None
    layer: Optional[int] = None
    op: Optional[int] = None
    rounds: int = 0
    transcript: List[TranscriptRecord] = field(default_factory=list)
    timeout: float = 30.0
    last_move: float = 0.0
    forfeited: Optional[Party] = None
    _pending: Optional[bytes] = None

    # -- search state -------------------------------------------------------

    @property
    def midpoint(self) -> int:
        return (self.lo + self.hi) // 2

    def probe(self) -> StateKey:
        """Key of the state both parties must report this round."""
        if self.phase is Phase.LAYER_BISECT:
            return ("layer", self.midpoint)
        if self.phase is Phase.OP_BISECT:
            return ("op", self.layer, self.midpoint)
        raise WrongPhase(self.phase.value)

    def _settle_phase(self) -> None:
        # Collapse phases whose candidate range is already a single index.
        if self.phase is Phase.LAYER_BISECT and self.lo == self.hi:
            self.layer = self.lo
            self.phase = Phase.OP_BISECT
            self.lo, self.hi = 0, self.ops_per_layer - 1
        if self.phase is Phase.OP_BISECT and self.lo == self.hi:
            self.op = self.lo
            self.phase = Phase.ADJUDICATE

    # -- moves --------------------------------------------------------------

    def submit(self, party: Party, state: bytes, now: float = 0.0) -> "DisputeSession":
        """Post one party's digest for the current probe (defendant first)."""
        if self.phase not in (Phase.LAYER_BISECT, Phase.OP_BISECT):
            raise WrongPhase(self.phase.value)
        if party is not self.turn:
            raise NotYourTurn(party.value)
        self.last_move = now
        if party is Party.DEFENDANT:
            self._pending = state
            self.turn = Party.CLAIMANT
            return self
        key = self.probe()
        d, c = self._pending, state
        self._pending = None
        self.turn = Party.DEFENDANT
        self.asserted_states[key] = (d, c)
        self.transcript.append(
            TranscriptRecord(self.session_id, self.phase.value, self.lo, self.hi, key, d, c, now)
        )
        self.rounds += 1
        if d == c:
            self.lo = self.midpoint + 1
        else:
            self.hi = self.midpoint
        self._settle_phase()
        return self

    def bisect_round(self, defendant_state: bytes, claimant_state: bytes, now: float = 0.0):
        self.submit(Party.DEFENDANT, defendant_state, now)
        return self.submit(Party.CLAIMANT, claimant_state, now)

    def check_timeout(self, now: float) -> Optional[Outcome]:
        """Close the session against whoever owes a move past the deadline."""
        if self.phase not in (Phase.LAYER_BISECT, Phase.OP_BISECT):
            return None
        if now - self.last_move <= self.timeout:
            return None
        self.forfeited = self.turn
        self.outcome = (
            Outcome.CLAIMANT_WINS if self.turn is Party.DEFENDANT else Outcome.DEFENDANT_WINS
        )
        self.phase = Phase.CLOSED
        return self.outcome

    # -- adjudication -------------------------------------------------------

    def adjudication_keys(self) -> Tuple[StateKey, StateKey]:
        """(last agreed state, defendant's disputed op output)."""
        if self.phase is not Phase.ADJUDICATE:
            raise WrongPhase(self.phase.value)
        k, j = self.layer, self.op
        if j > 0:
            before = ("op", k, j - 1)
        elif k > 0:
            before = ("layer", k - 1)
        else:
            before = ("query",)
        disputed = ("op", k, j)
        if disputed not in self.asserted_states:
            # the last op of a layer is the layer output asserted earlier
            disputed = ("layer", k)
        return before, disputed

    def adjudicate(self, spec: ModelSpec, input_state: bytes, defendant_claim: bytes) -> Outcome:
        """Re-execute the single disputed op and close the session."""
        if self.phase is not Phase.ADJUDICATE:
            raise WrongPhase(self.phase.value)
        before, _ = self.adjudication_keys()
        d, c = self.asserted_states[before]
        if not (d == c == input_state):
            raise ValueError("input_state is not the last agreed state")
        honest = op_step(spec.theta_seed, self.layer, self.op, input_state)
        self.outcome = Outcome.DEFENDANT_WINS if honest == defendant_claim else Outcome.CLAIMANT_WINS
        self.rounds += 1
        self.phase = Phase.CLOSED
        return self.outcome

    def resolve(self, spec: ModelSpec) -> Outcome:
        before, disputed = self.adjudication_keys()
        return self.adjudicate(spec, self.asserted_states[before][0], self.asserted_states[disputed][0])

    @property
    def loser(self) -> Optional[str]:
        if self.outcome is None:
            return None
        return self.defendant if self.outcome is Outcome.CLAIMANT_WINS else self.claimant

    def transcript_bytes(self) -> bytes:
        return b"\n".join(r.to_bytes() for r in self.transcript)


def open_dispute(
    session_id: str,
    batch_id: str,
    tuple_index: int,
    claimant: str,
    defendant: str,
    query_hash: bytes,
    claimant_trace_root: bytes,
    defendant_trace_root: bytes,
    bond: float,
    claimant_stake: float,
    layer_count: int,
    ops_per_layer: int,
    now: float = 0.0,
    window_closes_at: float = float("inf"),
    timeout: float = 30.0,
) -> DisputeSession:
    if now > window_closes_at:
        raise WindowClosed(f"window for {batch_id} closed at {window_closes_at}")
    if claimant_stake < bond:
        raise InsufficientBond(f"{claimant} stake {claimant_stake} < bond {bond}")
    if claimant_trace_root == defendant_trace_root:
        raise NoDivergence(f"{batch_id}[{tuple_index}]")
    s = DisputeSession(
        session_id=session_id,
        batch_id=batch_id,
        tuple_index=tuple_index,
        claimant=claimant,
        defendant=defendant,
        claimant_bond=bond,
        layer_count=layer_count,
        ops_per_layer=ops_per_layer,
        lo=0,
        hi=layer_count - 1,
        timeout=timeout,
        last_move=now,
    )
    s.asserted_states[("query",)] = (query_hash, query_hash)
    s.asserted_states[("layer", layer_count - 1)] = (defendant_trace_root, claimant_trace_root)
    s._settle_phase()
    return s


# -- parties ----------------------------------------------------------------


class TraceView:
    """What a party reports for each probed state: the honest computation."""

    def __init__(self, spec: ModelSpec, trace: ExecutionTrace) -> None:
        self.spec = spec
        self.trace = trace

    @property
    def final_state(self) -> bytes:
        return self.layer_state(self.spec.layer_count - 1)

    def layer_state(self, layer: int) -> bytes:
        return self.trace.layer_states[layer]

    def op_state(self, layer: int, op: int) -> bytes:
        return op_states(self.trace, self.spec, layer)[op]

    def state(self, key: StateKey) -> bytes:
        if key[0] == "layer":
            return self.layer_state(key[1])
        if key[0] == "op":
            return self.op_state(key[1], key[2])
        return self.trace.query_hash


class CorruptedView(TraceView):
    """A trace that departs from the honest one at op ``(layer, op)``.

    The corrupted op output is replaced by an arbitrary digest and every
    later op is chained honestly from it, so the lie is self-consistent
    downstream and only the first divergent op exposes it.
    """

    def __init__(self, spec: ModelSpec, trace: ExecutionTrace, layer: int, op: int, salt: bytes = b"") -> None:
        super().__init__(spec, trace)
        if not (0 <= layer < spec.layer_count and 0 <= op < spec.ops_per_layer):
            raise IndexError("corruption point outside the trace")
        self.bad_layer = layer
        self.bad_op = op
        self.salt = salt
        self._layers: Dict[int, List[bytes]] = {}
        self._tail: List[bytes] = []  # layer outputs from bad_layer onward

    def _bad_layer_ops(self) -> List[bytes]:
        if self.bad_layer not in self._layers:
            honest = op_states(self.trace, self.spec, self.bad_layer)
            ops = honest[: self.bad_op]
            state = digest(b"otr/corrupt", self.salt, honest[self.bad_op],
                           u64(self.bad_layer), u64(self.bad_op))
            ops.append(state)
            for j in range(self.bad_op + 1, self.spec.ops_per_layer):
                state = op_step(self.spec.theta_seed, self.bad_layer, j, state)
                ops.append(state)
            self._layers[self.bad_layer] = ops
        return self._layers[self.bad_layer]

    def _layer_ops(self, layer: int) -> List[bytes]:
        if layer < self.bad_layer:
            return op_states(self.trace, self.spec, layer)
        if layer == self.bad_layer:
            return self._bad_layer_ops()
        if layer not in self._layers:
            state = self.layer_state(layer - 1)
            ops = []
            for j in range(self.spec.ops_per_layer):
                state = op_step(self.spec.theta_seed, layer, j, state)
                ops.append(state)
            self._layers[layer] = ops
        return self._layers[layer]

    def layer_state(self, layer: int) -> bytes:
        if layer < self.bad_layer:
            return self.trace.layer_states[layer]
        if not self._tail:
            self._tail.append(self._bad_layer_ops()[-1])
        while len(self._tail) <= layer - self.bad_layer:
            nxt = self.bad_layer + len(self._tail)
            state = self._tail[-1]
            for j in range(self.spec.ops_per_layer):
                state = op_step(self.spec.theta_seed, nxt, j, state)
            self._tail.append(state)
        return self._tail[layer - self.bad_layer]

    def op_state(self, layer: int, op: int) -> bytes:
        return self._layer_ops(layer)[op]


def play_dispute(
    session: DisputeSession,
    spec: ModelSpec,
    defendant: TraceView,
    claimant: TraceView,
    start: float = 0.0,
    move_time: float = 1.0,
) -> DisputeSession:
    """Drive a session to completion with both parties' reporters."""
    now = start
    while session.phase in (Phase.LAYER_BISECT, Phase.OP_BISECT):
        key = session.probe()
        now += move_time
        session.submit(Party.DEFENDANT, defendant.state(key), now)
        now += move_time
        session.submit(Party.CLAIMANT, claimant.state(key), now)
    if session.phase is Phase.ADJUDICATE:
        session.resolve(spec)
    return session


def first_divergence(spec: ModelSpec, a: TraceView, b: TraceView) -> Optional[Tuple[int, int]]:
    """Linear scan over every op state; (layer, op) of the first difference."""
    for layer in range(spec.layer_count):
        for op in range(spec.ops_per_layer):
            if a.op_state(layer, op) != b.op_state(layer, op):
                return layer, op
    return None
