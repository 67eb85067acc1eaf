"""
One fraud proof, round by round
===============================

A fisherman re-executes a query and disagrees with the sequencer's output.
The two sides bisect over layers, then over ops inside the layer they
isolated, and the contract re-executes a single op to decide.
"""

from otrlab.dispute import CorruptedView, TraceView, first_divergence, open_dispute, play_dispute
from otrlab.model_exec import ModelSpec, run_inference

spec = ModelSpec("llama3-70b", layer_count=80, ops_per_layer=8, theta_seed=70)
trace = run_inference(spec, b"what is the capital of france?")

# the sequencer departs from the honest computation at layer 53, op 6
liar = CorruptedView(spec, trace, layer=53, op=6, salt=b"demo")
fisher = TraceView(spec, trace)
print("first divergent op by linear scan:", first_divergence(spec, liar, fisher))

session = open_dispute(
    "demo/d0", "b000001", 0, claimant="fisher-0", defendant="seq-7",
    query_hash=trace.query_hash,
    claimant_trace_root=fisher.final_state, defendant_trace_root=liar.final_state,
    bond=9.0, claimant_stake=1000.0,
    layer_count=spec.layer_count, ops_per_layer=spec.ops_per_layer,
)
play_dispute(session, spec, defendant=liar, claimant=fisher)

for rec in session.transcript:
    agree = "agree" if rec.defendant_digest == rec.claimant_digest else "DISAGREE"
    print(f"{rec.phase:<12} [{rec.lo:>2},{rec.hi:>2}] probe={rec.probe} {agree}")
print(f"isolated layer {session.layer} op {session.op} in {session.rounds} rounds -> {session.outcome.value}")
