"""
The model downgrade attack under two verification regimes
=========================================================

A sequencer is paid for a 70B model but serves an 8B one that was tuned to
please the judge. Under judge-score verification it is paid almost every
time. Under attestation it is either rejected outright (honest measurement
of the wrong binary) or, if it stole an enclave key and forged the
measurement, slashed by spot-checks and fishermen.
"""

import dataclasses

from otrlab.config import load_preset
from otrlab.simnet import run_scenario

cfg = load_preset("downgrade-attack")
for s in cfg.sequencers:
    print(f"{s.id:<18} strategy={s.strategy.value:<9} serves={s.serves:<11} claims={s.claims}")


def alone(seq_id):
    seq = next(s for s in cfg.sequencers if s.id == seq_id)
    return dataclasses.replace(cfg, sequencers=(seq,), queries=4000)


# judge-score verification: the adversarial 8B model clears the 0.80 bar
poq = run_scenario(alone("seq-forged-8b"), "PoQ")
print("\nPoQ   adversary mean profit per query:", round(poq.adversary_mean_profit, 4))

# attestation with truthful measurement: attribution fails, nothing is paid
truthful = run_scenario(alone("seq-truthful-8b"), "OTR")
print("OTR   truthful downgrade:", dict(truthful.status_counts), round(truthful.adversary_mean_profit, 4))

# forged measurement: passes attestation, then gets caught
forged = run_scenario(alone("seq-forged-8b"), "OTR")
print("OTR   forged downgrade:  ", dict(forged.status_counts), round(forged.adversary_mean_profit, 4))
print("      fraud proofs won:", forged.fraud_detections, "of", forged.cheat_attempts, "cheating batches")
