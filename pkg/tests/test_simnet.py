import math

import pytest
from hypothesis import given, settings, strategies as st

from otrlab.config import from_dict
from otrlab.contract import Mode
from otrlab.simnet import (
    CostParams,
    EventKind,
    EventQueue,
    LatencyParams,
    SimEvent,
    TimeTravel,
    amortized_cost,
    amortized_latency,
    finality_latency,
    opml_cost,
    run_scenario,
    schedule,
    zkml_cost,
)

MODELS = [
    {"model_id": "llama3-70b", "layer_count": 80, "ops_per_layer": 8, "theta_seed": 70, "cost_per_query": 0.9},
    {"model_id": "llama3-8b", "layer_count": 32, "ops_per_layer": 8, "theta_seed": 8, "cost_per_query": 0.1},
]


def _cfg(**kw):
    raw = {"seed": 3, "queries": 400, "batch_size": 4, "models": MODELS,
           "registry": [{"model_id": "llama3-70b"}]}
    raw.update(kw)
    return from_dict(raw)


def _seq(sid, strategy, serves="llama3-8b", **kw):
    return {"id": sid, "strategy": strategy, "serves": serves, "claims": "llama3-70b", **kw}


def test_queue_tie_rule_and_empty():
    q = EventQueue()
    assert q.run(lambda e: None) == 0
    seen = []
    q.schedule(1.0, EventKind.QUERY_SUBMITTED, "a")
    q.schedule(1.0, EventKind.QUERY_SUBMITTED, "b")
    q.schedule(0.5, EventKind.QUERY_SUBMITTED, "c")
    q.run(lambda e: seen.append(e.payload))
    assert seen == ["c", "a", "b"]


def test_no_time_travel():
    q = EventQueue()
    q.schedule(2.0, EventKind.QUERY_SUBMITTED)

    def handler(ev):
        q.schedule(1.0, EventKind.QUERY_SUBMITTED)

    with pytest.raises(TimeTravel):
        q.run(handler)


def test_schedule_returns_queue():
    q = EventQueue()
    assert schedule(q, SimEvent(0.0, 0, EventKind.WINDOW_EXPIRED, None)) is q and len(q) == 1


def test_finality_latency_examples():
    lat = LatencyParams.from_t_tee(0.5, t_sig=0.0)
    assert finality_latency(Mode.OPTIMISTIC, lat) == pytest.approx(0.5)
    assert finality_latency(Mode.SPOT_CHECK, lat) == pytest.approx(30.5)
    zero = LatencyParams(t_native=0.0, t_sig=0.0)
    assert finality_latency(Mode.SPOT_CHECK, zero) == 30.0


def test_amortized_latency_examples():
    lat = LatencyParams.from_t_tee(0.5)
    assert amortized_latency(0, lat) == pytest.approx(0.5)
    assert amortized_latency(1, lat) == pytest.approx(30.5)
    assert amortized_latency(0.01, lat) == pytest.approx(0.8)


def test_cost_examples():
    c = CostParams()
    assert round(amortized_cost(0, c), 2) == 0.07
    assert round(amortized_cost(0.01, c), 2) == 0.07
    assert round(zkml_cost(c), 2) == 45.05
    assert round(opml_cost(c), 2) == 0.06


def test_all_honest_run():
    m = run_scenario(_cfg(sequencers=[_seq("h", "honest", serves="llama3-70b")]))
    assert m.slash_count == 0
    assert set(m.status_counts) == {"HardFinal"}


def test_forged_with_certain_fishermen():
    cfg = _cfg(sequencers=[_seq("f", "forged", stake=1e9)], fishermen={"p_fish": 1.0})
    m = run_scenario(cfg)
    assert m.cheat_attempts > 0 and m.slash_count == m.cheat_attempts


def test_truthful_downgrade_rejected():
    m = run_scenario(_cfg(sequencers=[_seq("d", "downgrade")]))
    assert set(m.status_counts) == {"Rejected"}
    assert (m.profits() < 0).all()


def test_determinism():
    cfg = _cfg(sequencers=[_seq("h", "honest", serves="llama3-70b", weight=2), _seq("f", "forged")],
               fishermen={"p_fish": 0.5}, security={"rho": 0.2})
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.audit == b.audit and a.records == b.records


def test_finality_totality():
    cfg = _cfg(sequencers=[_seq("h", "honest", serves="llama3-70b"), _seq("f", "forged"), _seq("l", "lazy")],
               fishermen={"p_fish": 0.7}, security={"rho": 0.1})
    for baseline in ("OTR", "OPML"):
        m = run_scenario(cfg, baseline)
        assert set(m.status_counts) <= {"HardFinal", "Slashed", "Rejected"}
        hard = [r.hard_finality_latency for r in m.records if r.status == "HardFinal"]
        assert max(hard) <= cfg.latency.t_tee + cfg.latency.t_chal + 1e-9


@settings(max_examples=10, deadline=None)
@given(rho=st.floats(0, 0.3), seed=st.integers(0, 2**32), bs=st.integers(1, 4))
def test_closed_form_agreement(rho, seed, bs):
    cfg = from_dict({"seed": seed, "queries": 2000, "batch_size": bs, "models": MODELS[:1],
                     "security": {"rho": rho}})
    m = run_scenario(cfg)
    # batch-level sampling: standard error from per-batch means
    lat = m.finality_samples.reshape(-1, bs).mean(axis=1) if 2000 % bs == 0 else m.finality_samples
    se = lat.std(ddof=1) / math.sqrt(lat.size)
    expected = cfg.latency.t_tee + (1 - rho) * cfg.latency.t_sig + rho * cfg.latency.t_zk_prove
    assert abs(m.l_avg - expected) <= 3 * se + 1e-9
    cost = m.cost_samples.reshape(-1, bs).mean(axis=1) if 2000 % bs == 0 else m.cost_samples
    cse = cost.std(ddof=1) / math.sqrt(cost.size)
    assert abs(m.amortized_cost - amortized_cost(rho, cfg.costs)) <= 3 * cse + 1e-9


def test_baselines():
    cfg = _cfg(sequencers=[_seq("h", "honest", serves="llama3-70b")])
    z = run_scenario(cfg, "ZKML")
    assert z.l_avg == 1200.0 and round(z.amortized_cost, 2) == 45.05
    o = run_scenario(cfg, "OPML")
    assert round(o.amortized_cost, 2) == 0.06
    assert o.l_avg == pytest.approx(cfg.latency.t_native + cfg.latency.t_chal)
