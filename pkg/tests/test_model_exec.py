import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otrlab.model_exec import (
    IndexOutOfRange,
    ModelSpec,
    UnknownStrategy,
    op_state,
    op_states,
    op_step,
    run_inference,
    sample_poq_score,
    sample_poq_scores,
    table4_quality,
    QualityModel,
    ScoreProfile,
)

from conftest import BIG, SMALL


def test_deterministic():
    a, b = run_inference(BIG, b"q"), run_inference(BIG, b"q")
    assert a.final_state == b.final_state and a.response == b.response


def test_degenerate_chain():
    spec = ModelSpec("tiny", 1, 1, 3)
    tr = run_inference(spec, b"q")
    assert tr.layer_states == (op_step(3, 0, 0, hashlib.sha256(b"q").digest()),)


def test_op_step_matches_raw_sha256():
    # independent oracle for the chained step encoding
    state = bytes(32)
    raw = hashlib.sha256(b"otr/op" + (5).to_bytes(8, "big") + (2).to_bytes(4, "big")
                         + (3).to_bytes(4, "big") + state).digest()
    assert op_step(5, 2, 3, state) == raw


def test_chain_closure():
    tr = run_inference(BIG, b"q")
    assert op_state(tr, BIG, 0, BIG.ops_per_layer - 1) == tr.layer_states[0]


def test_index_out_of_range():
    tr = run_inference(SMALL, b"q")
    with pytest.raises(IndexOutOfRange):
        op_state(tr, SMALL, SMALL.layer_count, 0)
    with pytest.raises(IndexOutOfRange):
        op_state(tr, SMALL, 0, SMALL.ops_per_layer)


def test_models_separate():
    for i in range(1000):
        q = i.to_bytes(4, "big")
        assert run_inference(BIG, q).response != run_inference(SMALL, q).response


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), L=st.integers(1, 64), M=st.integers(1, 64), q=st.binary(max_size=32))
def test_trace_chain_property(seed, L, M, q):
    spec = ModelSpec("m", L, M, seed)
    tr = run_inference(spec, q)
    assert len(tr.layer_states) == L
    state = tr.query_hash
    for layer in range(L):
        for op in range(M):
            state = op_step(seed, layer, op, state)
        assert state == tr.layer_states[layer]
        assert op_states(tr, spec, layer)[-1] == tr.layer_states[layer]


def test_table4_means():
    qm = table4_quality()
    rng = np.random.default_rng(0)
    n = 100_000
    for name, prof in qm.profiles.items():
        judge, human = sample_poq_scores(qm, name, rng, n)
        assert abs(judge.mean() - prof.judge_mean) < 3 * prof.judge_std / np.sqrt(n) + 1e-3
        assert abs(human.mean() - prof.human_mean) < 3 * prof.human_std / np.sqrt(n) + 1e-3
        assert ((0 <= judge) & (judge <= 1)).all()


def test_zero_std_returns_mean_exactly():
    qm = QualityModel({"fixed": ScoreProfile(0.83, 0.0, 0.4, 0.0)})
    assert sample_poq_score(qm, "fixed", np.random.default_rng(1)) == (0.83, 0.4)


def test_unknown_strategy():
    with pytest.raises(UnknownStrategy):
        sample_poq_score(table4_quality(), "nobody", np.random.default_rng(0))


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec("x", 0, 1, 0)
    with pytest.raises(ValueError):
        ScoreProfile(1.2, 0, 0, 0)
