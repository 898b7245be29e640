"""Smoke tests for the lpt_engine python module."""

import json

import pytest

import lpt_engine


def tiny_config(**overrides):
    cfg = json.loads(lpt_engine.default_config())
    cfg.update(
        {
            "seed": 3,
            "epochs": 1,
            "batch_size": 8,
            "data": {"n": 96, "noise": 0.12, "corrupt_frac": 0.1, "test_n": 64},
            "cell": {"num_nodes": 4, "width": 3},
            "tester": {"encoder_hidden": 4, "latent_dim": 4},
        }
    )
    cfg.update(overrides)
    return json.dumps(cfg)


def test_default_config_round_trips():
    echoed = lpt_engine.validate_config(lpt_engine.default_config())
    cfg = json.loads(echoed)
    assert cfg["schema_version"] == 1
    assert cfg["lambda"] == 1.0
    assert cfg["gamma"] == 1.0


def test_unknown_config_key_rejected():
    with pytest.raises(Exception, match="lambada"):
        lpt_engine.validate_config('{"lambada": 1}')


def test_synth_two_class_counts():
    data = lpt_engine.synth_two_class(200, noise=0.1, corrupt_frac=0.1, seed=5)
    assert len(data["x"]) == 200
    assert sum(data["corrupted"]) == 20
    assert set(data["label"]) == {0, 1}


def test_search_is_deterministic_and_returns_a_genotype():
    r1 = lpt_engine.search(tiny_config())
    r2 = lpt_engine.search(tiny_config())
    assert r1["state_hash"] == r2["state_hash"]
    assert r1["genotype_json"] == r2["genotype_json"]
    genotype = r1["genotype"]
    assert [n["node"] for n in genotype["nodes"]] == [2, 3]
    for node in genotype["nodes"]:
        for edge in node["edges"]:
            assert edge["op"] != "zero"
    assert r1["steps"] == 6  # ceil(48 / 8) steps x 1 epoch


def test_eval_genotype_reports_error():
    r = lpt_engine.search(tiny_config())
    ev = lpt_engine.eval_genotype(r["genotype_json"], tiny_config())
    assert 0.0 <= ev["error_rate"] <= 1.0
    assert ev["mean_loss"] > 0.0
    assert len(ev["epoch_losses"]) == 1


def test_oracle_suite_passes():
    checks = lpt_engine.oracle("bilevel")
    assert len(checks) >= 2
    assert all(c["pass"] for c in checks)
