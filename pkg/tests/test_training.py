import json

import numpy as np
import pytest

from motorhrl.basal_ganglia import activity
from motorhrl.checkpoint import CheckpointError, load_checkpoint
from motorhrl.config import load_config
from motorhrl.training import (
    evaluate_run,
    fusion_reward,
    load_low,
    params_hash,
    pretrain,
    tasktrain,
    train_flat_sac,
)

TINY = [
    "net.hidden=16",
    "pretrain.total_samples=2000", "pretrain.warmup_samples=200", "pretrain.batch_size=32",
    "pretrain.samples_per_update=100", "pretrain.updates=2", "pretrain.horizon=50",
    "pretrain.eval_interval=1000", "pretrain.eval_episodes=2",
    "tasktrain.total_samples=1500", "tasktrain.warmup_samples=200", "tasktrain.batch_size=32",
    "tasktrain.samples_per_update=100", "tasktrain.updates=2", "tasktrain.horizon=60",
    "tasktrain.eval_interval=500", "tasktrain.eval_episodes=3",
]


def tiny(*extra):
    return load_config(None, [*TINY, *extra])


@pytest.fixture(scope="module")
def pre(tmp_path_factory):
    out = tmp_path_factory.mktemp("pre")
    return out, pretrain(tiny("pretrain.dump_buffer=true", "deterministic=true"), out)


def test_fusion_reward_examples():
    assert fusion_reward(1.0, 2.0, 0.5, 0.5) == pytest.approx(0.5 + 0.5 * 0.5 * 2.0)
    assert fusion_reward(1.0, 2.0, 1.0, 0.0) == pytest.approx(2.0)
    assert fusion_reward(1.0, 2.0, 0.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fusion_reward(0.0, 0.0, 0.0, 1.1)


def test_pretrain_outputs(pre):
    out, res = pre
    for name in ("config.yaml", "metrics.jsonl", "metrics.csv", "manifest.json", "episodes.csv", "buffer.npz",
                 "checkpoints/low.ckpt"):
        assert (out / name).is_file(), name
    recs = [json.loads(line) for line in (out / "metrics.jsonl").read_text().splitlines()]
    counts = [r["sample_count"] for r in recs]
    assert counts == sorted(counts) and counts[-1] == 2000
    assert all("wall_clock" not in r for r in recs)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "pretrain" and manifest["schema_version"] == 1


def test_pretrain_buffer_rewards_recompute(pre):
    out, res = pre
    buf = dict(np.load(out / "buffer.npz"))
    assert len(buf["r_a"]) == 2000
    np.testing.assert_allclose(buf["r_a"], fusion_reward(buf["r_f"], buf["r_e"], buf["h"], 0.5), atol=1e-6)
    cfg = tiny()
    np.testing.assert_allclose(buf["h"], activity(cfg.activity(), buf["z"]), atol=1e-12)
    assert np.all(np.abs(buf["z_c"]) < 1)
    assert np.all(buf["r_f"] <= np.log(10) + 1e-9)


def test_pretrain_counters(pre):
    _, res = pre
    # updates start once warmup is over: cycles at 200, 300, ..., 2000
    assert res.counters["update_cycles"] == 19
    assert res.counters["sac_updates"] == res.counters["disc_updates"] == res.counters["sd_updates"] == 38


def test_pretrain_is_deterministic(pre, tmp_path):
    out, _ = pre
    pretrain(tiny("pretrain.dump_buffer=true", "deterministic=true"), tmp_path)
    assert (tmp_path / "metrics.jsonl").read_bytes() == (out / "metrics.jsonl").read_bytes()
    assert (tmp_path / "checkpoints/low.ckpt").read_bytes() == (out / "checkpoints/low.ckpt").read_bytes()


def test_checkpoint_dims_are_checked(pre):
    out, _ = pre
    load_low(tiny(), out / "checkpoints/low.ckpt")
    with pytest.raises(CheckpointError):
        load_low(tiny("net.hidden=32"), out / "checkpoints/low.ckpt")
    with pytest.raises(CheckpointError):
        load_low(tiny("skill.latent_dim=5"), out / "checkpoints/low.ckpt")


def test_tasktrain_freezes_motor_policy(pre, tmp_path):
    out, _ = pre
    ckpt = out / "checkpoints/low.ckpt"
    before = load_checkpoint(ckpt)[0]
    res = tasktrain(tiny(), ckpt, tmp_path)
    assert res.low_hash_before == res.low_hash_after == params_hash(before)
    assert (tmp_path / "checkpoints/high.ckpt").is_file()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["low_params_sha256_before"] == manifest["low_params_sha256_after"] == res.low_hash_before
    score = evaluate_run(tiny(), tmp_path / "checkpoints/high.ckpt", ckpt, episodes=3, seed=5)
    assert score == evaluate_run(tiny(), tmp_path / "checkpoints/high.ckpt", ckpt, episodes=3, seed=5)


def test_tasktrain_rejects_high_checkpoint_as_low(pre, tmp_path):
    out, _ = pre
    tasktrain(tiny(), out / "checkpoints/low.ckpt", tmp_path)
    with pytest.raises(CheckpointError):
        load_low(tiny(), tmp_path / "checkpoints/high.ckpt")


def test_flat_baseline_runs(tmp_path):
    res = train_flat_sac(tiny(), tmp_path)
    assert np.isfinite(res.final_score)
    assert json.loads((tmp_path / "manifest.json").read_text())["command"] == "baseline"
