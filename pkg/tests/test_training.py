import math

import numpy as np
import pytest

from pcdual.data import SyntheticSpec, gen_synthetic
from pcdual.diffcore import Tensor, stream
from pcdual.errors import CheckpointError, ConfigError
from pcdual.training import (Checkpoint, OptimizerState, RunConfig, adam_step, decode_checkpoint,
                             encode_checkpoint, load_checkpoint, lr_at, parse_config, save_checkpoint)
from pcdual.training.loops import (build_encoder, build_head, encoder_checksum, evaluate, model_checkpoint,
                                   pretrain, restore, train_downstream)

from conftest import tiny_run_config


def test_lr_schedule():
    assert lr_at(0) == 1e-3
    assert lr_at(10) == 5e-4
    # floor(25 / 10) = 2 halvings
    assert lr_at(25) == 2.5e-4
    assert lr_at(35) == 1.25e-4
    rates = [lr_at(e) for e in range(60)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    for e in range(10, 60, 10):
        assert lr_at(e) == lr_at(e - 1) / 2
    with pytest.raises(ValueError):
        lr_at(-1)


def test_adam_zero_gradient_identity(rng):
    p = {"w": Tensor(rng.normal(size=(3, 2)))}
    start = p["w"].values.copy()
    state = OptimizerState()
    for _ in range(5):
        adam_step(p, {"w": np.zeros((3, 2))}, state, 1e-3)
    assert np.array_equal(p["w"].values, start)
    assert state.step == 5


def test_adam_first_step():
    p = {"w": Tensor(np.array([1.0]))}
    adam_step(p, {"w": np.array([1.0])}, OptimizerState(), 1e-3)
    m_hat, v_hat = 1.0, 1.0
    expected = 1.0 - 1e-3 * m_hat / (math.sqrt(v_hat) + 1e-8)
    assert abs(p["w"].values[0] - expected) < 1e-12
    assert p["w"].values[0] == pytest.approx(0.999, abs=1e-8)


def test_adam_weight_decay_shrinks():
    for decoupled in (False, True):
        p = {"w": Tensor(np.array([1.0]))}
        adam_step(p, {"w": np.array([0.0])}, OptimizerState(weight_decay=0.1, decoupled=decoupled), 1e-3)
        assert p["w"].values[0] < 1.0


def test_adam_non_finite_names_parameter():
    p = {"layer.w": Tensor(np.array([1.0]))}
    with pytest.raises(FloatingPointError, match="layer.w"):
        adam_step(p, {"layer.w": np.array([np.nan])}, OptimizerState(), 1e-3)


def test_checkpoint_round_trip(tmp_path, rng):
    tensors = {"a.weight": rng.normal(size=(3, 4)).astype(np.float32), "scalar": np.float32(2.5).reshape(()),
               "a.bias": rng.normal(size=4).astype(np.float32)}
    ckpt = Checkpoint(tensors, bytes(range(32)), epoch=7)
    save_checkpoint(ckpt, tmp_path / "x.ckpt")
    back = load_checkpoint(tmp_path / "x.ckpt")
    assert back.epoch == 7 and back.config_hash == bytes(range(32))
    assert list(back.tensors) == list(tensors)
    for name, value in tensors.items():
        assert back.tensors[name].tobytes() == value.tobytes()
    assert encode_checkpoint(back) == encode_checkpoint(ckpt)


def test_checkpoint_layout():
    blob = encode_checkpoint(Checkpoint({"w": np.ones((2,), np.float32)}, b"\x01" * 32, 3))
    assert blob[:4] == b"PCDU"
    assert blob[4:12] == (1).to_bytes(4, "little") + (1).to_bytes(4, "little")
    assert blob[12:14] == (1).to_bytes(2, "little") and blob[14:15] == b"w"
    assert blob[15] == 1 and blob[16:20] == (2).to_bytes(4, "little")
    assert np.frombuffer(blob[20:28], "<f4").tolist() == [1.0, 1.0]
    assert blob[28:60] == b"\x01" * 32 and blob[60:] == (3).to_bytes(4, "little")


def test_checkpoint_rejections():
    blob = encode_checkpoint(Checkpoint({"w": np.ones((2, 2), np.float32)}))
    with pytest.raises(CheckpointError, match="PCDU"):
        decode_checkpoint(b"XXXX" + blob[4:])
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(blob[:-5])
    with pytest.raises(CheckpointError, match="version"):
        decode_checkpoint(blob[:4] + (9).to_bytes(4, "little") + blob[8:])
    with pytest.raises(CheckpointError):
        decode_checkpoint(blob + b"\x00")


def test_config_parsing():
    cfg = parse_config("task = seg\npoints = 2048  # comment\ntau = 0.1\ndecoupled_decay = true\n"
                       "n1_levels = 1024,256\n")
    assert (cfg.task, cfg.points, cfg.tau, cfg.decoupled_decay, cfg.n1_levels) == ("seg", 2048, 0.1, True, (1024, 256))
    assert cfg.downstream_decay == 1.0
    assert RunConfig().downstream_decay == 1e-6
    assert parse_config(cfg.canonical()) == cfg
    assert parse_config(cfg.canonical()).hash() == cfg.hash()
    assert cfg.hash() != RunConfig().hash()
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("learning_rate = 0.1")
    with pytest.raises(ConfigError):
        parse_config("points = 100")
    with pytest.raises(ConfigError):
        parse_config("epochs = many")
    with pytest.raises(ConfigError):
        parse_config("folds = 3\nfold = 3")
    assert parse_config("folds = 5\nfold = 4").split_spec().fold == 4


def test_defaults_follow_reported_setup():
    cfg = RunConfig()
    assert (cfg.batch_size, cfg.epochs, cfg.base_lr, cfg.tau, cfg.weight_decay_pretrain) == (32, 200, 1e-3, 0.5, 1e-6)


@pytest.fixture(scope="module")
def pool():
    return gen_synthetic(SyntheticSpec(4, 4, 32), stream(0, "synthetic"))


def test_pretrain_deterministic(pool):
    cfg = tiny_run_config()
    a = pretrain(pool, cfg)
    b = pretrain(pool, cfg)
    assert a.losses == b.losses
    assert encoder_checksum(a.model) == encoder_checksum(b.model)
    assert len(a.losses) == 3 and all(np.isfinite(a.losses))


def test_pretrain_resume_matches_uninterrupted(pool):
    cfg = tiny_run_config(epochs=4)
    full = pretrain(pool, cfg)
    first = pretrain(pool, cfg, stop_after=2)
    ckpt = decode_checkpoint(encode_checkpoint(model_checkpoint(first.model, cfg, 2, first.optimizer)))
    rest = pretrain(pool, cfg, resume=ckpt)
    assert first.losses + rest.losses == full.losses
    assert encoder_checksum(rest.model) == encoder_checksum(full.model)


def test_restore_requires_optimizer_state(pool):
    cfg = tiny_run_config(epochs=1)
    res = pretrain(pool, cfg)
    with pytest.raises(CheckpointError):
        pretrain(pool, cfg.with_overrides(epochs=2), resume=model_checkpoint(res.model, cfg, 1))


def test_downstream_freezes_encoder_and_is_deterministic(pool):
    cfg = tiny_run_config(downstream_epochs=3)
    enc = pretrain(pool, cfg).model
    before = encoder_checksum(enc)
    h1 = train_downstream(enc, pool, cfg)
    assert encoder_checksum(enc) == before
    h2 = train_downstream(enc, pool, cfg)
    s1, s2 = h1.model.state_dict(), h2.model.state_dict()
    assert all(np.array_equal(s1[k], s2[k]) for k in s1)


def test_downstream_rejects_bad_labels(pool):
    cfg = tiny_run_config(num_classes=1)
    with pytest.raises(ValueError):
        train_downstream(build_encoder(cfg), pool, cfg)


def test_evaluate_deterministic(pool):
    cfg = tiny_run_config(task="seg", downstream_epochs=2)
    enc = build_encoder(cfg).eval()
    head = train_downstream(enc, pool, cfg).model
    r1, r2 = evaluate(enc, head, pool, cfg), evaluate(enc, head, pool, cfg)
    assert r1.values == r2.values
    assert "IoU_A.(%)" in r1.values
    with pytest.raises(ValueError):
        evaluate(enc, head, pool.subset([]), cfg)


def test_checkpoint_restores_model(pool, tmp_path):
    cfg = tiny_run_config()
    enc = pretrain(pool, cfg).model
    save_checkpoint(model_checkpoint(enc, cfg, 3), tmp_path / "enc.ckpt")
    fresh = build_encoder(cfg.with_overrides(seed=99))
    restore(fresh, load_checkpoint(tmp_path / "enc.ckpt"))
    assert encoder_checksum(fresh) == encoder_checksum(enc)
    with pytest.raises(CheckpointError):
        restore(build_encoder(cfg.with_overrides(task="seg")), load_checkpoint(tmp_path / "enc.ckpt"))


def test_random_head_envelope(pool):
    """Untrained heads should sit near chance on a balanced set, not at either extreme."""
    v_acc, a_acc = [], []
    for seed in range(20):
        cfg = tiny_run_config(seed=seed)
        enc = build_encoder(cfg).eval()
        head = build_head(cfg, enc).eval()
        rep = evaluate(enc, head, pool, cfg)
        v_acc.append(rep.values["V. acc(%)"])
        a_acc.append(rep.values["A. acc(%)"])
        assert 20 <= (v_acc[-1] + a_acc[-1]) / 2 <= 80
    assert 20 <= np.mean(v_acc) <= 80 and 20 <= np.mean(a_acc) <= 80


def test_head_checkpoint_names(pool):
    cfg = tiny_run_config(downstream_epochs=1)
    enc = build_encoder(cfg).eval()
    head = train_downstream(enc, pool, cfg).model
    ckpt = model_checkpoint(head, cfg, 1)
    assert all(name.startswith("head.cls.") for name in ckpt.tensors)
    fresh = build_head(cfg.with_overrides(seed=5), enc)
    restore(fresh, ckpt)
    assert all(np.array_equal(fresh.state_dict()[k], v) for k, v in head.state_dict().items())
    seg_cfg = cfg.with_overrides(task="seg")
    with pytest.raises(CheckpointError):
        restore(build_head(seg_cfg, build_encoder(seg_cfg)), ckpt)
