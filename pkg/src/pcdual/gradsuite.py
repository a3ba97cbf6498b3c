"""Central-difference checks for every differentiable op and both pipelines.

Each check builds a scalar loss from random 64-bit inputs and compares the
recorded gradient against central differences with step 1e-5.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .contrastive import cosine_similarity, ntxent_loss
from .diffcore import BatchNormState, Tensor, grad_check, linear, max_pool_points, ops, pointwise_conv
from .downstream import ClassifierHead, SegmenterHead, classify, cross_entropy, segment
from .encoders import DualEncoder, _interpolate, tiny_config

STEP = 1e-5
THRESHOLD = 1e-4


def _param(rng, *shape, name=None):
    return Tensor(rng.normal(size=shape), requires_grad=True, name=name)


def _weighted(out: Tensor, rng) -> Tensor:
    """Random linear functional of ``out``, so every output entry matters."""
    w = rng.normal(size=out.shape)
    return ops.sum(ops.mul(out, w))


def _bn(channels, rng, mode):
    state = BatchNormState.create(channels)
    state.gamma.values[:] = rng.uniform(0.5, 1.5, channels)
    state.beta.values[:] = rng.normal(size=channels)
    state.running_mean = rng.normal(size=channels)
    state.running_var = rng.uniform(0.5, 2.0, channels)
    state.mode = mode
    return state


def check_pointwise_conv(rng, mode="eval"):
    x, w, b = _param(rng, 2, 5, 3), _param(rng, 3, 4), _param(rng, 4)
    bn = _bn(4, rng, mode)
    probe = rng.normal(size=(2, 5, 4))
    f = lambda: ops.sum(ops.mul(pointwise_conv(x, w, b, bn, "elu"), probe))
    return grad_check(f, [x, w, b, bn.gamma, bn.beta], STEP)


def check_linear(rng):
    x, w, b = _param(rng, 3, 4), _param(rng, 4, 2), _param(rng, 2)
    probe = rng.normal(size=(3, 2))
    f = lambda: ops.sum(ops.mul(linear(x, w, b, None, "elu"), probe))
    return grad_check(f, [x, w, b], STEP)


def check_max_pool(rng):
    x = _param(rng, 2, 6, 3)
    probe = rng.normal(size=(2, 3))
    f = lambda: ops.sum(ops.mul(max_pool_points(x)[0], probe))
    return grad_check(f, [x], STEP)


def check_tensor_ops(rng):
    a, b = _param(rng, 3, 4), _param(rng, 4)
    idx = rng.integers(0, 3, size=(2, 5))
    feats = _param(rng, 2, 3, 4)

    def f():
        y = ops.sub(ops.add(ops.mul(a, b), a), ops.broadcast_to(ops.reshape(b, (1, 4)), (3, 4)))
        y = ops.concat([y, ops.index(y, slice(0, 1))], axis=0)
        y = ops.matmul(ops.elu(y), ops.transpose(a))
        g = ops.gather(feats, idx)
        picked = ops.index(ops.log_softmax(y), (np.array([0, 1, 1, 3]), np.array([2, 0, 0, 1])))
        return ops.add(ops.add(ops.sum(picked), ops.mean(ops.l2_normalize(g))), _weighted(y, np.random.default_rng(1)))

    return grad_check(f, [a, b, feats], STEP)


def check_interpolation(rng):
    src, dst = rng.normal(size=(1, 5, 3)), rng.normal(size=(1, 9, 3))
    feats = _param(rng, 1, 5, 4)
    probe = rng.normal(size=(1, 9, 4))
    f = lambda: ops.sum(ops.mul(_interpolate(src, feats, dst), probe))
    return grad_check(f, [feats], STEP)


def check_cosine(rng):
    zi, zj = _param(rng, 5), _param(rng, 5)
    return grad_check(lambda: cosine_similarity(zi, zj), [zi, zj], STEP)


def check_ntxent(rng):
    z = _param(rng, 6, 4)
    return grad_check(lambda: ntxent_loss(z, tau=0.5), [z], STEP)


def check_cross_entropy(rng):
    logits = _param(rng, 4, 3, 5)
    labels = rng.integers(0, 5, size=(4, 3))
    return grad_check(lambda: cross_entropy(logits, labels), [logits], STEP)


def check_pipeline(rng, task="cls", mode="eval", n=16, max_coords=4):
    enc = DualEncoder(task, tiny_config(), seed=int(rng.integers(1 << 30)))
    enc.set_mode(mode)
    a = rng.normal(size=(3, n, 6))
    b = a + rng.normal(scale=0.05, size=a.shape)
    f = lambda: ntxent_loss(enc.embed_pairs(a, b), tau=0.5)
    return grad_check(f, list(enc.parameters().values()), STEP, max_coords=max_coords, rng=rng)


def check_classifier_head(rng):
    head = ClassifierHead(12, 2, widths=(8, 6, 4), seed=3).eval()
    x = rng.normal(size=(5, 12))
    y = rng.integers(0, 2, size=5)
    return grad_check(lambda: cross_entropy(classify(x, head), y), list(head.parameters().values()), STEP,
                      max_coords=6, rng=rng)


def check_segmenter_head(rng):
    head = SegmenterHead(12, 3, widths=(8, 6, 4), seed=4).eval()
    x = rng.normal(size=(2, 7, 12))
    y = rng.integers(0, 3, size=(2, 7))
    return grad_check(lambda: cross_entropy(segment(x, head), y), list(head.parameters().values()), STEP,
                      max_coords=6, rng=rng)


CHECKS: dict[str, Callable] = {
    "pointwise_conv (bn eval)": lambda r: check_pointwise_conv(r, "eval"),
    "pointwise_conv (bn train)": lambda r: check_pointwise_conv(r, "train"),
    "linear": check_linear,
    "max_pool_points": check_max_pool,
    "tensor ops": check_tensor_ops,
    "interpolate_features": check_interpolation,
    "cosine_similarity": check_cosine,
    "ntxent_loss": check_ntxent,
    "cross_entropy": check_cross_entropy,
    "classifier head": check_classifier_head,
    "segmenter head": check_segmenter_head,
    "cls pipeline (eval)": lambda r: check_pipeline(r, "cls", "eval"),
    "cls pipeline (train)": lambda r: check_pipeline(r, "cls", "train"),
    "seg pipeline (eval)": lambda r: check_pipeline(r, "seg", "eval"),
    "seg pipeline (train)": lambda r: check_pipeline(r, "seg", "train"),
}


def run_suite(seed: int = 0, names=None) -> dict[str, float]:
    results = {}
    for name, check in CHECKS.items():
        if names is not None and name not in names:
            continue
        results[name] = check(np.random.default_rng([seed, len(results)]))
    return results
