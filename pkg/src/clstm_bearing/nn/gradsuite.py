"""Finite-difference checks of every layer's backward pass.

Each check builds a scalar objective ``sum(r * layer(x))`` with a fixed
random projection ``r`` (so that no output coordinate can cancel), evaluates
analytic gradients once, and compares them coordinate by coordinate with
central differences. Inputs are drawn away from ReLU and max-pool kinks.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import layers as L
from .gradcheck import grad_check, numeric_gradient

SMOOTH_TOL = 1e-6
KINKED_TOL = 1e-4
NULL_GRAD_ATOL = 1e-8


@dataclass
class CheckResult:
    name: str
    error: float
    threshold: float

    @property
    def passed(self):
        return bool(self.error <= self.threshold)


def _rng(seed):
    return np.random.default_rng(seed)


def check_fc(eps=1e-5, seed=0):
    rng = _rng(seed)
    x, w, b = rng.standard_normal((3, 6)), rng.standard_normal((4, 6)), rng.standard_normal((4, 1))
    r = rng.standard_normal((3, 4))
    y, cache = L.fc_forward(x, w, b)
    dx, dw, db = L.fc_backward(r, cache)
    errs = grad_check(lambda: float(np.sum(r * L.fc_forward(x, w, b)[0])),
                      {"x": x, "w": w, "b": b}, {"x": dx, "w": dw, "b": db}, eps)
    return max(errs.values())


def check_conv(eps=1e-5, seed=0):
    rng = _rng(seed)
    x = rng.standard_normal((2, 2, 12, 3))
    w = rng.standard_normal((1, 8, 3, 4)) * 0.5
    b = rng.standard_normal((1, 1, 4))
    r = rng.standard_normal((2, 2, 12, 4))
    _, cache = L.conv1xk_forward(x, w, b)
    dx, dw, db = L.conv1xk_backward(r, cache)
    errs = grad_check(lambda: float(np.sum(r * L.conv1xk_forward(x, w, b)[0])),
                      {"x": x, "w": w, "b": b}, {"x": dx, "w": dw, "b": db}, eps)
    return max(errs.values())


def check_batchnorm(eps=1e-5, seed=0):
    rng = _rng(seed)
    x = rng.standard_normal((4, 2, 5, 3)) * 2 + 1
    gamma = rng.uniform(0.5, 1.5, (1, 1, 3))
    beta = rng.standard_normal((1, 1, 3))
    r = rng.standard_normal(x.shape)

    def run():
        rm, rv = np.zeros((1, 1, 3)), np.ones((1, 1, 3))
        return L.batchnorm_forward(x, gamma, beta, rm, rv, L.TRAIN)

    _, cache = run()
    dx, dg, db = L.batchnorm_backward(r, cache)
    errs = grad_check(lambda: float(np.sum(r * run()[0])),
                      {"x": x, "gamma": gamma, "beta": beta}, {"x": dx, "gamma": dg, "beta": db}, eps)
    return max(errs.values())


def check_relu(eps=1e-5, seed=0):
    rng = _rng(seed)
    x = rng.uniform(0.1, 1.0, (3, 7)) * rng.choice([-1.0, 1.0], (3, 7))
    r = rng.standard_normal(x.shape)
    _, mask = L.relu_forward(x)
    dx = L.relu_backward(r, mask)
    return grad_check(lambda: float(np.sum(r * L.relu_forward(x)[0])), {"x": x}, {"x": dx}, eps)["x"]


def check_maxpool(eps=1e-5, seed=0):
    rng = _rng(seed)
    base = rng.standard_normal((2, 2, 4, 3))
    gap = rng.uniform(0.05, 0.5, base.shape) * rng.choice([-1.0, 1.0], base.shape)
    x = np.stack([base, base + gap], axis=3).reshape(2, 2, 8, 3)
    r = rng.standard_normal((2, 2, 4, 3))
    _, arg = L.maxpool1x2_forward(x)
    dx = L.maxpool1x2_backward(r, arg)
    return grad_check(lambda: float(np.sum(r * L.maxpool1x2_forward(x)[0])), {"x": x}, {"x": dx}, eps)["x"]


def check_lstm(eps=1e-5, seed=0):
    rng = _rng(seed)
    bsz, steps, d, h = 2, 3, 4, 3
    seq = rng.standard_normal((bsz, steps, d))
    w_in = rng.standard_normal((4 * h, d)) * 0.5
    w_rec = rng.standard_normal((4 * h, h)) * 0.5
    b = rng.standard_normal((4 * h, 1)) * 0.5
    r = rng.standard_normal((bsz, h))
    _, cache = L.lstm_forward(seq, w_in, w_rec, b)
    grads = L.lstm_backward(r, cache)
    errs = grad_check(lambda: float(np.sum(r * L.lstm_forward(seq, w_in, w_rec, b)[0])),
                      {"seq": seq, "w_in": w_in, "w_rec": w_rec, "b": b},
                      dict(zip(("seq", "w_in", "w_rec", "b"), grads)), eps)
    return max(errs.values())


def check_dropout(eps=1e-5, seed=0):
    rng = _rng(seed)
    x = rng.standard_normal((4, 10))
    r = rng.standard_normal(x.shape)

    def run():
        return L.dropout_forward(x, 0.5, L.TRAIN, np.random.default_rng(seed + 1))

    _, mask = run()
    dx = L.dropout_backward(r, mask, 0.5)
    return grad_check(lambda: float(np.sum(r * run()[0])), {"x": x}, {"x": dx}, eps)["x"]


def check_softmax_ce(eps=1e-5, seed=0):
    rng = _rng(seed)
    logits = rng.standard_normal((3, 5))
    target = rng.integers(0, 5, 3)
    _, grad, _ = L.softmax_crossentropy(logits, target)
    return grad_check(lambda: L.softmax_crossentropy(logits, target)[0],
                      {"logits": logits}, {"logits": grad}, eps)["logits"]


def check_conv_relu(eps=1e-5, seed=0):
    """Conv followed by ReLU, at a point where no pre-activation is near zero."""
    rng = _rng(seed)
    x = rng.standard_normal((2, 2, 12, 1))
    w = rng.standard_normal((1, 8, 1, 3)) * 0.5
    b = rng.standard_normal((1, 1, 3))
    pre, _ = L.conv1xk_forward(x, w, b)
    # push pre-activations away from the kink by shifting the bias per element
    # is not possible, so resample until the margin holds
    for _ in range(100):
        if np.min(np.abs(pre)) > 1e-3:
            break
        x = rng.standard_normal(x.shape)
        pre, _ = L.conv1xk_forward(x, w, b)
    r = rng.standard_normal(pre.shape)

    def run():
        return L.relu_forward(L.conv1xk_forward(x, w, b)[0])[0]

    pre, cache = L.conv1xk_forward(x, w, b)
    _, mask = L.relu_forward(pre)
    dx, dw, db = L.conv1xk_backward(L.relu_backward(r, mask), cache)
    errs = grad_check(lambda: float(np.sum(r * run())),
                      {"x": x, "w": w, "b": b}, {"x": dx, "w": dw, "b": db}, eps)
    return max(errs.values())


def check_model(eps=1e-5, seed=0, config=None, batch=4, coords_per_tensor=None):
    """Full 17-layer network in train mode; every parameter coordinate by default.

    The default reduced widths keep the coordinate count small enough to
    difference exhaustively; ``coords_per_tensor`` samples a random subset of
    each tensor instead (for full-width configs).
    """
    from ..model import ModelConfig, build_model

    cfg = config or ModelConfig(frame_len=48, conv1_channels=4, conv2_channels=6, lstm_hidden=8)
    model = build_model(cfg, init_seed=seed)
    rng = _rng(seed)
    x = rng.standard_normal((batch, cfg.sequence_len, 2, cfg.frame_len))
    y = np.arange(batch) % cfg.classes

    def loss():
        return model.forward(x, L.TRAIN, rng=np.random.default_rng(seed + 7), targets=y).loss

    result = model.forward(x, L.TRAIN, rng=np.random.default_rng(seed + 7), targets=y)
    grads = model.backward(result)
    coords = None
    if coords_per_tensor is not None:
        pick = _rng(seed + 3)
        coords = {n: pick.choice(p.size, min(p.size, coords_per_tensor), replace=False)
                  for n, p in model.params.items()}
    # a conv bias feeding train-mode batch norm has an identically zero
    # gradient, so only an absolute bound on the differenced value is meaningful
    null = {n for n in model.params if n.startswith("conv") and n.endswith(".bias")}
    errs = grad_check(loss, {n: p for n, p in model.params.items() if n not in null}, grads, eps, coords)
    for n in null:
        num = numeric_gradient(loss, model.params[n], eps, None if coords is None else coords[n])
        resid = float(np.nanmax(np.abs(num - grads[n])))
        errs[n] = 0.0 if resid < NULL_GRAD_ATOL else math.inf
    return max(errs.values())


LAYER_CHECKS = (
    ("conv", check_conv, SMOOTH_TOL),
    ("batchnorm", check_batchnorm, SMOOTH_TOL),
    ("relu", check_relu, SMOOTH_TOL),
    ("maxpool", check_maxpool, SMOOTH_TOL),
    ("lstm", check_lstm, SMOOTH_TOL),
    ("dropout", check_dropout, SMOOTH_TOL),
    ("fc", check_fc, SMOOTH_TOL),
    ("softmax_crossentropy", check_softmax_ce, SMOOTH_TOL),
    ("conv+relu", check_conv_relu, SMOOTH_TOL),
    ("model(frame_len=48)", check_model, KINKED_TOL),
)


def run_all(eps=1e-5, seed=0):
    return [CheckResult(name, fn(eps=eps, seed=seed), tol) for name, fn, tol in LAYER_CHECKS]
