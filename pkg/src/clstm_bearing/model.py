"""The 17-layer convolutional LSTM.

Input -> Fold -> Conv1 -> BatchNorm1 -> ReLU1 -> MaxPool1 -> Conv2 ->
BatchNorm2 -> ReLU2 -> MaxPool2 -> Unfold -> Flatten -> Lstm -> Dropout ->
FC -> Softmax -> Output.

A sample is ``T`` frames, each a 2 x N time/frequency matrix, so a batch has
shape (B, T, 2, N). Folding runs the convolutional stack on every frame
independently; unfolding restores the sequence so the LSTM sees T flattened
vectors and classifies from its last hidden state.
"""
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BadConfigError, ShapeMismatchError
from .nn import layers as L
from .nn.init import glorot_uniform, orthogonal

LAYER_NAMES = (
    "Input", "Fold", "Conv1", "BatchNorm1", "ReLU1", "MaxPool1", "Conv2",
    "BatchNorm2", "ReLU2", "MaxPool2", "Unfold", "Flatten", "Lstm", "Dropout",
    "FC", "Softmax", "Output",
)


@dataclass(frozen=True)
class ModelConfig:
    frame_len: int = 4800
    conv1_channels: int = 16
    conv2_channels: int = 24
    kernel_width: int = 8
    lstm_hidden: int = 100
    classes: int = 5
    sequence_len: int = 1
    dropout_rate: float = 0.5
    freeze_bn_offset: bool = False

    def validate(self):
        counts = (self.frame_len, self.conv1_channels, self.conv2_channels,
                  self.kernel_width, self.lstm_hidden, self.classes, self.sequence_len)
        if min(counts) < 1:
            raise BadConfigError(f"all sizes must be positive: {self}")
        if self.frame_len % 4:
            raise BadConfigError(f"frame_len must be divisible by 4, got {self.frame_len}")
        if self.classes < 2:
            raise BadConfigError("need at least two classes")
        if not 0 <= self.dropout_rate < 1:
            raise BadConfigError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")
        return self

    @property
    def lstm_input_dim(self):
        return 2 * (self.frame_len // 4) * self.conv2_channels

    def to_dict(self):
        return asdict(self)


def param_shapes(cfg):
    """Named learnable tensor shapes in layer order."""
    k, c1, c2 = cfg.kernel_width, cfg.conv1_channels, cfg.conv2_channels
    h, d = cfg.lstm_hidden, cfg.lstm_input_dim
    return OrderedDict([
        ("conv1.weights", (1, k, 1, c1)),
        ("conv1.bias", (1, 1, c1)),
        ("bn1.offset", (1, 1, c1)),
        ("bn1.scale", (1, 1, c1)),
        ("conv2.weights", (1, k, c1, c2)),
        ("conv2.bias", (1, 1, c2)),
        ("bn2.offset", (1, 1, c2)),
        ("bn2.scale", (1, 1, c2)),
        ("lstm.input_weights", (4 * h, d)),
        ("lstm.recurrent_weights", (4 * h, h)),
        ("lstm.bias", (4 * h, 1)),
        ("fc.weights", (cfg.classes, h)),
        ("fc.bias", (cfg.classes, 1)),
    ])


def state_shapes(cfg):
    c1, c2 = cfg.conv1_channels, cfg.conv2_channels
    return OrderedDict([
        ("bn1.running_mean", (1, 1, c1)),
        ("bn1.running_var", (1, 1, c1)),
        ("bn2.running_mean", (1, 1, c2)),
        ("bn2.running_var", (1, 1, c2)),
    ])


def activation_shapes(cfg):
    """Per-frame (or per-sample after the LSTM) output shape of each layer."""
    n, c1, c2 = cfg.frame_len, cfg.conv1_channels, cfg.conv2_channels
    return [
        (2, n, 1), (2, n, 1),
        (2, n, c1), (2, n, c1), (2, n, c1), (2, n // 2, c1),
        (2, n // 2, c2), (2, n // 2, c2), (2, n // 2, c2), (2, n // 4, c2),
        (2, n // 4, c2), (cfg.lstm_input_dim,),
        (cfg.lstm_hidden,), (cfg.lstm_hidden,),
        (cfg.classes,), (cfg.classes,), (cfg.classes,),
    ]


# -- layers ------------------------------------------------------------------
#
# forward(x, model, ctx) -> (y, cache); backward(dy, cache, model, grads) -> dx.
# ctx carries the mode, the dropout rng, the targets and values shared between
# layers (the fold shape and the loss).

class Layer:
    kind = "layer"
    details = ""

    def __init__(self, name):
        self.name = name

    def record_shape(self, y):
        return y.shape[1:]

    def learnables(self, model):
        return []

    def forward(self, x, model, ctx):
        return x, None

    def backward(self, dy, cache, model, grads):
        return dy


class InputLayer(Layer):
    kind = "input"
    details = "Sequence input"

    def forward(self, x, model, ctx):
        cfg = model.config
        if x.ndim != 4 or x.shape[1:] != (cfg.sequence_len, 2, cfg.frame_len):
            raise ShapeMismatchError(
                f"expected batch of shape (B, {cfg.sequence_len}, 2, {cfg.frame_len}), got {x.shape}")
        return x, None

    def record_shape(self, y):
        return y.shape[2:] + (1,)


class Fold(Layer):
    kind = "fold"
    details = "Sequence folding"

    def forward(self, x, model, ctx):
        b, t = x.shape[:2]
        ctx["fold"] = (b, t)
        return x.reshape(b * t, x.shape[2], x.shape[3], 1), (b, t)

    def backward(self, dy, cache, model, grads):
        b, t = cache
        return dy.reshape(b, t, dy.shape[1], dy.shape[2])


class Conv(Layer):
    kind = "conv"

    def __init__(self, name, prefix):
        super().__init__(name)
        self.prefix = prefix

    def learnables(self, model):
        return [f"{self.prefix}.weights", f"{self.prefix}.bias"]

    def forward(self, x, model, ctx):
        p = model.params
        return L.conv1xk_forward(x, p[f"{self.prefix}.weights"], p[f"{self.prefix}.bias"])

    def backward(self, dy, cache, model, grads):
        dx, dw, db = L.conv1xk_backward(dy, cache)
        grads[f"{self.prefix}.weights"] = dw
        grads[f"{self.prefix}.bias"] = db
        return dx


class BatchNorm(Layer):
    kind = "batchnorm"
    details = "Batch normalization"

    def __init__(self, name, prefix):
        super().__init__(name)
        self.prefix = prefix

    def learnables(self, model):
        return [f"{self.prefix}.offset", f"{self.prefix}.scale"]

    def forward(self, x, model, ctx):
        p, s = model.params, model.state
        return L.batchnorm_forward(
            x, p[f"{self.prefix}.scale"], p[f"{self.prefix}.offset"],
            s[f"{self.prefix}.running_mean"], s[f"{self.prefix}.running_var"],
            ctx["mode"], eps=model.bn_epsilon, momentum=model.bn_momentum)

    def backward(self, dy, cache, model, grads):
        dx, dgamma, dbeta = L.batchnorm_backward(dy, cache)
        grads[f"{self.prefix}.scale"] = dgamma
        grads[f"{self.prefix}.offset"] = np.zeros_like(dbeta) if model.config.freeze_bn_offset else dbeta
        return dx


class ReLU(Layer):
    kind = "relu"
    details = "ReLU"

    def forward(self, x, model, ctx):
        return L.relu_forward(x)

    def backward(self, dy, cache, model, grads):
        return L.relu_backward(dy, cache)


class MaxPool(Layer):
    kind = "maxpool"
    details = "1x2 max pooling with stride [1 2]"

    def forward(self, x, model, ctx):
        return L.maxpool1x2_forward(x)

    def backward(self, dy, cache, model, grads):
        return L.maxpool1x2_backward(dy, cache)


class Unfold(Layer):
    kind = "unfold"
    details = "Sequence unfolding"

    def forward(self, x, model, ctx):
        b, t = ctx["fold"]
        return x.reshape((b, t) + x.shape[1:]), x.shape

    def backward(self, dy, cache, model, grads):
        return dy.reshape(cache)

    def record_shape(self, y):
        return y.shape[2:]


class Flatten(Layer):
    kind = "flatten"
    details = "Flatten"

    def forward(self, x, model, ctx):
        return x.reshape(x.shape[0], x.shape[1], -1), x.shape

    def backward(self, dy, cache, model, grads):
        return dy.reshape(cache)

    def record_shape(self, y):
        return y.shape[2:]


class Lstm(Layer):
    kind = "lstm"

    def learnables(self, model):
        return ["lstm.input_weights", "lstm.recurrent_weights", "lstm.bias"]

    def forward(self, x, model, ctx):
        p = model.params
        return L.lstm_forward(x, p["lstm.input_weights"], p["lstm.recurrent_weights"], p["lstm.bias"])

    def backward(self, dy, cache, model, grads):
        dx, dw_in, dw_rec, db = L.lstm_backward(dy, cache)
        grads["lstm.input_weights"] = dw_in
        grads["lstm.recurrent_weights"] = dw_rec
        grads["lstm.bias"] = db
        return dx


class Dropout(Layer):
    kind = "dropout"

    def forward(self, x, model, ctx):
        return L.dropout_forward(x, model.config.dropout_rate, ctx["mode"], ctx.get("rng"))

    def backward(self, dy, cache, model, grads):
        return L.dropout_backward(dy, cache, model.config.dropout_rate)


class FullyConnected(Layer):
    kind = "fc"

    def learnables(self, model):
        return ["fc.weights", "fc.bias"]

    def forward(self, x, model, ctx):
        return L.fc_forward(x, model.params["fc.weights"], model.params["fc.bias"])

    def backward(self, dy, cache, model, grads):
        dx, dw, db = L.fc_backward(dy, cache)
        grads["fc.weights"] = dw
        grads["fc.bias"] = db
        return dx


class Softmax(Layer):
    kind = "softmax"
    details = "softmax"

    def forward(self, x, model, ctx):
        ctx["logits"] = x
        return L.softmax(x), None

    def backward(self, dy, cache, model, grads):
        # the Output layer already returns d(loss)/d(logits) (fused softmax + cross-entropy)
        return dy


class Output(Layer):
    kind = "output"
    details = "crossentropyex"

    def forward(self, x, model, ctx):
        targets = ctx.get("targets")
        if targets is None:
            return x, None
        loss, dlogits, _ = L.softmax_crossentropy(ctx["logits"], targets)
        ctx["loss"] = loss
        return x, dlogits

    def backward(self, dy, cache, model, grads):
        return cache


def _build_layers(cfg):
    c1, c2, k = cfg.conv1_channels, cfg.conv2_channels, cfg.kernel_width
    conv1, conv2 = Conv("Conv1", "conv1"), Conv("Conv2", "conv2")
    conv1.details = f"{c1} 1x{k} convolutions with stride [1 1] and padding 'same'"
    conv2.details = f"{c2} 1x{k} convolutions with stride [1 1] and padding 'same'"
    lstm = Lstm("Lstm")
    lstm.details = f"LSTM with {cfg.lstm_hidden} hidden units"
    drop = Dropout("Dropout")
    drop.details = f"{cfg.dropout_rate:.0%} dropout"
    fc = FullyConnected("FC")
    fc.details = f"{cfg.classes} fully connected layer"
    return [
        InputLayer("Input"), Fold("Fold"),
        conv1, BatchNorm("BatchNorm1", "bn1"), ReLU("ReLU1"), MaxPool("MaxPool1"),
        conv2, BatchNorm("BatchNorm2", "bn2"), ReLU("ReLU2"), MaxPool("MaxPool2"),
        Unfold("Unfold"), Flatten("Flatten"), lstm, drop, fc, Softmax("Softmax"), Output("Output"),
    ]


class ForwardResult:
    __slots__ = ("probs", "loss", "caches", "ctx", "shapes")

    def __init__(self, probs, loss, caches, ctx, shapes):
        self.probs = probs
        self.loss = loss
        self.caches = caches
        self.ctx = ctx
        self.shapes = shapes


class Model:
    bn_epsilon = 1e-5
    bn_momentum = 0.1

    def __init__(self, config, params, state):
        self.config = config.validate()
        self.layers = _build_layers(config)
        self.params = params
        self.state = state

    @property
    def layer_names(self):
        return tuple(layer.name for layer in self.layers)

    def forward(self, x, mode=L.INFER, rng=None, targets=None, trace=False):
        """Run all 17 layers. Caches for :meth:`backward` are kept only in train mode."""
        x = np.asarray(x, dtype=np.float64)
        ctx = {"mode": mode, "rng": rng, "targets": targets}
        keep = mode == L.TRAIN
        caches = [] if keep else None
        shapes = [] if trace else None
        for layer in self.layers:
            x, cache = layer.forward(x, self, ctx)
            if keep:
                caches.append(cache)
            if trace:
                shapes.append(tuple(layer.record_shape(x)))
        return ForwardResult(x, ctx.get("loss"), caches, ctx, shapes)

    def backward(self, result):
        """Gradients of the mean cross-entropy for a train-mode forward with targets."""
        if result.caches is None or result.loss is None:
            raise ValueError("backward needs a train-mode forward pass with targets")
        grads = {}
        dy = None
        for layer, cache in zip(reversed(self.layers), reversed(result.caches)):
            dy = layer.backward(dy, cache, self, grads)
        return OrderedDict((name, grads[name]) for name in self.params)

    def loss_and_grads(self, x, targets, rng=None):
        result = self.forward(x, L.TRAIN, rng=rng, targets=np.asarray(targets))
        return result.loss, self.backward(result), result.probs

    def predict_proba(self, x, batch_size=256):
        """Infer-mode class probabilities, evaluated in chunks."""
        x = np.asarray(x, dtype=np.float64)
        out = np.empty((x.shape[0], self.config.classes))
        for start in range(0, x.shape[0], batch_size):
            out[start:start + batch_size] = self.forward(x[start:start + batch_size]).probs
        return out

    def copy(self):
        return Model(self.config,
                     OrderedDict((k, v.copy()) for k, v in self.params.items()),
                     OrderedDict((k, v.copy()) for k, v in self.state.items()))


def build_model(cfg=None, init_seed=0):
    """Fresh model: Glorot-uniform conv, LSTM-input and FC weights, orthogonal
    recurrent weights, zero biases except a forget-gate bias of 1."""
    cfg = (cfg or ModelConfig()).validate()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(init_seed), 0x5eed])))
    shapes = param_shapes(cfg)
    k, c1, c2, h = cfg.kernel_width, cfg.conv1_channels, cfg.conv2_channels, cfg.lstm_hidden
    params = OrderedDict()
    params["conv1.weights"] = glorot_uniform(rng, shapes["conv1.weights"], k * 1, k * c1)
    params["conv1.bias"] = np.zeros(shapes["conv1.bias"])
    params["bn1.offset"] = np.zeros(shapes["bn1.offset"])
    params["bn1.scale"] = np.ones(shapes["bn1.scale"])
    params["conv2.weights"] = glorot_uniform(rng, shapes["conv2.weights"], k * c1, k * c2)
    params["conv2.bias"] = np.zeros(shapes["conv2.bias"])
    params["bn2.offset"] = np.zeros(shapes["bn2.offset"])
    params["bn2.scale"] = np.ones(shapes["bn2.scale"])
    params["lstm.input_weights"] = glorot_uniform(rng, shapes["lstm.input_weights"], cfg.lstm_input_dim, 4 * h)
    params["lstm.recurrent_weights"] = orthogonal(rng, 4 * h, h)
    bias = np.zeros(shapes["lstm.bias"])
    bias[h:2 * h] = 1.0
    params["lstm.bias"] = bias
    params["fc.weights"] = glorot_uniform(rng, shapes["fc.weights"], h, cfg.classes)
    params["fc.bias"] = np.zeros(shapes["fc.bias"])
    state = OrderedDict()
    for name, shape in state_shapes(cfg).items():
        state[name] = np.ones(shape) if name.endswith("running_var") else np.zeros(shape)
    return Model(cfg, params, state)


def param_summary(model):
    """(name, shape, scalar count) for each learnable tensor."""
    return [(name, p.shape, int(p.size)) for name, p in model.params.items()]


def _dims(shape):
    return "x".join(str(d) for d in shape)


_LEARNABLE_LABELS = {
    "weights": "Weights", "bias": "Bias", "offset": "Offset", "scale": "Scale",
    "input_weights": "InputWeights", "recurrent_weights": "RecurrentWeights",
}


def format_summary(model):
    """Aligned text table with Layers / Details / Activations / Learnables columns."""
    rows = [("Layers", "Details", "Activations", "Learnables")]
    for layer, shape in zip(model.layers, activation_shapes(model.config)):
        learn = " ".join(
            f"{_LEARNABLE_LABELS[n.split('.', 1)[1]]} {_dims(model.params[n].shape)}"
            for n in layer.learnables(model)) or "-"
        rows.append((layer.name, layer.details, _dims(shape), learn))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    total = sum(count for _, _, count in param_summary(model))
    lines.append(f"Total learnables: {total:,}")
    return "\n".join(lines)
