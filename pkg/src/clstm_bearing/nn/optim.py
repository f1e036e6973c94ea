import numpy as np

from ..errors import ShapeMismatchError


def sgd_step(params, grads, lr, momentum=0.0, velocity=None):
    """In-place SGD update of every array in ``params``.

    With momentum: ``v <- momentum * v + g; p <- p - lr * v``. ``velocity``
    is a dict holding that state; it is filled with zeros on first use.
    """
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatchError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if momentum:
            if velocity is None:
                raise ValueError("momentum needs a velocity dict")
            v = velocity.get(name)
            if v is None:
                v = velocity[name] = np.zeros_like(p)
            v *= momentum
            v += g
            p -= lr * v
        else:
            p -= lr * g
    return params


class SGD:
    def __init__(self, lr=0.01, momentum=0.0):
        self.lr = lr
        self.momentum = momentum
        self.velocity = {}

    def step(self, params, grads):
        sgd_step(params, grads, self.lr, self.momentum, self.velocity)
