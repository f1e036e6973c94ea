"""Weight initializers (seeded generators only)."""
import numpy as np


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def orthogonal(rng, rows, cols):
    """(rows, cols) matrix with orthonormal columns (or rows, if rows < cols)."""
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))  # fix the sign ambiguity of QR
    return q if rows >= cols else q.T
