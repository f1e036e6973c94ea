"""Central finite-difference gradient checking."""
import numpy as np


def relative_error(analytic, numeric):
    """Max over coordinates of |a - n| / max(1e-8, |a| + |n|)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))))


def numeric_gradient(f, array, eps=1e-5, coords=None):
    """Central differences of scalar ``f()`` with respect to ``array``, perturbed in place.

    ``coords`` optionally restricts the check to a subset of flat indices;
    other entries of the result are NaN.
    """
    flat = array.reshape(-1)
    grad = np.full(flat.shape, np.nan)
    for idx in range(flat.size) if coords is None else coords:
        orig = flat[idx]
        flat[idx] = orig + eps
        fp = f()
        flat[idx] = orig - eps
        fm = f()
        flat[idx] = orig
        grad[idx] = (fp - fm) / (2 * eps)
    return grad.reshape(array.shape)


def grad_check(f, arrays, analytic, eps=1e-5, coords=None):
    """Compare analytic gradients with central differences.

    ``f`` takes no arguments and reads the arrays in ``arrays`` (a dict name ->
    ndarray) which are perturbed in place; ``analytic`` maps the same names to
    gradients. ``coords`` maps names to flat index subsets. Returns a dict of
    per-array max relative errors.
    """
    errors = {}
    for name, arr in arrays.items():
        sub = None if coords is None else coords.get(name)
        num = numeric_gradient(f, arr, eps, sub)
        ana = np.asarray(analytic[name]).reshape(-1)
        num = num.reshape(-1)
        keep = ~np.isnan(num)
        errors[name] = relative_error(ana[keep], num[keep])
    return errors
