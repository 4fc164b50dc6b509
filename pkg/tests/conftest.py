import numpy as np
import pytest


def numeric_grad(f, x, eps=1e-5, index=None):
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place).

    ``index`` restricts the check to a list of flat positions.
    """
    flat = x.reshape(-1)
    positions = range(flat.size) if index is None else index
    out = np.zeros(flat.size)
    for i in positions:
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        out[i] = (hi - lo) / (2 * eps)
    return out.reshape(x.shape)


def rel_error(analytic, numeric, floor=1e-6):
    a, n = np.asarray(analytic), np.asarray(numeric)
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
