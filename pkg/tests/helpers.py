"""Finite-difference utilities shared by the gradient tests."""
import numpy as np

H = 1e-5


def numeric_grad(f, param: np.ndarray, h: float = H) -> np.ndarray:
    """Central differences of scalar ``f()`` with respect to ``param`` (perturbed in place)."""
    g = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = param[i]
        param[i] = old + h
        up = f()
        param[i] = old - h
        down = f()
        param[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_error(analytic, numeric) -> float:
    """Norm-wise relative error of one gradient tensor."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def max_rel_error(f, params, grads) -> float:
    return max(rel_error(g, numeric_grad(f, p)) for p, g in zip(params, grads))
