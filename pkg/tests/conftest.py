"""Shared test helpers: the finite-difference gradient oracle."""

import numpy as np
import pytest

from ofdmlink import numgrad as ng


def finite_difference_grad(fn, arrays, wrt, step=1e-6):
    """Central finite differences of a scalar-valued fn w.r.t. arrays[wrt].

    fn receives the list of plain ndarrays and returns a float. Independent
    of the autodiff engine by construction.
    """
    base = [np.array(a, dtype=np.float64) for a in arrays]
    target = base[wrt]
    grad = np.zeros_like(target)
    it = np.nditer(target, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = target[idx]
        target[idx] = orig + step
        hi = fn(base)
        target[idx] = orig - step
        lo = fn(base)
        target[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * step)
    return grad


def max_rel_error(analytic, numeric, floor=1e-3):
    """Max elementwise |a - n| / max(|a|, |n|, floor).

    The floor turns the check into an absolute one for near-zero entries,
    where central differences see only rounding noise.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_grads(build, arrays, tol=1e-5, step=1e-6):
    """Compare analytic gradients of build(*leaves) against finite differences.

    build maps DiffArray leaves to a scalar DiffArray. Returns the worst
    relative error over all inputs.
    """
    leaves = [ng.leaf(a) for a in arrays]
    loss = build(*leaves)
    ng.backward(loss)

    def as_scalar(vals):
        return float(build(*[ng.constant(v) for v in vals]).values)

    worst = 0.0
    for i, lf in enumerate(leaves):
        numeric = finite_difference_grad(as_scalar, arrays, i, step=step)
        analytic = lf.grad if lf.grad is not None else np.zeros_like(numeric)
        worst = max(worst, max_rel_error(analytic, numeric))
    assert worst < tol, f"gradient mismatch: max relative error {worst:.3e} >= {tol}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
