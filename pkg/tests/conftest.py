import numpy as np
import pytest

from magnet import diffcore as dc


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-3) -> float:
    """Max elementwise relative error with a floor to keep tiny gradients
    from inflating finite-difference noise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def analytic_grads(build_loss, params: dict) -> dict:
    """Run one forward/backward and collect leaf gradients by name."""
    for t in params.values():
        t.zero_grad()
    with dc.Graph() as g:
        loss = build_loss()
    dc.backward(g, loss)
    return {
        k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for k, t in params.items()
    }


def check_grads(build_loss, params: dict, tol: float = 1e-4, h: float = 1e-5, floor: float = 1e-3):
    """Compare backward() against central finite differences per parameter.

    build_loss must be a pure function of the current parameter values that
    returns a scalar Tensor; it is re-invoked for every probe.
    """
    analytic = analytic_grads(build_loss, params)
    errors = {}
    for name, t in params.items():
        def f(arr, _t=t):
            saved = _t.data
            _t.data = np.ascontiguousarray(arr, dtype=np.float64)
            try:
                return build_loss().item()
            finally:
                _t.data = saved

        fd = dc.finite_difference_grad(f, t.data.copy(), h=h)
        err = rel_error(analytic[name], fd, floor=floor)
        errors[name] = err
        assert err < tol, f"gradient mismatch for {name}: rel err {err:.3e} >= {tol}"
    return errors


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
