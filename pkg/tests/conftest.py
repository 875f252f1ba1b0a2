import numpy as np
import pytest

from manger.numcore import ParamStore, backward, no_grad


def finite_diff_grads(loss_fn, stores, eps=1e-5, sample_per_param=None, seed=0):
    """Max relative error between backward() gradients and central differences.

    loss_fn() must rebuild the forward pass from the stores' current values.
    """
    loss = loss_fn()
    backward(loss)
    grads = [{name: store.grad(name).copy() for name in store.names()} for store in stores]
    for store in stores:
        store.zero_grads()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for store, store_grads in zip(stores, grads):
        for name in store.names():
            flat = store[name].data.reshape(-1)
            gflat = store_grads[name].reshape(-1)
            if sample_per_param is None:
                indices = range(flat.size)
            else:
                k = min(sample_per_param, flat.size)
                indices = rng.choice(flat.size, size=k, replace=False)
            for i in indices:
                old = flat[i]
                flat[i] = old + eps
                with no_grad():
                    up = loss_fn().item()
                flat[i] = old - eps
                with no_grad():
                    down = loss_fn().item()
                flat[i] = old
                fd = (up - down) / (2.0 * eps)
                rel = abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1e-6)
                worst = max(worst, rel)
    return worst


@pytest.fixture
def tmp_outdir(tmp_path):
    return tmp_path / "run"
