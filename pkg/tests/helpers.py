"""Shared test utilities."""

import numpy as np


def fd_gradient_check(net, x, y, n_probes, seed, mask_seed=None, step=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``mask_seed`` freezes dropout masks so the loss is a deterministic
    function of the weights.
    """
    def rng():
        return None if mask_seed is None else np.random.default_rng(mask_seed)

    base = net.get_weights_vector()
    _, grads = net.loss_and_grads(x, y, rng=rng())
    probe_rng = np.random.default_rng(seed)
    idx = probe_rng.choice(base.size, size=min(n_probes, base.size),
                           replace=False)
    worst = 0.0
    for i in idx:
        vec = base.copy()
        vec[i] = base[i] + step
        net.set_weights_vector(vec)
        up, _ = net.loss_and_grads(x, y, rng=rng())
        vec[i] = base[i] - step
        net.set_weights_vector(vec)
        down, _ = net.loss_and_grads(x, y, rng=rng())
        fd = (up - down) / (2.0 * step)
        # denominator floored at the central-difference noise scale
        # (machine eps * |loss| / step ~ 1e-10); below it the oracle itself
        # is the precision limit, not the analytic gradient
        rel = abs(fd - grads[i]) / max(abs(fd), abs(grads[i]), 1e-4)
        worst = max(worst, rel)
    net.set_weights_vector(base)
    return worst


def synthetic_skewed_regression(seed=100, n=506, p=13):
    """Benchmark-shaped synthetic data: smooth mean, sharply skewed noise."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, p))
    mean = (1.0 * x[:, 0] + 0.6 * np.sin(3.0 * x[:, 1])
            + 0.4 * x[:, 2] ** 2)
    noise = np.exp(rng.normal(0.0, 0.9, size=n))
    return x, mean + noise
