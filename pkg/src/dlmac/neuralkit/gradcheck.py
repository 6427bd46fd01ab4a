import numpy as np


def numerical_grads(model, x, targets, weights=None, step=1e-6):
    out = []
    for p in model.params:
        g = {}
        for name, arr in p.items():
            num = np.zeros_like(arr)
            flat, nflat = arr.reshape(-1), num.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                up = model.loss(x, targets, weights)
                flat[j] = orig - step
                down = model.loss(x, targets, weights)
                flat[j] = orig
                nflat[j] = (up - down) / (2 * step)
            g[name] = num
        out.append(g)
    return out


def grad_check(model, features, label, step=1e-6, floor=1e-4):
    """Largest per-parameter relative error between backprop and central differences.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``; the floor keeps
    near-zero gradients from turning round-off of the finite difference
    (about 1e-10 at ``step=1e-6``) into spurious relative error.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.shape == model.input_shape:
        x = x[None]
    targets = np.atleast_1d(np.asarray(label, dtype=np.int64))
    if targets.size == 1 and x.shape[0] > 1:
        targets = np.repeat(targets, x.shape[0])
    if model.n_params >= 10_000:
        raise ValueError("grad_check is meant for models under 10^4 parameters")
    _, analytic = model.loss_and_grads(x, targets)
    numeric = numerical_grads(model, x, targets, step=step)
    worst = 0.0
    for ga, gn in zip(analytic, numeric):
        for k in ga:
            a, n = ga[k], gn[k]
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
