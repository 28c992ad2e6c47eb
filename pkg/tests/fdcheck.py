"""Central finite differences, kept independent of the reverse-mode code."""

import numpy as np

H = 1e-6


def rel_err(analytic, numeric, floor=1e-4):
    """Elementwise |a - f| / max(|a|, |f|, floor).

    The floor stops gradients that are zero up to rounding from producing
    meaningless ratios; it sits far above the FD noise (~1e-10).
    """
    a = np.asarray(analytic, dtype=float)
    f = np.asarray(numeric, dtype=float)
    return np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)


def central_diff(fn, arrays, h=H, steps=None):
    """Gradient of scalar ``fn()`` w.r.t. every entry of ``arrays`` (mutated
    in place and restored).

    ``steps`` optionally gives one step array (or scalar) per entry of
    ``arrays``, for parameters whose natural scale is far from 1.
    """
    grads = []
    for k, arr in enumerate(arrays):
        g = np.zeros(arr.shape)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        step = np.broadcast_to(h if steps is None else steps[k], arr.shape).reshape(-1)
        for i in range(flat.size):
            orig, d = flat[i], step[i]
            flat[i] = orig + d
            up = fn()
            flat[i] = orig - d
            down = fn()
            flat[i] = orig
            gf[i] = (up - down) / (2 * d)
        grads.append(g)
    return grads


def derivative_1d(fn, x, h=H):
    return (fn(x + h) - fn(x - h)) / (2 * h)
