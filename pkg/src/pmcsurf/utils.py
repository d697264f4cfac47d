"""Small numerical helpers shared across modules."""

import numpy as np


def hermite_interp(xg, y, yp, x):
    """Cubic Hermite interpolation on a uniform grid xg.

    ``y`` and ``yp`` hold node values and slopes, shaped (n,) or (n, d);
    ``x`` may be any array.  Evaluation outside the grid continues the end
    segments (callers keep margins small).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    yp = np.asarray(yp)
    dx = xg[1] - xg[0]
    i = np.clip(((x - xg[0]) / dx).astype(int), 0, len(xg) - 2)
    t = (x - xg[i]) / dx
    if y.ndim == 2:
        t = t[..., None]
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y[i] + h10 * dx * yp[i] + h01 * y[i + 1] + h11 * dx * yp[i + 1]


class CumulativeIntegral:
    """Dense antiderivative F(x) = int_{x0}^x g(t) dt on [lo, hi].

    Node values come from per-interval Simpson quadrature (global error
    O(step^4)); between nodes the pair (F, g) is completed by cubic Hermite
    interpolation, so F' is exactly g at evaluation points.
    """

    def __init__(self, g_fn, lo, hi, x0=None, n=4001):
        self.g_fn = g_fn
        self.x = np.linspace(lo, hi, n)
        step = self.x[1] - self.x[0]
        g_nodes = np.asarray(g_fn(self.x), dtype=float)
        g_mid = np.asarray(g_fn(self.x[:-1] + 0.5 * step), dtype=float)
        increments = (step / 6.0) * (g_nodes[:-1] + 4.0 * g_mid + g_nodes[1:])
        F = np.concatenate([[0.0], np.cumsum(increments)])
        if x0 is None:
            x0 = lo
        F -= hermite_interp(self.x, F, g_nodes, np.asarray([x0]))[0]
        self.F = F
        self.g_nodes = g_nodes

    def __call__(self, x):
        return hermite_interp(self.x, self.F, self.g_nodes, x)

    def derivative(self, x):
        return np.asarray(self.g_fn(x), dtype=float)
