"""Composite trapezoid quadrature with fractional end cells.

Every windowed integral in the package goes through these helpers so that
integrals over adjacent windows add up exactly.
"""
import numpy as np


def cumulative_trapezoid(x, y):
    """Running trapezoid integral of ``y`` on nodes ``x``, starting at 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out


class Antiderivative:
    """Exact antiderivative of the piecewise-linear interpolant of ``(x, y)``.

    The interpolant is taken to vanish outside ``[x[0], x[-1]]``, so the
    antiderivative is 0 to the left of the data and constant to the right.
    """

    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape or self.x.size < 2:
            raise ValueError("x and y must be 1-D arrays of equal length >= 2")
        self.c = cumulative_trapezoid(self.x, self.y)

    @property
    def total(self):
        return float(self.c[-1])

    def __call__(self, q):
        x, y, c = self.x, self.y, self.c
        q = np.clip(np.asarray(q, dtype=float), x[0], x[-1])
        i = np.clip(np.searchsorted(x, q, side="right") - 1, 0, x.size - 2)
        h = x[i + 1] - x[i]
        d = q - x[i]
        slope = (y[i + 1] - y[i]) / h
        val = c[i] + y[i] * d + 0.5 * slope * d * d
        return float(val) if val.ndim == 0 else val

    def window(self, a, b):
        """Integral over ``[a, b]``; zero when the window is empty."""
        if b <= a:
            return 0.0
        return float(self(b) - self(a))


def integrate_window(x, y, a, b):
    """Integral over ``[a, b]`` of the piecewise-linear interpolant of ``y``.

    Sums only the cells inside the window, so small exterior integrals keep
    their relative accuracy.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = max(float(a), x[0])
    b = min(float(b), x[-1])
    if b <= a:
        return 0.0
    fa, fb = np.interp([a, b], x, y)
    i = int(np.searchsorted(x, a, side="right"))
    j = int(np.searchsorted(x, b, side="left")) - 1
    if j < i:
        return float(0.5 * (b - a) * (fa + fb))
    inner = float(np.sum(0.5 * (y[i + 1:j + 1] + y[i:j]) * np.diff(x[i:j + 1])))
    return float(0.5 * (x[i] - a) * (fa + y[i]) + inner + 0.5 * (b - x[j]) * (y[j] + fb))
