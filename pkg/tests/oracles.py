"""Independent reference implementations used only by the tests.

Nothing here imports the package's numerical kernels.
"""
import math

import numpy as np


def gauss_solve(a, b):
    """Gaussian elimination with partial pivoting, plain Python loops.

    ``a`` is (n, n), ``b`` is (n,) or (n, k).  Returns ``x`` with ``a x = b``.
    """
    a = [list(map(float, row)) for row in np.asarray(a)]
    b = np.asarray(b, dtype=float)
    vec = b.ndim == 1
    rhs = [list(np.atleast_1d(r)) for r in (b[:, None] if vec else b)]
    n = len(a)
    for k in range(n):
        p = max(range(k, n), key=lambda i: abs(a[i][k]))
        if a[p][k] == 0.0:
            raise ZeroDivisionError("singular matrix")
        a[k], a[p] = a[p], a[k]
        rhs[k], rhs[p] = rhs[p], rhs[k]
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            for j in range(k, n):
                a[i][j] -= f * a[k][j]
            rhs[i] = [r - f * s for r, s in zip(rhs[i], rhs[k])]
    x = [[0.0] * len(rhs[0]) for _ in range(n)]
    for i in reversed(range(n)):
        for c in range(len(rhs[0])):
            s = rhs[i][c] - sum(a[i][j] * x[j][c] for j in range(i + 1, n))
            x[i][c] = s / a[i][i]
    x = np.array(x)
    return x[:, 0] if vec else x


def rbf_shape_oracle(nodes, point, alpha):
    """Phi(point) and dPhi/dk(point) of a Gaussian-RBF stencil, via ``gauss_solve``."""
    nodes = np.asarray(nodes, dtype=float)
    point = np.asarray(point, dtype=float)
    n, dim = nodes.shape
    a = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            a[i, j] = math.exp(-alpha * sum((nodes[i, k] - nodes[j, k]) ** 2 for k in range(dim)))
    bvec = np.array([math.exp(-alpha * sum((point[k] - nodes[j, k]) ** 2 for k in range(dim)))
                     for j in range(n)])
    rhs = np.empty((n, 1 + dim))
    rhs[:, 0] = bvec
    for k in range(dim):
        rhs[:, 1 + k] = [-2 * alpha * (point[k] - nodes[j, k]) * bvec[j] for j in range(n)]
    sol = gauss_solve(a, rhs)   # A symmetric: Phi^T = A^-1 B^T
    return sol[:, 0], sol[:, 1:].T


def central_difference(f, x, h):
    """Gradient of scalar- or vector-valued ``f`` by central differences."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.array(cols)


def bilinear_oracle(values, dx, point):
    """Brute-force bilinear interpolation of cell-centred data.

    Scans every cell-centre quad and uses the one containing the point; outside
    the centre hull the coordinate is clamped onto it.
    """
    nx, ny = values.shape
    cx = [(i + 0.5) * dx for i in range(nx)]
    cy = [(j + 0.5) * dx for j in range(ny)]
    px = min(max(point[0], cx[0]), cx[-1])
    py = min(max(point[1], cy[0]), cy[-1])
    for i in range(nx - 1):
        for j in range(ny - 1):
            if cx[i] <= px <= cx[i + 1] and cy[j] <= py <= cy[j + 1]:
                tx = (px - cx[i]) / dx
                ty = (py - cy[j]) / dx
                return ((1 - tx) * (1 - ty) * values[i][j] + tx * (1 - ty) * values[i + 1][j]
                        + (1 - tx) * ty * values[i][j + 1] + tx * ty * values[i + 1][j + 1])
    raise ValueError("point outside grid")


def brute_knn(points, query, count):
    d = np.sqrt(((np.asarray(points) - np.asarray(query)) ** 2).sum(axis=1))
    return np.argsort(d, kind="stable")[:count], np.sort(d)[:count]
