"""Pure-Python/NumPy fallback for the compiled kernels in ``_ckernels.pyx``.

Both modules expose the same three functions with identical semantics; the
tests compare them output-for-output.
"""

import math

import numpy as np


def _boyling_direction(x, y):
    # Same operation order as the compiled kernel, so results match bitwise.
    p = y * y * y * (1.0 - y) * (1.0 - y)
    q = y * y * y - 2.0 * (1.0 - y) * (1.0 - y)
    norm = math.sqrt(q * q + p * p)
    if norm < 1e-12:
        return None
    return q / norm, -p / norm


def boyling_characteristic(x0, y0, arclength, step, xlo, xhi, ylo, yhi):
    """RK4 integration of the unit annihilator field of the Boyling form.

    Returns an ``(k, 2)`` array of samples, starting at ``(x0, y0)``.  Stops
    early when the field degenerates or the next sample leaves the box.
    """
    out = [(x0, y0)]
    x, y = x0, y0
    travelled = 0.0
    while travelled < arclength * (1.0 - 1e-15):
        h = min(step, arclength - travelled)
        k1 = _boyling_direction(x, y)
        if k1 is None:
            break
        k2 = _boyling_direction(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1])
        if k2 is None:
            break
        k3 = _boyling_direction(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1])
        if k3 is None:
            break
        k4 = _boyling_direction(x + h * k3[0], y + h * k3[1])
        if k4 is None:
            break
        nx = x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        ny = y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        if not (xlo <= nx <= xhi and ylo <= ny <= yhi):
            break
        x, y = nx, ny
        out.append((x, y))
        travelled += h
    return np.array(out, dtype=np.float64)


def bellman_ford(n_nodes, src, dst, weight, delta):
    """Relaxation from a virtual source joined to every node by 0-weight edges.

    Returns ``(pred, candidates)``: the predecessor array after ``n_nodes``
    rounds and the destination nodes of edges still relaxable by more than
    ``delta`` afterwards, in edge order.
    """
    dist = [0.0] * n_nodes
    pred = [-1] * n_nodes
    edges = list(zip(src.tolist(), dst.tolist(), weight.tolist()))
    for _ in range(n_nodes):
        changed = False
        for u, v, w in edges:
            cand = dist[u] + w
            if cand < dist[v] - delta:
                dist[v] = cand
                pred[v] = u
                changed = True
        if not changed:
            break
    candidates = [v for u, v, w in edges if dist[u] + w < dist[v] - delta]
    return np.array(pred, dtype=np.int64), np.array(candidates, dtype=np.int64)


def assign_classes(profiles, tol):
    """Label rows of ``profiles`` by tolerance equivalence to a representative.

    Row ``i`` joins the earliest-created class whose representative differs
    from it by at most ``tol`` in every column; otherwise it founds a new
    class.  Labels are numbered in order of first appearance.
    """
    profiles = np.asarray(profiles, dtype=np.float64)
    n = profiles.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    label = 0
    start = 0
    while True:
        unassigned = np.flatnonzero(labels[start:] < 0)
        if unassigned.size == 0:
            break
        rep = start + unassigned[0]
        rest = start + unassigned
        close = np.all(np.abs(profiles[rest] - profiles[rep]) <= tol, axis=1)
        labels[rest[close]] = label
        label += 1
        start = rep + 1
    return labels
