"""Pure-Python versions of the hot loops.

Semantics match ``_ckernels.pyx`` one to one; the test-suite runs both
backends against the same oracles.
"""
import math

import numpy as np

TAU = 1e-12


def window_sums(magnitude, cx, cy, half_width):
    """Sum ``magnitude`` over a clipped square window around each center."""
    magnitude = np.asarray(magnitude, dtype=np.float64)
    h, w = magnitude.shape
    out = np.empty(len(cx), dtype=np.float64)
    for n in range(len(cx)):
        x0 = max(int(cx[n]) - half_width, 0)
        x1 = min(int(cx[n]) + half_width, w - 1)
        y0 = max(int(cy[n]) - half_width, 0)
        y1 = min(int(cy[n]) + half_width, h - 1)
        s = 0.0
        for y in range(y0, y1 + 1):
            row = magnitude[y]
            for x in range(x0, x1 + 1):
                s += row[x]
        out[n] = s
    return out


def greedy_select(xs, ys, dist_th, min_over, top_n):
    """Indices of the points accepted by the dispersion-constrained greedy pass.

    A candidate is accepted when at most ``min_over`` already accepted points
    lie within ``dist_th`` of it. The first point is always accepted.
    """
    n = len(xs)
    chosen = []
    if n == 0 or top_n <= 0:
        return np.zeros(0, dtype=np.int64)
    for c in range(n):
        if len(chosen) >= top_n:
            break
        px, py = float(xs[c]), float(ys[c])
        close = 0
        for s in chosen:
            dx = px - xs[s]
            dy = py - ys[s]
            if not math.sqrt(dx * dx + dy * dy) > dist_th:
                close += 1
                if close > min_over:
                    break
        if close <= min_over:
            chosen.append(c)
    return np.asarray(chosen, dtype=np.int64)


def _rbf_row(x, i, gamma):
    d = x - x[i]
    row = np.exp(-gamma * np.einsum("ij,ij->i", d, d))
    row[i] = 1.0
    return row


def smo_solve(kernel, x, y, gamma, c, tol, max_iter, record_objective=False):
    """Solve the soft-margin SVM dual with maximal-violating-pair SMO.

    Parameters
    ----------
    kernel : ndarray or None
        Dense ``(n, n)`` kernel matrix. When None, rows are computed from
        ``x`` with the RBF kernel of width ``gamma``.
    y : ndarray
        Labels in {-1, +1} as floats.

    Returns
    -------
    alpha, bias, n_iter, converged, objective_trace
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    trace = []
    if kernel is not None:
        diag = np.ascontiguousarray(np.diag(kernel))
    else:
        diag = np.ones(n)

    def row(i):
        if kernel is not None:
            return kernel[i]
        return _rbf_row(x, i, gamma)

    it = 0
    converged = False
    pos = y > 0
    while True:
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        i = j = -1
        gmax = gmax2 = -math.inf
        if up.any():
            v = np.where(up, -y * grad, -np.inf)
            i = int(np.argmax(v))
            gmax = v[i]
        if low.any():
            v = np.where(low, y * grad, -np.inf)
            j = int(np.argmax(v))
            gmax2 = v[j]
        if i < 0 or j < 0 or gmax + gmax2 <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        ki = row(i)
        kj = row(j)
        yi = y[i]
        yj = y[j]
        ai_old = alpha[i]
        aj_old = alpha[j]
        ai = ai_old
        aj = aj_old
        quad = diag[i] + diag[j] - 2.0 * ki[j]
        if quad <= 0:
            quad = TAU
        if yi != yj:
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > c:
                    ai = c
                    aj = c - diff
            else:
                if aj > c:
                    aj = c
                    ai = c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > c:
                if ai > c:
                    ai = c
                    aj = total - c
            else:
                if aj < 0:
                    aj = 0.0
                    ai = total
            if total > c:
                if aj > c:
                    aj = c
                    ai = total - c
            else:
                if ai < 0:
                    ai = 0.0
                    aj = total
        alpha[i] = ai
        alpha[j] = aj
        dai = (ai - ai_old) * yi
        daj = (aj - aj_old) * yj
        # grad_t += y_t * (K_ti * y_i * dA_i + K_tj * y_j * dA_j)
        grad += y * (ki * dai + kj * daj)
        if record_objective:
            trace.append(_dual_objective(alpha, grad))

    bias = -_rho(alpha, grad, y, c)
    return alpha, bias, it, converged, np.asarray(trace)


def _dual_objective(alpha, grad):
    # W = sum(a) - 1/2 a'Qa, with grad = Qa - e
    s = 0.0
    for t in range(alpha.shape[0]):
        s += alpha[t] * (1.0 - grad[t])
    return 0.5 * s


def _rho(alpha, grad, y, c):
    ub = math.inf
    lb = -math.inf
    free_sum = 0.0
    n_free = 0
    for t in range(alpha.shape[0]):
        yg = y[t] * grad[t]
        if alpha[t] >= c:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            free_sum += yg
    if n_free > 0:
        return free_sum / n_free
    if math.isinf(ub):
        return lb
    if math.isinf(lb):
        return ub
    return (ub + lb) / 2.0


def transfer_pass(x, w, labels, k, max_sweeps):
    """Sequential single-point transfers between weighted k-means clusters.

    Row i (weight w_i) leaves cluster a for b when W_b/(W_b+w_i)*|x_i-c_b|^2
    is below W_a/(W_a-w_i)*|x_i-c_a|^2 by a relative margin of 1e-9, W being
    cluster weights; each such move lowers the weighted within-cluster sum of
    squares. Rows are visited in index order and centers are updated after
    every move. Returns the new labels and the number of moves.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    labels = np.array(labels, dtype=np.int64, copy=True)
    mass = np.bincount(labels, weights=w, minlength=k)
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, w[:, None] * x)
    moves = 0
    for _ in range(max_sweeps):
        moved = False
        for i in range(x.shape[0]):
            a = labels[i]
            wi = w[i]
            if mass[a] - wi <= 0.5 * wi:
                continue
            diff = sums / mass[:, None] - x[i]
            dist = np.einsum("kd,kd->k", diff, diff)
            cost = mass / (mass + wi) * dist
            cost[a] = np.inf
            b = int(np.argmin(cost))
            if cost[b] < mass[a] / (mass[a] - wi) * dist[a] * (1.0 - 1e-9):
                sums[a] -= wi * x[i]
                sums[b] += wi * x[i]
                mass[a] -= wi
                mass[b] += wi
                labels[i] = b
                moves += 1
                moved = True
        if not moved:
            break
    return labels, moves
