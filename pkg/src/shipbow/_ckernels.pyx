# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: window sums, greedy selection, SMO, k-means transfers.

Every function mirrors ``_pykernels`` exactly, including tie-breaking.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY, isinf

from ._pykernels import _rbf_row

cnp.import_array()

cdef double TAU = 1e-12


def window_sums(magnitude, cx, cy, Py_ssize_t half_width):
    cdef const double[:, ::1] mag = np.ascontiguousarray(magnitude, dtype=np.float64)
    cdef const long long[::1] xs = np.ascontiguousarray(cx, dtype=np.int64)
    cdef const long long[::1] ys = np.ascontiguousarray(cy, dtype=np.int64)
    cdef Py_ssize_t h = mag.shape[0], w = mag.shape[1], n = xs.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t k, x, y, x0, x1, y0, y1
    cdef double s
    for k in range(n):
        x0 = max(<Py_ssize_t>xs[k] - half_width, 0)
        x1 = min(<Py_ssize_t>xs[k] + half_width, w - 1)
        y0 = max(<Py_ssize_t>ys[k] - half_width, 0)
        y1 = min(<Py_ssize_t>ys[k] + half_width, h - 1)
        s = 0.0
        for y in range(y0, y1 + 1):
            for x in range(x0, x1 + 1):
                s += mag[y, x]
        o[k] = s
    return out


def greedy_select(xs_in, ys_in, double dist_th, Py_ssize_t min_over, Py_ssize_t top_n):
    cdef const double[::1] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef const double[::1] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    if n == 0 or top_n <= 0:
        return np.zeros(0, dtype=np.int64)
    chosen_arr = np.empty(min(n, top_n), dtype=np.int64)
    cdef long long[::1] chosen = chosen_arr
    cdef Py_ssize_t m = 0, c, s, close
    cdef double px, py, dx, dy
    for c in range(n):
        if m >= top_n:
            break
        px = xs[c]
        py = ys[c]
        close = 0
        for s in range(m):
            dx = px - xs[chosen[s]]
            dy = py - ys[chosen[s]]
            if not (sqrt(dx * dx + dy * dy) > dist_th):
                close += 1
                if close > min_over:
                    break
        if close <= min_over:
            chosen[m] = c
            m += 1
    return chosen_arr[:m].copy()


def smo_solve(kernel, x, y_in, double gamma, double c, double tol,
              long long max_iter, bint record_objective=False):
    cdef const double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    alpha_arr = np.zeros(n)
    grad_arr = -np.ones(n)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] grad = grad_arr
    cdef bint dense = kernel is not None
    cdef const double[:, ::1] K
    cdef const double[::1] ki
    cdef const double[::1] kj
    cdef double[::1] diag = np.ones(n)
    cdef Py_ssize_t t, i, j
    if dense:
        K = np.ascontiguousarray(kernel, dtype=np.float64)
        for t in range(n):
            diag[t] = K[t, t]
    else:
        x_arr = np.ascontiguousarray(x, dtype=np.float64)
    trace = []

    cdef long long it = 0
    cdef bint converged = False
    cdef double gmax, gmax2, v, yt, yi, yj, ai, aj, ai_old, aj_old
    cdef double quad, delta, diff, total, dai, daj
    while True:
        gmax = -INFINITY
        gmax2 = -INFINITY
        i = -1
        j = -1
        for t in range(n):
            yt = y[t]
            if (yt > 0 and alpha[t] < c) or (yt < 0 and alpha[t] > 0):
                v = -yt * grad[t]
                if v > gmax or i < 0:
                    gmax = v
                    i = t
            if (yt > 0 and alpha[t] > 0) or (yt < 0 and alpha[t] < c):
                v = yt * grad[t]
                if v > gmax2 or j < 0:
                    gmax2 = v
                    j = t
        if i < 0 or j < 0 or gmax + gmax2 <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        if dense:
            ki = K[i]
            kj = K[j]
        else:
            # rows come from the numpy routine so both backends agree bit for bit
            ki = _rbf_row(x_arr, i, gamma)
            kj = _rbf_row(x_arr, j, gamma)
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
        for t in range(n):
            grad[t] += y[t] * (ki[t] * dai + kj[t] * daj)
        if record_objective:
            trace.append(_dual_objective(alpha, grad))

    bias = -_rho(alpha, grad, y, c)
    return alpha_arr, bias, it, bool(converged), np.asarray(trace)


cdef double _dual_objective(const double[::1] alpha, const double[::1] grad):
    cdef Py_ssize_t t
    cdef double s = 0.0
    for t in range(alpha.shape[0]):
        s += alpha[t] * (1.0 - grad[t])
    return 0.5 * s


cdef double _rho(const double[::1] alpha, const double[::1] grad, const double[::1] y, double c):
    cdef double ub = INFINITY, lb = -INFINITY, free_sum = 0.0, yg
    cdef Py_ssize_t n_free = 0, t
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
    if isinf(ub):
        return lb
    if isinf(lb):
        return ub
    return (ub + lb) / 2.0


def transfer_pass(x_in, w_in, labels_in, Py_ssize_t k, Py_ssize_t max_sweeps):
    cdef const double[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    w_arr = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef const double[::1] w = w_arr
    labels_arr = np.array(labels_in, dtype=np.int64, copy=True)
    cdef long long[::1] lab = labels_arr
    mass_arr = np.bincount(labels_arr, weights=w_arr, minlength=k)
    sums_arr = np.zeros((k, x.shape[1]), dtype=np.float64)
    np.add.at(sums_arr, labels_arr, w_arr[:, None] * np.asarray(x))
    cdef double[::1] mass = mass_arr
    cdef double[:, ::1] sums = sums_arr
    cdef Py_ssize_t n = x.shape[0], dim = x.shape[1]
    cdef Py_ssize_t sweep, i, j, d, a, best
    cdef long long moves = 0
    cdef bint moved
    cdef double s, diff, cost, best_cost, own, wi
    with nogil:
        for sweep in range(max_sweeps):
            moved = False
            for i in range(n):
                a = lab[i]
                wi = w[i]
                if mass[a] - wi <= 0.5 * wi:
                    continue
                best = -1
                best_cost = INFINITY
                own = 0.0
                for j in range(k):
                    s = 0.0
                    for d in range(dim):
                        diff = sums[j, d] / mass[j] - x[i, d]
                        s += diff * diff
                    if j == a:
                        own = s
                    else:
                        cost = mass[j] / (mass[j] + wi) * s
                        if cost < best_cost:
                            best_cost = cost
                            best = j
                if best >= 0 and best_cost < mass[a] / (mass[a] - wi) * own * (1.0 - 1e-9):
                    for d in range(dim):
                        sums[a, d] -= wi * x[i, d]
                        sums[best, d] += wi * x[i, d]
                    mass[a] -= wi
                    mass[best] += wi
                    lab[i] = best
                    moves += 1
                    moved = True
            if not moved:
                break
    return labels_arr, int(moves)
