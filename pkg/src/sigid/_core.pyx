# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: Zhang-Suen thinning and the SMO dual solver.

Both routines mirror ``sigid._fallback`` operation for operation so the two
backends agree to the last bit on the same input.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double TAU = 1e-12
cdef double INF = float("inf")


def zhang_suen(cnp.uint8_t[:, ::1] ink):
    """Thin a 0/1 image (already padded by one background pixel on each side)."""
    cdef Py_ssize_t h = ink.shape[0], w = ink.shape[1]
    cdef Py_ssize_t r, c, k, n_marked
    cdef int step, b, a
    cdef cnp.uint8_t p2, p3, p4, p5, p6, p7, p8, p9
    cdef bint changed = True
    out = np.array(ink, dtype=np.uint8, copy=True)
    cdef cnp.uint8_t[:, ::1] img = out
    marks = np.empty(h * w, dtype=np.intp)
    cdef Py_ssize_t[::1] mk = marks
    while changed:
        changed = False
        for step in range(2):
            n_marked = 0
            for r in range(1, h - 1):
                for c in range(1, w - 1):
                    if img[r, c] == 0:
                        continue
                    p2 = img[r - 1, c]
                    p3 = img[r - 1, c + 1]
                    p4 = img[r, c + 1]
                    p5 = img[r + 1, c + 1]
                    p6 = img[r + 1, c]
                    p7 = img[r + 1, c - 1]
                    p8 = img[r, c - 1]
                    p9 = img[r - 1, c - 1]
                    b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
                    if b < 2 or b > 6:
                        continue
                    a = ((p2 == 0 and p3 == 1) + (p3 == 0 and p4 == 1)
                         + (p4 == 0 and p5 == 1) + (p5 == 0 and p6 == 1)
                         + (p6 == 0 and p7 == 1) + (p7 == 0 and p8 == 1)
                         + (p8 == 0 and p9 == 1) + (p9 == 0 and p2 == 1))
                    if a != 1:
                        continue
                    if step == 0:
                        if p2 * p4 * p6 != 0 or p4 * p6 * p8 != 0:
                            continue
                    else:
                        if p2 * p4 * p8 != 0 or p2 * p6 * p8 != 0:
                            continue
                    mk[n_marked] = r * w + c
                    n_marked += 1
            for k in range(n_marked):
                img[mk[k] // w, mk[k] % w] = 0
            if n_marked:
                changed = True
    return out


def smo_solve(double[:, ::1] K, double[::1] y, double C,
              double[::1] alpha, double[::1] grad,
              double tol, Py_ssize_t max_updates):
    """Second-order working-set SMO on the soft-margin dual.

    ``alpha`` and ``grad`` (gradient of 0.5 a'Qa - e'a) are updated in place.
    Returns ``(n_updates, converged)``.
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t t, i, j, it = 0
    cdef double gmax, gmax2, obj_min, grad_diff, quad, obj, delta, diff, total
    cdef double old_ai, old_aj, dai, daj, qit, qjt, yi, yj
    while it < max_updates:
        gmax = -INF
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C and -grad[t] >= gmax:
                    gmax = -grad[t]
                    i = t
            else:
                if alpha[t] > 0 and grad[t] >= gmax:
                    gmax = grad[t]
                    i = t
        gmax2 = -INF
        j = -1
        obj_min = INF
        for t in range(n):
            if y[t] > 0:
                if alpha[t] > 0:
                    grad_diff = gmax + grad[t]
                    if grad[t] >= gmax2:
                        gmax2 = grad[t]
                    if grad_diff > 0 and i >= 0:
                        quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if quad <= 0:
                            quad = TAU
                        obj = -(grad_diff * grad_diff) / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
            else:
                if alpha[t] < C:
                    grad_diff = gmax - grad[t]
                    if -grad[t] >= gmax2:
                        gmax2 = -grad[t]
                    if grad_diff > 0 and i >= 0:
                        quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if quad <= 0:
                            quad = TAU
                        obj = -(grad_diff * grad_diff) / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
        if gmax + gmax2 <= tol or j < 0:
            return it, True

        yi = y[i]
        yj = y[j]
        old_ai = alpha[i]
        old_aj = alpha[j]
        if yi != yj:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = total

        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for t in range(n):
            qit = y[t] * yi * K[t, i]
            qjt = y[t] * yj * K[t, j]
            grad[t] += qit * dai
            grad[t] += qjt * daj
        it += 1
    return it, False
