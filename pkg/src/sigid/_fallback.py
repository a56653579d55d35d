"""Pure numpy versions of the compiled kernels in ``_core.pyx``.

Same signatures, same arithmetic order, same tie-breaking (last index wins
in working-set selection), so results match the extension bit for bit.
"""

import numpy as np

TAU = 1e-12


def _neighbours(img):
    c = img[1:-1, 1:-1]
    p2 = img[:-2, 1:-1]
    p3 = img[:-2, 2:]
    p4 = img[1:-1, 2:]
    p5 = img[2:, 2:]
    p6 = img[2:, 1:-1]
    p7 = img[2:, :-2]
    p8 = img[1:-1, :-2]
    p9 = img[:-2, :-2]
    return c, (p2, p3, p4, p5, p6, p7, p8, p9)


def zhang_suen(ink):
    img = np.array(ink, dtype=np.uint8, copy=True)
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            c, ps = _neighbours(img)
            p2, p3, p4, p5, p6, p7, p8, p9 = (p.astype(np.int32) for p in ps)
            b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
            seq = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            a = sum(((seq[k] == 0) & (seq[k + 1] == 1)).astype(np.int32) for k in range(8))
            if step == 0:
                side = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
            else:
                side = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
            kill = (c == 1) & (b >= 2) & (b <= 6) & (a == 1) & side
            if kill.any():
                img[1:-1, 1:-1][kill] = 0
                changed = True
    return img


def _last_argmax(values, mask):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return -1, -np.inf
    v = values[idx]
    best = v.max()
    return int(idx[np.flatnonzero(v == best)[-1]]), float(best)


def smo_solve(K, y, C, alpha, grad, tol, max_updates):
    diag = np.diagonal(K).copy()
    it = 0
    while it < max_updates:
        pos = y > 0
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        i, gmax = _last_argmax(-y * grad, up)
        signed = y * grad
        gmax2 = float(signed[low].max()) if low.any() else -np.inf
        j = -1
        if i >= 0:
            grad_diff = gmax + signed
            cand = low & (grad_diff > 0)
            if cand.any():
                quad = K[i, i] + diag - 2.0 * K[i, :]
                quad = np.where(quad <= 0, TAU, quad)
                obj = -(grad_diff * grad_diff) / quad
                j, _ = _last_argmax(-obj, cand)
        if gmax + gmax2 <= tol or j < 0:
            return it, True

        yi, yj = y[i], y[j]
        old_ai, old_aj = alpha[i], alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        if yi != yj:
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0
                alpha[j] = total

        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        grad += (y * yi * K[:, i]) * dai
        grad += (y * yj * K[:, j]) * daj
        it += 1
    return it, False
