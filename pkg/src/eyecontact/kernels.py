"""Hot numeric kernels, each in a numba and a vectorized-numpy flavour.

The public entry points (``lm_pnp``, ``dbscan``, ``pegasos``) dispatch on
``eyecontact._jit.USE_NUMBA``. Both flavours implement the same algorithm
and visit data in the same order; they are interchangeable up to
floating-point rounding (DBSCAN labels are identical).
"""
import numpy as np

from ._jit import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Levenberg-Marquardt refinement of a PnP pose.
#
# Parameters are a left-multiplied rotation increment (axis-angle, rad) and a
# translation increment (mm). Residuals are pixel reprojection errors laid
# out as [u0 - u0_obs, v0 - v0_obs, u1 - ...].
#
# Converged when the proposed step norm drops below ``tol``, when an accepted
# step improves the cost by less than LM_REL_COST_TOL (relative), or when the
# damping saturates (no step lowers the cost).
#
# Return: (R, t, cost, iterations, converged)
# ---------------------------------------------------------------------------

LM_LAMBDA0 = 1e-3
LM_LAMBDA_MAX = 1e16
# accepted steps that lower the cost by less than this fraction end the solve
LM_REL_COST_TOL = 1e-12


def _rodrigues_numpy(w):
    theta = np.sqrt(w @ w)
    K = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    if theta < 1e-12:
        return np.eye(3) + K
    return np.eye(3) + (np.sin(theta) / theta) * K + ((1.0 - np.cos(theta)) / theta**2) * (K @ K)


def _reproj_cost_numpy(obj, img, fx, fy, cx, cy, R, t):
    P = obj @ R.T + t
    if np.any(P[:, 2] <= 0.0):
        return np.inf
    du = fx * P[:, 0] / P[:, 2] + cx - img[:, 0]
    dv = fy * P[:, 1] / P[:, 2] + cy - img[:, 1]
    return float(du @ du + dv @ dv)


def lm_pnp_numpy(obj, img, fx, fy, cx, cy, R0, t0, max_iter, tol):
    n = obj.shape[0]
    R = R0.copy()
    t = t0.copy()
    cost = _reproj_cost_numpy(obj, img, fx, fy, cx, cy, R, t)
    lam = LM_LAMBDA0
    need_jac = True
    A = g = None
    for it in range(1, max_iter + 1):
        if need_jac:
            Q = obj @ R.T
            P = Q + t
            X, Y, Z = P[:, 0], P[:, 1], P[:, 2]
            r = np.empty(2 * n)
            r[0::2] = fx * X / Z + cx - img[:, 0]
            r[1::2] = fy * Y / Z + cy - img[:, 1]
            # d(proj)/dP, 2 rows per point
            dP = np.zeros((2 * n, 3))
            dP[0::2, 0] = fx / Z
            dP[0::2, 2] = -fx * X / Z**2
            dP[1::2, 1] = fy / Z
            dP[1::2, 2] = -fy * Y / Z**2
            # dP/domega = -[Q]x, so each rotation row is Q x dP; dP/dt = I
            Qr = np.repeat(Q, 2, axis=0)
            J = np.empty((2 * n, 6))
            J[:, 0] = Qr[:, 1] * dP[:, 2] - Qr[:, 2] * dP[:, 1]
            J[:, 1] = Qr[:, 2] * dP[:, 0] - Qr[:, 0] * dP[:, 2]
            J[:, 2] = Qr[:, 0] * dP[:, 1] - Qr[:, 1] * dP[:, 0]
            J[:, 3:] = dP
            A = J.T @ J
            g = J.T @ r
            need_jac = False
        diag = np.maximum(np.diag(A), 1e-12)
        delta = np.linalg.solve(A + lam * np.diag(diag), -g)
        if np.sqrt(delta @ delta) < tol:
            return R, t, cost, it, True
        R_new = _rodrigues_numpy(delta[:3]) @ R
        t_new = t + delta[3:]
        cost_new = _reproj_cost_numpy(obj, img, fx, fy, cx, cy, R_new, t_new)
        if cost_new < cost:
            small = cost - cost_new <= LM_REL_COST_TOL * cost
            R, t, cost = R_new, t_new, cost_new
            if small:
                return R, t, cost, it, True
            lam = max(lam * 0.1, 1e-12)
            need_jac = True
        else:
            lam *= 10.0
            if lam > LM_LAMBDA_MAX:
                return R, t, cost, it, True
    return R, t, cost, max_iter, False


@njit
def _rodrigues_nb(w):
    theta = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    K = np.zeros((3, 3))
    K[0, 1] = -w[2]
    K[0, 2] = w[1]
    K[1, 0] = w[2]
    K[1, 2] = -w[0]
    K[2, 0] = -w[1]
    K[2, 1] = w[0]
    R = np.eye(3)
    if theta < 1e-12:
        return R + K
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    KK = K @ K
    for i in range(3):
        for j in range(3):
            R[i, j] += a * K[i, j] + b * KK[i, j]
    return R


@njit
def _reproj_cost_nb(obj, img, fx, fy, cx, cy, R, t):
    cost = 0.0
    for k in range(obj.shape[0]):
        X = R[0, 0] * obj[k, 0] + R[0, 1] * obj[k, 1] + R[0, 2] * obj[k, 2] + t[0]
        Y = R[1, 0] * obj[k, 0] + R[1, 1] * obj[k, 1] + R[1, 2] * obj[k, 2] + t[1]
        Z = R[2, 0] * obj[k, 0] + R[2, 1] * obj[k, 1] + R[2, 2] * obj[k, 2] + t[2]
        if Z <= 0.0:
            return np.inf
        du = fx * X / Z + cx - img[k, 0]
        dv = fy * Y / Z + cy - img[k, 1]
        cost += du * du + dv * dv
    return cost


@njit
def lm_pnp_numba(obj, img, fx, fy, cx, cy, R0, t0, max_iter, tol):
    n = obj.shape[0]
    R = R0.copy()
    t = t0.copy()
    cost = _reproj_cost_nb(obj, img, fx, fy, cx, cy, R, t)
    lam = LM_LAMBDA0
    A = np.zeros((6, 6))
    g = np.zeros(6)
    J = np.zeros((2 * n, 6))
    r = np.zeros(2 * n)
    need_jac = True
    for it in range(1, max_iter + 1):
        if need_jac:
            for k in range(n):
                qx = R[0, 0] * obj[k, 0] + R[0, 1] * obj[k, 1] + R[0, 2] * obj[k, 2]
                qy = R[1, 0] * obj[k, 0] + R[1, 1] * obj[k, 1] + R[1, 2] * obj[k, 2]
                qz = R[2, 0] * obj[k, 0] + R[2, 1] * obj[k, 1] + R[2, 2] * obj[k, 2]
                X = qx + t[0]
                Y = qy + t[1]
                Z = qz + t[2]
                r[2 * k] = fx * X / Z + cx - img[k, 0]
                r[2 * k + 1] = fy * Y / Z + cy - img[k, 1]
                # u row: dP = (fx/Z, 0, -fx X/Z^2)
                a0 = fx / Z
                a2 = -fx * X / (Z * Z)
                J[2 * k, 0] = a2 * qy
                J[2 * k, 1] = a0 * qz - a2 * qx
                J[2 * k, 2] = -a0 * qy
                J[2 * k, 3] = a0
                J[2 * k, 4] = 0.0
                J[2 * k, 5] = a2
                # v row: dP = (0, fy/Z, -fy Y/Z^2)
                b1 = fy / Z
                b2 = -fy * Y / (Z * Z)
                J[2 * k + 1, 0] = b2 * qy - b1 * qz
                J[2 * k + 1, 1] = -b2 * qx
                J[2 * k + 1, 2] = b1 * qx
                J[2 * k + 1, 3] = 0.0
                J[2 * k + 1, 4] = b1
                J[2 * k + 1, 5] = b2
            for i in range(6):
                s = 0.0
                for m in range(2 * n):
                    s += J[m, i] * r[m]
                g[i] = s
                for j in range(6):
                    s = 0.0
                    for m in range(2 * n):
                        s += J[m, i] * J[m, j]
                    A[i, j] = s
            need_jac = False
        M = A.copy()
        for i in range(6):
            d = A[i, i] if A[i, i] > 1e-12 else 1e-12
            M[i, i] += lam * d
        delta = np.linalg.solve(M, -g)
        if np.sqrt(np.sum(delta * delta)) < tol:
            return R, t, cost, it, True
        R_new = _rodrigues_nb(delta[:3]) @ R
        t_new = t + delta[3:]
        cost_new = _reproj_cost_nb(obj, img, fx, fy, cx, cy, R_new, t_new)
        if cost_new < cost:
            small = cost - cost_new <= LM_REL_COST_TOL * cost
            R = R_new
            t = t_new
            cost = cost_new
            if small:
                return R, t, cost, it, True
            lam = max(lam * 0.1, 1e-12)
            need_jac = True
        else:
            lam *= 10.0
            if lam > LM_LAMBDA_MAX:
                return R, t, cost, it, True
    return R, t, cost, max_iter, False


# ---------------------------------------------------------------------------
# DBSCAN over 2D points. Points are visited in input order; clusters are
# numbered in order of discovery; border points join the first cluster that
# reaches them. The neighbourhood count includes the point itself.
# ---------------------------------------------------------------------------

NOISE = -1


def _neighbour_lists(points, eps, chunk=512):
    eps2 = eps * eps
    out = []
    for start in range(0, len(points), chunk):
        block = points[start:start + chunk]
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
        out.extend(np.flatnonzero(row) for row in d2 <= eps2)
    return out


def dbscan_numpy(points, eps, min_pts):
    n = len(points)
    nbrs = _neighbour_lists(points, eps)
    core = np.array([len(a) >= min_pts for a in nbrs], dtype=bool)
    labels = np.full(n, NOISE, dtype=np.int64)
    cid = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cid
        stack = [i]
        while stack:
            p = stack.pop()
            cand = nbrs[p]
            new = cand[labels[cand] == NOISE]
            labels[new] = cid
            stack.extend(new[core[new]].tolist())
        cid += 1
    return labels


@njit
def dbscan_numba(points, eps, min_pts):
    n = points.shape[0]
    eps2 = eps * eps
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        c = 0
        for j in range(n):
            dx = points[i, 0] - points[j, 0]
            dy = points[i, 1] - points[j, 1]
            if dx * dx + dy * dy <= eps2:
                c += 1
        counts[i] = c
    labels = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    cid = 0
    for i in range(n):
        if labels[i] != -1 or counts[i] < min_pts:
            continue
        labels[i] = cid
        top = 0
        stack[top] = i
        top += 1
        while top > 0:
            top -= 1
            p = stack[top]
            for j in range(n):
                if labels[j] != -1:
                    continue
                dx = points[p, 0] - points[j, 0]
                dy = points[p, 1] - points[j, 1]
                if dx * dx + dy * dy <= eps2:
                    labels[j] = cid
                    if counts[j] >= min_pts:
                        stack[top] = j
                        top += 1
        cid += 1
    return labels


# ---------------------------------------------------------------------------
# Pegasos subgradient descent on the L2-regularized hinge loss.
#
# X is bias-augmented (last column is 1). ``order`` is an (epochs, n) matrix
# of sample indices fixing the visiting sequence. Returns the weight vector
# after every epoch, shape (epochs, d).
# ---------------------------------------------------------------------------


def pegasos_numpy(X, y, sample_weight, lam, order):
    epochs, n_steps = order.shape
    w = np.zeros(X.shape[1])
    history = np.empty((epochs, X.shape[1]))
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for e in range(epochs):
        for i in order[e]:
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * np.dot(w, X[i])
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += (eta * sample_weight[i] * y[i]) * X[i]
            norm = np.sqrt(np.dot(w, w))
            if norm > radius:
                w *= radius / norm
        history[e] = w
    return history


@njit
def pegasos_numba(X, y, sample_weight, lam, order):
    epochs, n_steps = order.shape
    d = X.shape[1]
    w = np.zeros(d)
    history = np.empty((epochs, d))
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for e in range(epochs):
        for k in range(n_steps):
            i = order[e, k]
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * np.dot(w, X[i])
            shrink = 1.0 - eta * lam
            for j in range(d):
                w[j] *= shrink
            if margin < 1.0:
                step = eta * sample_weight[i] * y[i]
                for j in range(d):
                    w[j] += step * X[i, j]
            norm = np.sqrt(np.dot(w, w))
            if norm > radius:
                s = radius / norm
                for j in range(d):
                    w[j] *= s
        history[e] = w
    return history


if USE_NUMBA:
    lm_pnp = lm_pnp_numba
    dbscan = dbscan_numba
    pegasos = pegasos_numba
else:
    lm_pnp = lm_pnp_numpy
    dbscan = dbscan_numpy
    pegasos = pegasos_numpy
