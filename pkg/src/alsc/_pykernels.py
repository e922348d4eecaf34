"""Pure numpy fallback for the compiled kernels.

Every function here has the same signature and contract as its twin in
``_ckernels.pyx``.  The CART scans reproduce the compiled arithmetic order
(sequential accumulation, class sums from index 0 upward) so both backends
grow identical trees; geometry features agree to rounding.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

NFEAT = 13
OK = 0
DEGENERATE = 1


# ---------------------------------------------------------------- eigen 3x3

def _jacobi(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = m.astype(np.float64).copy()
    v = np.eye(3)
    for _ in range(60):
        off = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
        if off == 0.0 or off <= 1e-44 * (a[0, 0] ** 2 + a[1, 1] ** 2 + a[2, 2] ** 2):
            break
        for p in range(2):
            for q in range(p + 1, 3):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                for k in range(3):
                    if k != p and k != q:
                        g, h = a[k, p], a[k, q]
                        a[k, p] = a[p, k] = g - s * (h + g * tau)
                        a[k, q] = a[q, k] = h + s * (g - h * tau)
                for k in range(3):
                    g, h = v[k, p], v[k, q]
                    v[k, p] = g - s * (h + g * tau)
                    v[k, q] = h + s * (g - h * tau)
    return np.diag(a).copy(), v.T.copy()


def _null_vectors(T: np.ndarray, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    A = T - lam[:, None, None] * np.eye(3)
    r0, r1, r2 = A[:, 0], A[:, 1], A[:, 2]
    cands = np.stack([np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)], axis=1)
    norms = np.einsum("nij,nij->ni", cands, cands)
    pick = np.argmax(norms, axis=1)
    idx = np.arange(len(T))
    best = norms[idx, pick]
    vec = cands[idx, pick]
    ok = best > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        vec = vec / np.sqrt(best)[:, None]
    return vec, ok


def _sort_and_sign(w: np.ndarray, V: np.ndarray) -> None:
    order = np.argsort(-w, axis=1, kind="stable")
    idx = np.arange(len(w))[:, None]
    w[:] = w[idx, order]
    V[:] = V[idx, order]
    np.maximum(w, 0.0, out=w)
    big = np.argmax(np.abs(V), axis=2)
    sign = np.take_along_axis(V, big[:, :, None], axis=2)[:, :, 0]
    V *= np.where(sign < 0.0, -1.0, 1.0)[:, :, None]


def eig3_batch(T: np.ndarray):
    """Eigenvalues (descending) and eigenvectors (rows) for a stack of 3x3."""
    T = np.ascontiguousarray(T, dtype=np.float64)
    n = len(T)
    a00, a11, a22 = T[:, 0, 0], T[:, 1, 1], T[:, 2, 2]
    a01, a02, a12 = T[:, 0, 1], T[:, 0, 2], T[:, 1, 2]
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    q = (a00 + a11 + a22) / 3.0
    b00, b11, b22 = a00 - q, a11 - q, a22 - q
    p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * p1
    scalar = p2 == 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.sqrt(p2 / 6.0)
        detb = (b00 * (b11 * b22 - a12 * a12)
                - a01 * (a01 * b22 - a12 * a02)
                + a02 * (a01 * a12 - b11 * a02))
        r = detb / (2.0 * p * p * p)
    phi = np.where(r <= -1.0, math.pi / 3.0,
                   np.where(r >= 1.0, 0.0, np.arccos(np.clip(r, -1.0, 1.0)) / 3.0))
    w = np.empty((n, 3))
    w[:, 0] = q + 2.0 * p * np.cos(phi)
    w[:, 2] = q + 2.0 * p * np.cos(phi + 2.0 * math.pi / 3.0)
    w[:, 1] = 3.0 * q - w[:, 0] - w[:, 2]
    e1, ok1 = _null_vectors(T, w[:, 0])
    e3, ok3 = _null_vectors(T, w[:, 2])
    e2 = np.cross(e3, e1)
    n2 = np.sqrt(np.einsum("ni,ni->n", e2, e2))
    with np.errstate(invalid="ignore", divide="ignore"):
        e2 = e2 / n2[:, None]
    V = np.stack([e1, e2, e3], axis=1)
    scale = np.maximum(np.maximum(np.abs(w[:, 0]), np.abs(w[:, 2])), 1.0)
    resid = np.linalg.norm(np.einsum("nij,nkj->nki", T, V) - w[:, :, None] * V, axis=2)
    closed = (ok1 & ok3 & (np.abs(np.einsum("ni,ni->n", e1, e3)) <= 1e-12)
              & (n2 > 0.0) & np.all(resid <= 1e-12 * scale[:, None], axis=1))
    closed &= ~scalar
    for i in np.flatnonzero(~closed & ~scalar):
        w[i], V[i] = _jacobi(T[i])
    if scalar.any():
        w[scalar] = q[scalar, None]
        V[scalar] = np.eye(3)
    _sort_and_sign(w, V)
    return w, V, closed | scalar


# ------------------------------------------------------------- grid search

def _cell_range(c: float, r: float, origin: float, cell: float, ncell: int):
    a = math.floor((c - r - origin) / cell)
    b = math.floor((c + r - origin) / cell)
    return max(a, 0), min(b, ncell - 1)


def _window(order, cell_start, nx, ix0, ix1, iy0, iy1) -> np.ndarray:
    parts = []
    for iy in range(iy0, iy1 + 1):
        s = cell_start[iy * nx + ix0]
        e = cell_start[iy * nx + ix1 + 1]
        if e > s:
            parts.append(order[s:e])
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts)


def knn_table(xyz, order, cell_start, x0, y0, cell, nx, ny, k):
    """k nearest other points of every point, ties by ascending id."""
    xyz = np.asarray(xyz)
    n = len(xyz)
    ids = np.full((n, k), -1, dtype=np.int64)
    d2 = np.full((n, k), np.inf)
    if k == 0 or n == 0:
        return ids, d2
    maxlevel = max(nx, ny)
    for i in range(n):
        cx, cy, cz = xyz[i]
        cix = min(max(int(math.floor((cx - x0) / cell)), 0), nx - 1)
        ciy = min(max(int(math.floor((cy - y0) / cell)), 0), ny - 1)
        level = 1
        while True:
            reach = min(cx - (x0 + (cix - level) * cell),
                        (x0 + (cix + level + 1) * cell) - cx,
                        cy - (y0 + (ciy - level) * cell),
                        (y0 + (ciy + level + 1) * cell) - cy)
            cand = _window(order, cell_start, nx,
                           max(cix - level, 0), min(cix + level, nx - 1),
                           max(ciy - level, 0), min(ciy + level, ny - 1))
            cand = cand[cand != i]
            d = xyz[cand] - xyz[i]
            dd = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
            sel = np.lexsort((cand, dd))[:k]
            filled = len(sel)
            if level >= maxlevel or (filled == k and dd[sel[-1]] <= reach * reach):
                break
            level += 1
        ids[i, :filled] = cand[sel]
        d2[i, :filled] = dd[sel]
    return ids, d2


def _orient(normal: np.ndarray) -> np.ndarray:
    nx, ny, nz = normal
    if nz < 0.0 or (nz == 0.0 and (nx < 0.0 or (nx == 0.0 and ny < 0.0))):
        return -normal
    return normal


def neighborhood_features(xyz, order, cell_start, x0, y0, cell, nx, ny,
                          knn_ids, centers, radius, sphere):
    """All 13 neighborhood features for ``centers`` at one radius."""
    xyz = np.asarray(xyz)
    centers = np.asarray(centers)
    m = len(centers)
    out = np.empty((m, NFEAT))
    flags = np.zeros((m, NFEAT), dtype=np.uint8)
    r2 = radius * radius
    tensors = np.zeros((m, 3, 3))
    has_tensor = np.zeros(m, dtype=bool)
    for t, i in enumerate(centers.tolist()):
        cx, cy, cz = xyz[i]
        ix0, ix1 = _cell_range(cx, radius, x0, cell, nx)
        iy0, iy1 = _cell_range(cy, radius, y0, cell, ny)
        cand = _window(order, cell_start, nx, ix0, ix1, iy0, iy1)
        dx = xyz[cand, 0] - cx
        dy = xyz[cand, 1] - cy
        dd2 = dx * dx + dy * dy
        incyl = dd2 <= r2
        dz = xyz[cand, 2] - cz
        insph = incyl & (dd2 + dz * dz <= r2)
        members = cand[insph] if sphere else cand[incyl]
        cnt = len(members)
        pts = xyz[members]
        z = pts[:, 2]
        out[t, 7] = insph.sum() / incyl.sum()
        zr = z.max() - z.min()
        out[t, 8] = zr
        zrank = np.count_nonzero(z < cz) + (np.count_nonzero(z == cz) + 1.0) / 2.0
        out[t, 9] = zrank
        out[t, 10] = (zrank - 1.0) / (cnt - 1.0) * zr if cnt > 1 else 0.0
        out[t, 11] = cnt / (math.pi * r2)
        if cnt < 3:
            out[t, :7] = np.nan
            flags[t, :7] = DEGENERATE
        else:
            dev = pts - pts.mean(axis=0)
            tensors[t] = dev.T @ dev / (cnt - 1.0)
            has_tensor[t] = True
        if cnt < 2:
            out[t, 12] = np.nan
            flags[t, 12] = DEGENERATE
        else:
            diff = pts[:, None, :] - pts[None, :, :]
            d = np.einsum("ijk,ijk->ij", diff, diff)
            np.fill_diagonal(d, np.inf)
            out[t, 12] = np.sqrt(d.min(axis=1)).sum() / cnt
    if has_tensor.any():
        rows = np.flatnonzero(has_tensor)
        w, V, _ = eig3_batch(tensors[rows])
        for t, lam, vec in zip(rows.tolist(), w, V):
            out[t, :7], flags[t, :7] = _tensor_row(lam, vec)
    return out, flags


def _tensor_row(lam: np.ndarray, vec: np.ndarray):
    row = np.full(7, np.nan)
    fl = np.zeros(7, dtype=np.uint8)
    l1, l2, l3 = lam
    if l1 <= 0.0:
        fl[:] = DEGENERATE
        return row, fl
    row[0] = (l1 - l2) / l1
    row[1] = (l2 - l3) / l1
    row[2] = np.cbrt(l1 * l2 * l3)
    if l2 <= 1e-12 * l1:
        fl[3:7] = DEGENERATE
        return row, fl
    row[3:6] = _orient(vec[2])
    row[6] = math.sqrt(l3)
    return row, fl


# ------------------------------------------------------------------ CART

def _gini_mass(W: np.ndarray, cls: np.ndarray) -> np.ndarray:
    s = cls[:, 0] * cls[:, 0]
    for c in range(1, cls.shape[1]):
        s = s + cls[:, c] * cls[:, c]
    with np.errstate(invalid="ignore", divide="ignore"):
        g = W - s / W
    return np.where(W <= 0.0, 0.0, g)


def best_split(X, y, w, order, start, end, nclass):
    """Best Gini split over all features of one node (see compiled twin)."""
    best = (-1, 0.0, -1.0, 0.0)
    for f in range(X.shape[0]):
        s, e = int(start[f]), int(end[f])
        if e - s < 2:
            continue
        rows = order[f, s:e]
        vals = X[f, rows]
        onehot = np.zeros((e - s, nclass))
        onehot[np.arange(e - s), y[rows]] = w[rows]
        cum = np.cumsum(onehot, axis=0)
        cumw = np.cumsum(w[rows])
        tot = cum[-1]
        Wt = cumw[-1]
        gp = _gini_mass(np.array([Wt]), tot[None, :])[0]
        cand = np.flatnonzero(vals[:-1] < vals[1:])
        if len(cand) == 0:
            continue
        left = cum[cand]
        WL = cumw[cand]
        right = tot[None, :] - left
        WR = Wt - WL
        gain = (gp - _gini_mass(WL, left)) - _gini_mass(WR, right)
        j = int(np.argmax(gain))
        if gain[j] > best[2]:
            a, b = vals[cand[j]], vals[cand[j] + 1]
            thr = (a + b) / 2.0
            if not thr < b:
                thr = a
            best = (f, float(thr), float(gain[j]), float(gp))
    return best


def partition(order, start, end, goes_left):
    """Stable in-place partition of every feature segment into left|right."""
    nf = order.shape[0]
    nleft = np.zeros(nf, dtype=np.int64)
    for f in range(nf):
        s, e = int(start[f]), int(end[f])
        seg = order[f, s:e]
        mask = goes_left[seg] == 1
        nl = int(mask.sum())
        order[f, s:e] = np.concatenate([seg[mask], seg[~mask]])
        nleft[f] = nl
    return nleft


def surrogate_scan(X, w, order, start, end, direction):
    """Best single-threshold imitation of a primary split for each feature."""
    nf = X.shape[0]
    thr = np.zeros(nf)
    sense = np.zeros(nf, dtype=np.int64)
    agree = np.zeros(nf)
    total = np.zeros(nf)
    major = np.zeros(nf)
    for f in range(nf):
        s, e = int(start[f]), int(end[f])
        rows = order[f, s:e]
        d = direction[rows]
        rows = rows[d >= 0]
        d = d[d >= 0]
        wl = np.where(d == 1, w[rows], 0.0)
        wr = np.where(d == 0, w[rows], 0.0)
        WL = float(np.cumsum(wl)[-1]) if len(wl) else 0.0
        WR = float(np.cumsum(wr)[-1]) if len(wr) else 0.0
        total[f] = WL + WR
        major[f] = WL if WL >= WR else WR
        if len(rows) < 2:
            continue
        vals = X[f, rows]
        cl = np.cumsum(wl)[:-1]
        cr = np.cumsum(wr)[:-1]
        cand = np.flatnonzero(vals[:-1] < vals[1:])
        if len(cand) == 0:
            continue
        fwd = cl[cand] + (WR - cr[cand])
        rev = cr[cand] + (WL - cl[cand])
        # compiled scan visits fwd then rev at each position
        inter = np.empty(2 * len(cand))
        inter[0::2] = fwd
        inter[1::2] = rev
        j = int(np.argmax(inter))
        if inter[j] <= -1.0:
            continue
        pos = cand[j // 2]
        a, b = vals[pos], vals[pos + 1]
        t = (a + b) / 2.0
        if not t < b:
            t = a
        thr[f] = t
        sense[f] = 1 if j % 2 == 0 else -1
        agree[f] = inter[j] if inter[j] > 0.0 else 0.0
    return thr, sense, agree, total, major
