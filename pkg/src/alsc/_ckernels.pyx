# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  Mirrors ``_pykernels`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cbrt, acos, cos, fabs, floor, M_PI, NAN
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF NFEAT = 13
DEF F_LIN = 0
DEF F_PLA = 1
DEF F_OMN = 2
DEF F_NX = 3
DEF F_NY = 4
DEF F_NZ = 5
DEF F_NSIG = 6
DEF F_ER = 7
DEF F_ZRANGE = 8
DEF F_ZRANK = 9
DEF F_NZED = 10
DEF F_DENS = 11
DEF F_PDIST = 12

DEF OK = 0
DEF DEGENERATE = 1

BACKEND = "compiled"


# ---------------------------------------------------------------- eigen 3x3

cdef inline void _cross(double* a, double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _dot(double* a, double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef int _null_vector(double* m, double lam, double* out) noexcept nogil:
    # eigenvector of symmetric m for eigenvalue lam, from the largest
    # cross product of rows of (m - lam I)
    cdef double r0[3]
    cdef double r1[3]
    cdef double r2[3]
    cdef double c[3]
    cdef double best = 0.0, nrm
    cdef int k
    r0[0] = m[0] - lam; r0[1] = m[1]; r0[2] = m[2]
    r1[0] = m[3]; r1[1] = m[4] - lam; r1[2] = m[5]
    r2[0] = m[6]; r2[1] = m[7]; r2[2] = m[8] - lam
    _cross(r0, r1, c)
    nrm = _dot(c, c)
    if nrm > best:
        best = nrm
        out[0] = c[0]; out[1] = c[1]; out[2] = c[2]
    _cross(r0, r2, c)
    nrm = _dot(c, c)
    if nrm > best:
        best = nrm
        out[0] = c[0]; out[1] = c[1]; out[2] = c[2]
    _cross(r1, r2, c)
    nrm = _dot(c, c)
    if nrm > best:
        best = nrm
        out[0] = c[0]; out[1] = c[1]; out[2] = c[2]
    if best <= 0.0:
        return 0
    nrm = sqrt(best)
    for k in range(3):
        out[k] /= nrm
    return 1


cdef double _residual(double* m, double lam, double* v) noexcept nogil:
    cdef double s = 0.0, d
    cdef int i
    for i in range(3):
        d = m[3 * i] * v[0] + m[3 * i + 1] * v[1] + m[3 * i + 2] * v[2] - lam * v[i]
        s += d * d
    return sqrt(s)


cdef void _jacobi(double* m, double* w, double* V) noexcept nogil:
    # cyclic Jacobi; V[3*i + k] is component k of eigenvector i
    cdef double a[9]
    cdef double v[9]
    cdef int i, j, k, p, q, sweep
    cdef double off, theta, t, c, s, tau, apq, app, aqq, g, h
    for i in range(9):
        a[i] = m[i]
        v[i] = 0.0
    v[0] = 1.0; v[4] = 1.0; v[8] = 1.0
    for sweep in range(60):
        off = a[1] * a[1] + a[2] * a[2] + a[5] * a[5]
        if off == 0.0 or off <= 1e-44 * (a[0] * a[0] + a[4] * a[4] + a[8] * a[8]):
            break
        for p in range(2):
            for q in range(p + 1, 3):
                apq = a[3 * p + q]
                if apq == 0.0:
                    continue
                app = a[3 * p + p]
                aqq = a[3 * q + q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[3 * p + p] = app - t * apq
                a[3 * q + q] = aqq + t * apq
                a[3 * p + q] = 0.0
                a[3 * q + p] = 0.0
                for k in range(3):
                    if k != p and k != q:
                        g = a[3 * k + p]
                        h = a[3 * k + q]
                        a[3 * k + p] = g - s * (h + g * tau)
                        a[3 * p + k] = a[3 * k + p]
                        a[3 * k + q] = h + s * (g - h * tau)
                        a[3 * q + k] = a[3 * k + q]
                for k in range(3):
                    g = v[3 * k + p]
                    h = v[3 * k + q]
                    v[3 * k + p] = g - s * (h + g * tau)
                    v[3 * k + q] = h + s * (g - h * tau)
    for i in range(3):
        w[i] = a[3 * i + i]
        for k in range(3):
            V[3 * i + k] = v[3 * k + i]


cdef void _sort_and_sign(double* w, double* V) noexcept nogil:
    cdef int i, j, k, big
    cdef double tmp, mag
    # descending insertion sort on 3 entries
    for i in range(1, 3):
        j = i
        while j > 0 and w[j] > w[j - 1]:
            tmp = w[j]; w[j] = w[j - 1]; w[j - 1] = tmp
            for k in range(3):
                tmp = V[3 * j + k]; V[3 * j + k] = V[3 * (j - 1) + k]; V[3 * (j - 1) + k] = tmp
            j -= 1
    for i in range(3):
        if w[i] < 0.0:
            w[i] = 0.0
        big = 0
        mag = fabs(V[3 * i])
        for k in range(1, 3):
            if fabs(V[3 * i + k]) > mag:
                mag = fabs(V[3 * i + k])
                big = k
        if V[3 * i + big] < 0.0:
            for k in range(3):
                V[3 * i + k] = -V[3 * i + k]


cdef int eig3(double* m, double* w, double* V) noexcept nogil:
    """Eigen-decomposition of symmetric row-major ``m``.

    Returns 1 when the closed form was accepted, 0 when Jacobi was used.
    """
    cdef double p1, q, p2, p, r, phi, b00, b11, b22, detb, scale, tol
    cdef double e1[3]
    cdef double e3[3]
    cdef double e2[3]
    cdef double nrm
    cdef int k
    p1 = m[1] * m[1] + m[2] * m[2] + m[5] * m[5]
    q = (m[0] + m[4] + m[8]) / 3.0
    b00 = m[0] - q
    b11 = m[4] - q
    b22 = m[8] - q
    p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * p1
    if p2 == 0.0:
        w[0] = q; w[1] = q; w[2] = q
        for k in range(9):
            V[k] = 0.0
        V[0] = 1.0; V[4] = 1.0; V[8] = 1.0
        _sort_and_sign(w, V)
        return 1
    p = sqrt(p2 / 6.0)
    detb = (b00 * (b11 * b22 - m[5] * m[5])
            - m[1] * (m[1] * b22 - m[5] * m[2])
            + m[2] * (m[1] * m[5] - b11 * m[2]))
    r = detb / (2.0 * p * p * p)
    if r <= -1.0:
        phi = M_PI / 3.0
    elif r >= 1.0:
        phi = 0.0
    else:
        phi = acos(r) / 3.0
    w[0] = q + 2.0 * p * cos(phi)
    w[2] = q + 2.0 * p * cos(phi + 2.0 * M_PI / 3.0)
    w[1] = 3.0 * q - w[0] - w[2]
    scale = fabs(w[0])
    if fabs(w[2]) > scale:
        scale = fabs(w[2])
    if scale < 1.0:
        scale = 1.0
    tol = 1e-12 * scale
    if (_null_vector(m, w[0], e1) and _null_vector(m, w[2], e3)
            and fabs(_dot(e1, e3)) <= 1e-12):
        _cross(e3, e1, e2)
        nrm = sqrt(_dot(e2, e2))
        if nrm > 0.0:
            for k in range(3):
                e2[k] /= nrm
            if (_residual(m, w[0], e1) <= tol and _residual(m, w[1], e2) <= tol
                    and _residual(m, w[2], e3) <= tol):
                for k in range(3):
                    V[k] = e1[k]
                    V[3 + k] = e2[k]
                    V[6 + k] = e3[k]
                _sort_and_sign(w, V)
                return 1
    _jacobi(m, w, V)
    _sort_and_sign(w, V)
    return 0


def eig3_batch(const double[:, :, ::1] T):
    """Eigenvalues (descending) and eigenvectors (rows) for a stack of 3x3."""
    cdef Py_ssize_t n = T.shape[0], i
    cdef int a, b
    cdef double m[9]
    vals_arr = np.empty((n, 3), dtype=np.float64)
    vecs_arr = np.empty((n, 3, 3), dtype=np.float64)
    closed_arr = np.empty(n, dtype=np.uint8)
    cdef double[:, ::1] vals = vals_arr
    cdef double[:, :, ::1] vecs = vecs_arr
    cdef unsigned char[::1] closed = closed_arr
    with nogil:
        for i in range(n):
            for a in range(3):
                for b in range(3):
                    m[3 * a + b] = T[i, a, b]
            closed[i] = eig3(m, &vals[i, 0], &vecs[i, 0, 0])
    return vals_arr, vecs_arr, closed_arr.astype(bool)


# ------------------------------------------------------------- grid search

cdef inline void _cell_range(double c, double r, double origin, double cell,
                             Py_ssize_t ncell, Py_ssize_t* lo, Py_ssize_t* hi) noexcept nogil:
    cdef double a = floor((c - r - origin) / cell)
    cdef double b = floor((c + r - origin) / cell)
    if a < 0:
        a = 0
    if b > ncell - 1:
        b = ncell - 1
    lo[0] = <Py_ssize_t>a
    hi[0] = <Py_ssize_t>b


def knn_table(const double[:, ::1] xyz, const long[::1] order, const long[::1] cell_start,
              double x0, double y0, double cell, Py_ssize_t nx, Py_ssize_t ny,
              Py_ssize_t k):
    """k nearest other points of every point, ties by ascending id.

    Returns ``(ids, d2)``; rows are padded with -1 / inf when the cloud has
    fewer than ``k + 1`` points.
    """
    cdef Py_ssize_t n = xyz.shape[0]
    ids_arr = np.full((n, k), -1, dtype=np.int64)
    d2_arr = np.full((n, k), np.inf, dtype=np.float64)
    cdef long[:, ::1] ids = ids_arr
    cdef double[:, ::1] d2 = d2_arr
    cdef Py_ssize_t i, j, jj, ix, iy, ix0, ix1, iy0, iy1, cid, level, filled, pos
    cdef Py_ssize_t cix, ciy
    cdef double cx, cy, cz, dx, dy, dz, dd, reach, wx0, wx1, wy0, wy1, t
    cdef Py_ssize_t maxlevel = nx if nx > ny else ny
    cdef long* bid = <long*>malloc(k * sizeof(long))
    cdef double* bd = <double*>malloc(k * sizeof(double))
    if k == 0 or n == 0:
        free(bid); free(bd)
        return ids_arr, d2_arr
    with nogil:
        for i in range(n):
            cx = xyz[i, 0]; cy = xyz[i, 1]; cz = xyz[i, 2]
            cix = <Py_ssize_t>floor((cx - x0) / cell)
            ciy = <Py_ssize_t>floor((cy - y0) / cell)
            if cix < 0: cix = 0
            if cix > nx - 1: cix = nx - 1
            if ciy < 0: ciy = 0
            if ciy > ny - 1: ciy = ny - 1
            level = 1
            while True:
                filled = 0
                ix0 = cix - level
                ix1 = cix + level
                iy0 = ciy - level
                iy1 = ciy + level
                # distance from the query to the window border
                wx0 = cx - (x0 + ix0 * cell)
                wx1 = (x0 + (ix1 + 1) * cell) - cx
                wy0 = cy - (y0 + iy0 * cell)
                wy1 = (y0 + (iy1 + 1) * cell) - cy
                reach = wx0
                if wx1 < reach: reach = wx1
                if wy0 < reach: reach = wy0
                if wy1 < reach: reach = wy1
                if ix0 < 0: ix0 = 0
                if iy0 < 0: iy0 = 0
                if ix1 > nx - 1: ix1 = nx - 1
                if iy1 > ny - 1: iy1 = ny - 1
                for iy in range(iy0, iy1 + 1):
                    for ix in range(ix0, ix1 + 1):
                        cid = iy * nx + ix
                        for jj in range(cell_start[cid], cell_start[cid + 1]):
                            j = order[jj]
                            if j == i:
                                continue
                            dx = xyz[j, 0] - cx
                            dy = xyz[j, 1] - cy
                            dz = xyz[j, 2] - cz
                            dd = dx * dx + dy * dy + dz * dz
                            if filled == k and (dd > bd[k - 1] or (dd == bd[k - 1] and j > bid[k - 1])):
                                continue
                            if filled < k:
                                pos = filled
                                filled += 1
                            else:
                                pos = k - 1
                            while pos > 0 and (bd[pos - 1] > dd or (bd[pos - 1] == dd and bid[pos - 1] > j)):
                                bd[pos] = bd[pos - 1]
                                bid[pos] = bid[pos - 1]
                                pos -= 1
                            bd[pos] = dd
                            bid[pos] = j
                if level >= maxlevel or (filled == k and bd[k - 1] <= reach * reach):
                    break
                level += 1
            for jj in range(filled):
                ids[i, jj] = bid[jj]
                d2[i, jj] = bd[jj]
    free(bid)
    free(bd)
    return ids_arr, d2_arr


def neighborhood_features(const double[:, ::1] xyz, const long[::1] order, const long[::1] cell_start,
                          double x0, double y0, double cell, Py_ssize_t nx, Py_ssize_t ny,
                          const long[:, ::1] knn_ids, const long[::1] centers, double radius,
                          bint sphere):
    """All 13 neighborhood features for ``centers`` at one radius.

    The neighborhood is the cylinder (or sphere) of ``radius`` around each
    center; the echo ratio always compares sphere and cylinder counts.
    """
    cdef Py_ssize_t n = xyz.shape[0], m = centers.shape[0], kk = knn_ids.shape[1]
    out_arr = np.empty((m, NFEAT), dtype=np.float64)
    flag_arr = np.zeros((m, NFEAT), dtype=np.uint8)
    cdef double[:, ::1] out = out_arr
    cdef unsigned char[:, ::1] flags = flag_arr
    cdef long* members = <long*>malloc((n + 1) * sizeof(long))
    cdef long* stamp = <long*>malloc((n + 1) * sizeof(long))
    cdef Py_ssize_t t, i, j, jj, a, b, ix, iy, ix0, ix1, iy0, iy1, cid, cnt, ncyl, nsph
    cdef Py_ssize_t nless, nequal, found
    cdef double cx, cy, cz, dx, dy, dz, dd2, dd3, r2 = radius * radius
    cdef double sx, sy, sz, mx, my, mz, zmin, zmax, zrank, zr
    cdef double c00, c01, c02, c11, c12, c22, px, py, pz, inv
    cdef double tens[9]
    cdef double w[3]
    cdef double V[9]
    cdef double nnsum, best, d, ex, ey, ez
    if members == NULL or stamp == NULL:
        free(members); free(stamp)
        raise MemoryError()
    for i in range(n):
        stamp[i] = -1
    with nogil:
        for t in range(m):
            i = centers[t]
            cx = xyz[i, 0]; cy = xyz[i, 1]; cz = xyz[i, 2]
            _cell_range(cx, radius, x0, cell, nx, &ix0, &ix1)
            _cell_range(cy, radius, y0, cell, ny, &iy0, &iy1)
            cnt = 0
            ncyl = 0
            nsph = 0
            for iy in range(iy0, iy1 + 1):
                for ix in range(ix0, ix1 + 1):
                    cid = iy * nx + ix
                    for jj in range(cell_start[cid], cell_start[cid + 1]):
                        j = order[jj]
                        dx = xyz[j, 0] - cx
                        dy = xyz[j, 1] - cy
                        dd2 = dx * dx + dy * dy
                        if dd2 <= r2:
                            ncyl += 1
                            dz = xyz[j, 2] - cz
                            dd3 = dd2 + dz * dz
                            if dd3 <= r2:
                                nsph += 1
                                if sphere:
                                    members[cnt] = j
                                    cnt += 1
                            if not sphere:
                                members[cnt] = j
                                cnt += 1
            for a in range(cnt):
                stamp[members[a]] = t
            # centroid and height statistics
            sx = 0.0; sy = 0.0; sz = 0.0
            zmin = cz; zmax = cz
            nless = 0; nequal = 0
            for a in range(cnt):
                j = members[a]
                sx += xyz[j, 0]; sy += xyz[j, 1]; sz += xyz[j, 2]
                if xyz[j, 2] < zmin: zmin = xyz[j, 2]
                if xyz[j, 2] > zmax: zmax = xyz[j, 2]
                if xyz[j, 2] < cz:
                    nless += 1
                elif xyz[j, 2] == cz:
                    nequal += 1
            out[t, F_ER] = (<double>nsph) / (<double>ncyl)
            zr = zmax - zmin
            out[t, F_ZRANGE] = zr
            zrank = nless + (nequal + 1.0) / 2.0
            out[t, F_ZRANK] = zrank
            if cnt > 1:
                out[t, F_NZED] = (zrank - 1.0) / (cnt - 1.0) * zr
            else:
                out[t, F_NZED] = 0.0
            out[t, F_DENS] = cnt / (M_PI * r2)
            # structure tensor
            if cnt < 3:
                for a in range(7):
                    out[t, a] = NAN
                    flags[t, a] = DEGENERATE
            else:
                mx = sx / cnt; my = sy / cnt; mz = sz / cnt
                c00 = 0.0; c01 = 0.0; c02 = 0.0; c11 = 0.0; c12 = 0.0; c22 = 0.0
                for a in range(cnt):
                    j = members[a]
                    px = xyz[j, 0] - mx; py = xyz[j, 1] - my; pz = xyz[j, 2] - mz
                    c00 += px * px; c01 += px * py; c02 += px * pz
                    c11 += py * py; c12 += py * pz; c22 += pz * pz
                inv = 1.0 / (cnt - 1.0)
                tens[0] = c00 * inv; tens[1] = c01 * inv; tens[2] = c02 * inv
                tens[3] = tens[1]; tens[4] = c11 * inv; tens[5] = c12 * inv
                tens[6] = tens[2]; tens[7] = tens[5]; tens[8] = c22 * inv
                eig3(tens, w, V)
                _tensor_row(w, V, &out[t, 0], &flags[t, 0])
            # mean nearest-neighbour distance inside the neighborhood
            if cnt < 2:
                out[t, F_PDIST] = NAN
                flags[t, F_PDIST] = DEGENERATE
            else:
                nnsum = 0.0
                for a in range(cnt):
                    j = members[a]
                    found = 0
                    for b in range(kk):
                        jj = knn_ids[j, b]
                        if jj < 0:
                            break
                        if stamp[jj] == t:
                            ex = xyz[jj, 0] - xyz[j, 0]
                            ey = xyz[jj, 1] - xyz[j, 1]
                            ez = xyz[jj, 2] - xyz[j, 2]
                            nnsum += sqrt(ex * ex + ey * ey + ez * ez)
                            found = 1
                            break
                    if not found:
                        best = -1.0
                        for b in range(cnt):
                            jj = members[b]
                            if jj == j:
                                continue
                            ex = xyz[jj, 0] - xyz[j, 0]
                            ey = xyz[jj, 1] - xyz[j, 1]
                            ez = xyz[jj, 2] - xyz[j, 2]
                            d = ex * ex + ey * ey + ez * ez
                            if best < 0.0 or d < best:
                                best = d
                        nnsum += sqrt(best)
                out[t, F_PDIST] = nnsum / cnt
    free(members)
    free(stamp)
    return out_arr, flag_arr


cdef void _tensor_row(double* w, double* V, double* row, unsigned char* flags) noexcept nogil:
    cdef double l1 = w[0], l2 = w[1], l3 = w[2]
    cdef double nx = V[6], ny = V[7], nz = V[8]
    cdef int a
    if l1 <= 0.0:
        for a in range(7):
            row[a] = NAN
            flags[a] = DEGENERATE
        return
    row[F_LIN] = (l1 - l2) / l1
    row[F_PLA] = (l2 - l3) / l1
    row[F_OMN] = cbrt(l1 * l2 * l3)
    if l2 <= 1e-12 * l1:
        # collinear neighborhood: no plane, no normal
        for a in range(F_NX, F_NSIG + 1):
            row[a] = NAN
            flags[a] = DEGENERATE
        return
    if nz < 0.0 or (nz == 0.0 and (nx < 0.0 or (nx == 0.0 and ny < 0.0))):
        nx = -nx; ny = -ny; nz = -nz
    row[F_NX] = nx
    row[F_NY] = ny
    row[F_NZ] = nz
    row[F_NSIG] = sqrt(l3)


# ------------------------------------------------------------------ CART

cdef inline double _gini_mass(double W, double* cls, Py_ssize_t nc) noexcept nogil:
    # W * (1 - sum f^2) = W - sum c^2 / W
    cdef double s = 0.0
    cdef Py_ssize_t c
    if W <= 0.0:
        return 0.0
    for c in range(nc):
        s += cls[c] * cls[c]
    return W - s / W


def best_split(const double[:, ::1] X, const int[::1] y, const double[::1] w, const int[:, ::1] order,
               long[::1] start, long[::1] end, Py_ssize_t nclass):
    """Best Gini split over all features of one node.

    ``order[f, start[f]:end[f]]`` lists the node's rows with a value for
    feature ``f``, sorted by that value.  Returns ``(feature, threshold,
    gain, parent_mass)`` with feature -1 when no candidate exists; ``gain``
    is the drop in weighted Gini mass among rows with the feature present.
    """
    cdef Py_ssize_t nf = X.shape[0], f, i, s, e, c, r
    cdef double* tot = <double*>malloc(nclass * sizeof(double))
    cdef double* left = <double*>malloc(nclass * sizeof(double))
    cdef double* right = <double*>malloc(nclass * sizeof(double))
    cdef double Wt, WL, WR, gp, gain, a, b, thr
    cdef double best_gain = -1.0, best_thr = 0.0, best_parent = 0.0
    cdef Py_ssize_t best_f = -1
    with nogil:
        for f in range(nf):
            s = start[f]
            e = end[f]
            if e - s < 2:
                continue
            for c in range(nclass):
                tot[c] = 0.0
                left[c] = 0.0
            Wt = 0.0
            for i in range(s, e):
                r = order[f, i]
                tot[y[r]] += w[r]
                Wt += w[r]
            gp = _gini_mass(Wt, tot, nclass)
            WL = 0.0
            for i in range(s, e - 1):
                r = order[f, i]
                left[y[r]] += w[r]
                WL += w[r]
                a = X[f, r]
                b = X[f, order[f, i + 1]]
                if not (a < b):
                    continue
                for c in range(nclass):
                    right[c] = tot[c] - left[c]
                WR = Wt - WL
                gain = (gp - _gini_mass(WL, left, nclass)) - _gini_mass(WR, right, nclass)
                if gain > best_gain:
                    thr = (a + b) / 2.0
                    if not (thr < b):
                        thr = a
                    best_gain = gain
                    best_thr = thr
                    best_f = f
                    best_parent = gp
    free(tot); free(left); free(right)
    return best_f, best_thr, best_gain, best_parent


def partition(int[:, ::1] order, long[::1] start, long[::1] end,
              signed char[::1] goes_left):
    """Stable in-place partition of every feature segment into left|right.

    Rows with ``goes_left[r] == 1`` move to the front.  Returns the per
    feature count of left rows.
    """
    cdef Py_ssize_t nf = order.shape[0], f, i, s, e, nl, nr, r
    cdef Py_ssize_t n = order.shape[1]
    nleft_arr = np.zeros(nf, dtype=np.int64)
    cdef long[::1] nleft = nleft_arr
    cdef int* buf = <int*>malloc((n + 1) * sizeof(int))
    with nogil:
        for f in range(nf):
            s = start[f]
            e = end[f]
            nl = 0
            nr = 0
            for i in range(s, e):
                r = order[f, i]
                if goes_left[r] == 1:
                    order[f, s + nl] = r
                    nl += 1
                else:
                    buf[nr] = r
                    nr += 1
            for i in range(nr):
                order[f, s + nl + i] = buf[i]
            nleft[f] = nl
    free(buf)
    return nleft_arr


def surrogate_scan(const double[:, ::1] X, const double[::1] w, const int[:, ::1] order,
                   long[::1] start, long[::1] end, signed char[::1] direction):
    """Best single-threshold imitation of a primary split for each feature.

    ``direction[r]`` is 1 (primary sends left), 0 (right) or -1 (primary
    value missing; ignored).  Per feature returns threshold, sense (+1:
    ``<=`` goes left, -1: ``<=`` goes right), agreeing weight and total
    weight of rows usable for that feature, and the weight of the primary's
    majority side among those rows.  Sense is 0 when there is no candidate.
    """
    cdef Py_ssize_t nf = X.shape[0], f, i, s, e, r
    thr_arr = np.zeros(nf, dtype=np.float64)
    sense_arr = np.zeros(nf, dtype=np.int64)
    agree_arr = np.zeros(nf, dtype=np.float64)
    total_arr = np.zeros(nf, dtype=np.float64)
    major_arr = np.zeros(nf, dtype=np.float64)
    cdef double[::1] thr = thr_arr
    cdef long[::1] sense = sense_arr
    cdef double[::1] agree = agree_arr
    cdef double[::1] total = total_arr
    cdef double[::1] major = major_arr
    cdef double WL, WR, cl, cr, fwd, rev, best, a, b, t
    cdef Py_ssize_t prev, bsense
    with nogil:
        for f in range(nf):
            s = start[f]
            e = end[f]
            WL = 0.0
            WR = 0.0
            for i in range(s, e):
                r = order[f, i]
                if direction[r] == 1:
                    WL += w[r]
                elif direction[r] == 0:
                    WR += w[r]
            total[f] = WL + WR
            major[f] = WL if WL >= WR else WR
            cl = 0.0
            cr = 0.0
            best = -1.0
            bsense = 0
            prev = -1
            for i in range(s, e):
                r = order[f, i]
                if direction[r] < 0:
                    continue
                if prev >= 0:
                    a = X[f, prev]
                    b = X[f, r]
                    if a < b:
                        fwd = cl + (WR - cr)
                        rev = cr + (WL - cl)
                        if fwd > best:
                            best = fwd
                            bsense = 1
                            t = (a + b) / 2.0
                            if not (t < b):
                                t = a
                            thr[f] = t
                        if rev > best:
                            best = rev
                            bsense = -1
                            t = (a + b) / 2.0
                            if not (t < b):
                                t = a
                            thr[f] = t
                if direction[r] == 1:
                    cl += w[r]
                else:
                    cr += w[r]
                prev = r
            sense[f] = bsense
            agree[f] = best if best > 0.0 else 0.0
    return thr_arr, sense_arr, agree_arr, total_arr, major_arr
