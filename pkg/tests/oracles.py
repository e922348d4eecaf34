"""Independent reference implementations used by the tests.

Nothing here imports the package's numeric code: neighbor sets come from
exhaustive scans, spectra from LAPACK, plane normals from an SVD or from
the normal equations of ``z = a x + b y + c``.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------- neighbors

def cylinder(xyz, center, r):
    d2 = (xyz[:, 0] - center[0]) ** 2 + (xyz[:, 1] - center[1]) ** 2
    return np.flatnonzero(d2 <= r * r)


def sphere(xyz, center, r):
    d2 = ((xyz - np.asarray(center)[:3]) ** 2).sum(axis=1)
    return np.flatnonzero(d2 <= r * r)


def knn(xyz, center, k):
    d2 = ((xyz - np.asarray(center)[:3]) ** 2).sum(axis=1)
    return np.lexsort((np.arange(len(xyz)), d2))[:k]


# ---------------------------------------------------------------- geometry

def tensor(pts):
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    if n < 2:
        return np.zeros((3, 3))
    d = pts - pts.mean(axis=0)
    return d.T @ d / (n - 1)


def spectrum(T):
    """Eigenvalues, descending, clamped at zero."""
    w = np.linalg.eigvalsh(np.asarray(T, dtype=float))[::-1]
    return np.maximum(w, 0.0)


def cubic_roots(T):
    """Eigenvalues from the characteristic polynomial (trigonometric form)."""
    T = np.asarray(T, dtype=float)
    q = np.trace(T) / 3.0
    B = T - q * np.eye(3)
    p = math.sqrt(max(np.sum(B * B) / 6.0, 0.0))
    if p == 0.0:
        return np.array([q, q, q])
    r = np.linalg.det(B / p) / 2.0
    phi = math.acos(min(1.0, max(-1.0, r))) / 3.0
    l1 = q + 2 * p * math.cos(phi)
    l3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    return np.array([l1, 3 * q - l1 - l3, l3])


def svd_normal(pts):
    """Orthogonal least-squares plane normal, oriented up."""
    d = np.asarray(pts, dtype=float)
    d = d - d.mean(axis=0)
    n = np.linalg.svd(d, full_matrices=False)[2][-1]
    return n if n[2] >= 0 else -n


def normal_equations_normal(pts):
    """Normal of the plane z = a x + b y + c fitted by the normal equations."""
    pts = np.asarray(pts, dtype=float)
    A = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
    a, b, _ = np.linalg.solve(A.T @ A, A.T @ pts[:, 2])
    n = np.array([-a, -b, 1.0])
    return n / np.linalg.norm(n)


def null_normal(T, lam3):
    """Unit solution of (T - lam3 I) n = 0 as the largest cross product of two rows."""
    A = np.asarray(T, dtype=float) - lam3 * np.eye(3)
    cands = [np.cross(A[0], A[1]), np.cross(A[0], A[2]), np.cross(A[1], A[2])]
    n = max(cands, key=np.linalg.norm)
    n = n / np.linalg.norm(n)
    return n if n[2] >= 0 else -n


def angle(u, v):
    """Angle between two lines (sign ignored), radians."""
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    s = np.linalg.norm(np.cross(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.atan2(s, c)


# ---------------------------------------------------------------- features

def shape_scores(lam):
    l1, l2, l3 = lam
    return {"Linearity": (l1 - l2) / l1, "Planarity": (l2 - l3) / l1,
            "Omnivariance": (l1 * l2 * l3) ** (1.0 / 3.0)}


def height(zs, zq):
    zs = sorted(float(z) for z in zs)
    n = len(zs)
    below = sum(1 for z in zs if z < zq)
    equal = sum(1 for z in zs if z == zq)
    rank = below + (equal + 1) / 2.0
    zr = zs[-1] - zs[0]
    return {"ZRange": zr, "ZRank": rank,
            "NormalizedZ": (rank - 1) / (n - 1) * zr if n > 1 else 0.0}


def mean_nn_distance(pts):
    pts = [tuple(p) for p in pts]
    if len(pts) < 2:
        return math.nan
    total = 0.0
    for i, p in enumerate(pts):
        total += min(math.dist(p, q) for j, q in enumerate(pts) if j != i)
    return total / len(pts)


def row(xyz, i, r):
    """All 13 neighborhood features of point ``i`` with a cylinder of radius ``r``."""
    ids = cylinder(xyz, xyz[i], r)
    pts = xyz[ids]
    lam = spectrum(tensor(pts))
    out = dict.fromkeys(("Linearity", "Planarity", "Omnivariance", "NormalX",
                         "NormalY", "NormalZ", "NormalSigma"), math.nan)
    if lam[0] > 0:
        out.update(shape_scores(lam))
        if lam[1] > 1e-12 * lam[0]:
            n = svd_normal(pts)
            out.update(NormalX=n[0], NormalY=n[1], NormalZ=n[2], NormalSigma=math.sqrt(lam[2]))
    out["EchoRatio"] = len(sphere(xyz, xyz[i], r)) / len(ids)
    out.update(height(pts[:, 2], xyz[i, 2]))
    out["PointDensity"] = len(ids) / (math.pi * r * r)
    out["PointDistance"] = mean_nn_distance(pts)
    return out


def scan_angle_deg(vx, vy, vz):
    return math.degrees(math.atan(math.sqrt(vx * vx + vy * vy) / abs(vz)))


# ---------------------------------------------------------------- learning

def gini(p):
    return 1.0 - sum(float(x) ** 2 for x in p)


def quota(S, k, m):
    s = min(S // 2, k // m)
    return max(s, 1) if S >= 1 else 0


def mcr(M):
    M = np.asarray(M)
    return 1.0 - np.trace(M) / M.sum()


def best_split_exhaustive(X, y, w):
    """(feature, threshold, weighted Gini decrease) over all midpoints."""
    X, y, w = np.asarray(X, float), np.asarray(y), np.asarray(w, float)
    classes = np.unique(y)

    def mass(sel):
        W = w[sel].sum()
        if W == 0:
            return 0.0
        return W * gini([w[sel & (y == c)].sum() / W for c in classes])

    root = mass(np.ones(len(y), bool))
    best = (None, None, 0.0)
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            t = (a + b) / 2.0
            left = X[:, f] <= t
            g = root - mass(left) - mass(~left)
            if g > best[2] + 1e-12:
                best = (f, t, g)
    return best


def decode(genome):
    return [1.0 + 0.5 * (a - 1) for a in genome]


def hillshade_cell(dzdx, dzdy_south, azimuth=315.0, elevation=45.0):
    """Standard shaded-relief formula for one cell (0..255)."""
    zen = math.radians(90 - elevation)
    az = math.radians((360 - azimuth + 90) % 360)
    slope = math.atan(math.hypot(dzdx, dzdy_south))
    aspect = math.atan2(dzdy_south, -dzdx)
    v = math.cos(zen) * math.cos(slope) + math.sin(zen) * math.sin(slope) * math.cos(az - aspect)
    return 255.0 * max(v, 0.0)
