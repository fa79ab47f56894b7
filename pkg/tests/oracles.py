"""Reference implementations written independently of the package.

They favour obviousness over speed: explicit loops, the ``math`` module and
no shared helpers with ``risrcc``.
"""
import cmath
import math

import numpy as np

C = 299_792_458.0


def rcs_closed_form(area_x, area_y, chi, lam, ti, pi_, tr, pr):
    def sinc(u):
        return 1.0 if u == 0 else math.sin(u) / u

    a = area_x * area_y
    ux = math.pi * area_x / lam * (math.sin(tr) * math.cos(pr) + math.sin(ti) * math.cos(pi_))
    uy = math.pi * area_y / lam * (math.sin(tr) * math.sin(pr) + math.sin(ti) * math.sin(pi_))
    return (4 * math.pi * a * a / (chi * lam * lam) * math.cos(ti) ** 2 * math.cos(tr) ** 2
            * sinc(ux) ** 2 * sinc(uy) ** 2)


def element_grid(rows, cols, spacing):
    """Element centres, row-major, grid centred on the origin."""
    out = []
    for m in range(rows):
        for n in range(cols):
            out.append(((n - (cols - 1) / 2) * spacing, (m - (rows - 1) / 2) * spacing, 0.0))
    return out


def aperture_sum(elements, phases, bs, obs, lam, chi=1.0):
    """Green's-function sum and its coherent amplitude bound."""
    k = 2 * math.pi / lam
    e, bound = 0j, 0.0
    for (x, y, z), psi in zip(elements, phases):
        d1 = math.dist((x, y, z), bs)
        d2 = math.dist((x, y, z), obs)
        e += cmath.exp(1j * psi) / math.sqrt(chi) * cmath.exp(-1j * k * (d1 + d2)) / (d1 * d2)
        bound += 1.0 / (math.sqrt(chi) * d1 * d2)
    return e, bound


def focusing_phases(elements, bs, obs, lam):
    k = 2 * math.pi / lam
    return [(k * (math.dist(p, bs) + math.dist(p, obs))) % (2 * math.pi) for p in elements]


def naive_dbscan(points, eps, min_pts):
    """Textbook DBSCAN with an explicit O(n^2) neighbour scan (self counts as a neighbour)."""
    n = len(points)
    neigh = []
    for i in range(n):
        neigh.append([j for j in range(n) if math.dist(points[i], points[j]) <= eps])
    labels = [None] * n
    c = -1
    for i in range(n):
        if labels[i] is not None:
            continue
        if len(neigh[i]) < min_pts:
            labels[i] = -1
            continue
        c += 1
        labels[i] = c
        seeds = list(neigh[i])
        while seeds:
            j = seeds.pop()
            if labels[j] == -1:
                labels[j] = c
            if labels[j] is not None:
                continue
            labels[j] = c
            if len(neigh[j]) >= min_pts:
                seeds.extend(neigh[j])
    return labels


def core_partition(points, eps, min_pts, labels):
    """Clusters restricted to core points, as a set of frozensets (border ties are order dependent)."""
    n = len(points)
    core = [sum(math.dist(points[i], points[j]) <= eps for j in range(n)) >= min_pts for i in range(n)]
    groups = {}
    for i, l in enumerate(labels):
        if core[i]:
            groups.setdefault(l, set()).add(i)
    return {frozenset(g) for g in groups.values()}, core


def same_partition(a, b):
    """Labels equal up to a relabelling of cluster ids (noise must match exactly)."""
    fwd, back = {}, {}
    for x, y in zip(a, b):
        if (x == -1) != (y == -1):
            return False
        if x == -1:
            continue
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


def radar_mean(tx, rx, x, lam, pos, kappa):
    k = 2 * math.pi / lam
    out = []
    for r in rx:
        s = 0j
        for t, xm in zip(tx, x):
            s += xm * cmath.exp(-1j * k * (math.dist(t, pos) + math.dist(pos, r)))
        out.append(kappa * s)
    return np.array(out)


def fd_fim(tx, rx, x, lam, pos, kappa, sigma2, h=1e-6):
    """FIM from five-point central differences of the mean with frozen amplitude.

    The five-point stencil keeps the truncation error (order h^4 k^5) far below
    the 1e-6 comparison tolerance even at millimetre wavelengths.
    """
    def mu(p):
        return radar_mean(tx, rx, x, lam, p, kappa)

    jac = []
    for i in range(2):
        pts = []
        for m in (2, 1, -1, -2):
            p = list(pos)
            p[i] += m * h
            pts.append(mu(p))
        jac.append((-pts[0] + 8 * pts[1] - 8 * pts[2] + pts[3]) / (12 * h))
    j = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            j[a, b] = 2 / sigma2 * sum((np.conj(jac[a]) * jac[b]).real)
    return j


def scalar_kalman(x, v, p, dt, q, r, z):
    """One predict+update of a 2-state CV filter written out element by element."""
    x1 = x + dt * v
    v1 = v
    p00 = p[0][0] + dt * (p[1][0] + p[0][1]) + dt * dt * p[1][1] + q * dt ** 3 / 3
    p01 = p[0][1] + dt * p[1][1] + q * dt ** 2 / 2
    p10 = p[1][0] + dt * p[1][1] + q * dt ** 2 / 2
    p11 = p[1][1] + q * dt
    s = p00 + r
    k0, k1 = p00 / s, p10 / s
    y = z - x1
    return x1 + k0 * y, v1 + k1 * y, [[(1 - k0) * p00, (1 - k0) * p01], [p10 - k1 * p00, p11 - k1 * p01]]


def moment_k_db(env):
    p = [e * e for e in env]
    m = sum(p) / len(p)
    var = sum((x - m) ** 2 for x in p) / len(p)
    v = var / (m * m)
    s = math.sqrt(1 - v)
    return 10 * math.log10(s / (1 - s))


def rms_spread(delays, powers):
    tot = sum(powers)
    m1 = sum(d * p for d, p in zip(delays, powers)) / tot
    m2 = sum(d * d * p for d, p in zip(delays, powers)) / tot
    return math.sqrt(m2 - m1 * m1)
