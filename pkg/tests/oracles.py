"""Independent reference implementations used as test oracles.

These are deliberately naive (loops, scalar math, full sorts) and share no
code with the package under test.
"""

from __future__ import annotations

import hashlib
import math


def pairwise_events(points, ids, safety_radius, near_miss_radius):
    out = []
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            d = math.dist(points[a], points[b])
            pair = tuple(sorted((ids[a], ids[b])))
            if d < 2 * safety_radius:
                out.append((pair, "collision"))
            elif d < near_miss_radius:
                out.append((pair, "near_miss"))
    return sorted(out)


def softmax(xs):
    m = max(xs)
    e = [math.exp(x - m) for x in xs]
    s = sum(e)
    return [v / s for v in e]


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def ceil_log2(n):
    k = 0
    while (1 << k) < n:
        k += 1
    return k


def threat(r, d, c, w=(0.5, 0.3, 0.2)):
    return w[0] * r + w[1] * d + w[2] * c


def epsilon(theta, eps_min=0.1, eps_max=1.0):
    return eps_min + (1 - theta) * (eps_max - eps_min)


def l1_clip(g, C):
    n = sum(abs(x) for x in g)
    return list(g) if n <= C else [x * C / n for x in g]


def trimmed_mean(rows, f):
    dim = len(rows[0])
    out = []
    for j in range(dim):
        col = sorted(r[j] for r in rows)
        kept = col[f:len(col) - f]
        out.append(sum(kept) / len(kept))
    return out


def mean(rows):
    dim = len(rows[0])
    return [sum(r[j] for r in rows) / len(rows) for j in range(dim)]


def xor_closest(node_ids, key, k):
    return sorted(node_ids, key=lambda x: x ^ key)[:k]


def nearest_rank(values, pct):
    s = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(s)))
    return s[rank - 1]


def closest_approach(r, u, horizon=math.inf):
    """Time and distance of closest approach for relative position r, velocity u."""
    uu = sum(x * x for x in u)
    t = 0.0 if uu == 0 else max(0.0, -sum(a * b for a, b in zip(r, u)) / uu)
    t = min(t, horizon)
    return t, math.sqrt(sum((a + b * t) ** 2 for a, b in zip(r, u)))


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def loglog_slope(xs, ys):
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx, my = sum(lx) / len(lx), sum(ly) / len(ly)
    num = sum((a - mx) * (b - my) for a, b in zip(lx, ly))
    den = sum((a - mx) ** 2 for a in lx)
    return num / den


def rel_features(nb, ego):
    """One (px,py,pz,vx,vy,vz) neighbour sample relative to one ego sample."""
    dp = [nb[i] - ego[i] for i in range(3)]
    dv = [nb[3 + i] - ego[3 + i] for i in range(3)]
    dist = math.sqrt(sum(x * x for x in dp))
    closing = -sum(a * b for a, b in zip(dp, dv)) / dist if dist > 0 else 0.0
    return [x / 100 for x in dp] + [x / 20 for x in dv] + [dist / 100, closing / 20]


def matvec(M, v):
    return [sum(a * b for a, b in zip(row, v)) for row in M]


def gat_risks(Wq, Wk, w_out, bias, ego_window, nb_windows):
    """Per-neighbour risk for nested-list params and windows (loops only)."""
    T = len(ego_window)
    m = len(nb_windows)
    if m == 0:
        return []
    dk = len(Wq)
    pooled = [[0.0] * dk for _ in range(m)]
    for t in range(T):
        e = ego_window[t]
        h_ego = rel_features(e, list(e[:3]) + [0.0, 0.0, 0.0])
        q = matvec(Wq, h_ego)
        keys = [matvec(Wk, rel_features(nb_windows[j][t], e)) for j in range(m)]
        scores = [sum(a * b for a, b in zip(q, k)) / math.sqrt(dk) for k in keys]
        alpha = softmax(scores)
        for j in range(m):
            for d in range(dk):
                pooled[j][d] += alpha[j] * keys[j][d] / T
    return [sigmoid(sum(a * b for a, b in zip(w_out, p)) + bias) for p in pooled]
