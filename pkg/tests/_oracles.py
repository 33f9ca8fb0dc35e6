"""Slow, literal reference implementations used as test oracles.

Nothing here imports the package's numerical kernels; every oracle works from
first principles (enumeration, Kronecker products, exact rationals).
"""

import itertools
import math
from collections import defaultdict
from fractions import Fraction

import numpy as np


def recursive_transform(x, q):
    """Literal recursion: pair up (x_2k, x_2k+1) -> sums and odds, recurse on both halves."""
    x = [int(v) % q for v in x]
    if len(x) == 1:
        return x
    sums = [(x[2 * k] + x[2 * k + 1]) % q for k in range(len(x) // 2)]
    odds = [x[2 * k + 1] for k in range(len(x) // 2)]
    return recursive_transform(sums, q) + recursive_transform(odds, q)


def kron_matrix(n):
    """B_n K^{(x)n} with the bit reversal done on binary strings."""
    M = np.ones((1, 1), dtype=np.int64)
    for _ in range(n):
        M = np.kron(M, np.array([[1, 1], [0, 1]]))
    perm = [int(format(i, f"0{n}b")[::-1], 2) if n else 0 for i in range(1 << n)]
    return M[perm]


def entropy_bits(p):
    return -sum(v * math.log2(v) for v in p if v > 0)


def norm_entropy(p, q):
    return entropy_bits(p) / math.log2(q)


def minus_oracle(weights, posts):
    """(weights, posteriors) of W-: output pair (y1, y2), input x1 + x2."""
    q = len(posts[0])
    W, P = [], []
    for (w1, p1), (w2, p2) in itertools.product(zip(weights, posts), repeat=2):
        r = [0.0] * q
        for a in range(q):
            for b in range(q):
                r[(a + b) % q] += p1[a] * p2[b]
        W.append(w1 * w2)
        P.append(r)
    return W, P


def plus_oracle(weights, posts):
    """(weights, posteriors) of W+: output (y1, y2, x1 + x2), input x2."""
    q = len(posts[0])
    W, P = [], []
    for (w1, p1), (w2, p2) in itertools.product(zip(weights, posts), repeat=2):
        for u in range(q):
            r = [p1[(u - b) % q] * p2[b] for b in range(q)]
            s = sum(r)
            if s > 0:
                W.append(w1 * w2 * s)
                P.append([v / s for v in r])
    return W, P


def channel_entropy_oracle(weights, posts):
    q = len(posts[0])
    return sum(w * norm_entropy(p, q) for w, p in zip(weights, posts))


def z_by_d_oracle(weights, posts):
    q = len(posts[0])
    return [sum(w * math.sqrt(p[x] * p[(x + d) % q]) for w, p in zip(weights, posts) for x in range(q))
            for d in range(1, q)]


def index_stats_brute(weights, posts, n):
    """H(U_i | U_<i, Y) (normalized) and Z_max for every i by enumerating (x, y)."""
    q = len(posts[0])
    N = 1 << n
    k = len(weights)
    joint = []
    for xs in itertools.product(range(q), repeat=N):
        u = tuple(recursive_transform(xs, q))
        for ys in itertools.product(range(k), repeat=N):
            pr = 1.0
            for x, y in zip(xs, ys):
                pr *= weights[y] * posts[y][x]
            if pr > 0:
                joint.append((u, ys, pr))
    hs, zs = [], []
    for i in range(N):
        groups = defaultdict(lambda: [0.0] * q)
        for u, ys, pr in joint:
            groups[(u[:i], ys)][u[i]] += pr
        h = 0.0
        z = [0.0] * (q - 1)
        for vec in groups.values():
            tot = sum(vec)
            h += tot * norm_entropy([v / tot for v in vec], q)
            for d in range(1, q):
                z[d - 1] += sum(math.sqrt(vec[a] * vec[(a + d) % q]) for a in range(q))
        hs.append(h)
        zs.append(max(z))
    return hs, zs


def sc_oracle(payload, y_atoms, frozen, posts, q, n, tie=1e-12):
    """Sequential ML over exact rationals: at each free index pick the symbol maximizing
    Pr[U_i = a, U_<i = decided | Y]. Scores within a relative 1e-12 of the maximum are
    treated as tied and the smallest symbol wins."""
    N = 1 << n
    P = [[Fraction(float(v)) for v in row] for row in posts]
    words = list(itertools.product(range(q), repeat=N))
    probs = []
    for xs in words:
        t = Fraction(1)
        for j in range(N):
            t *= P[y_atoms[j]][xs[j]]
        probs.append(t)
    U = [recursive_transform(xs, q) for xs in words]
    fixed = dict(zip(frozen, payload))
    alive = list(range(len(words)))
    out = []
    for i in range(N):
        if i in fixed:
            v = int(fixed[i])
        else:
            score = [sum((probs[r] for r in alive if U[r][i] == a), Fraction(0)) for a in range(q)]
            top = max(score)
            v = next(a for a in range(q) if score[a] >= top * Fraction(1 - tie))
        out.append(v)
        alive = [r for r in alive if U[r][i] == v]
    return out
