"""Exact channel-tree tracking on symmetry-reduced atom measures.

Every statistic the construction needs (entropy, Z_d, ML error) is unchanged
when one atom's posterior is relabeled by a shift x -> x + b. If the channel
is also invariant under a multiplicative relabeling x -> a x (as the q-ary
symmetric channel is for every unit a), atoms may be stored as orbits of the
affine maps x -> a x + b. Products of two such measures are then enumerated
with one relative orientation per unit, which keeps the exact trees small
enough to follow to the depths used in practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .channel import MERGE_DECIMALS, JointChannel, merge_arrays, ml_error_arrays, z_by_d_arrays
from .dist import entropy_array


def units_of(q):
    return [a for a in range(1, q) if math.gcd(a, q) == 1]


def _relabel_index(q, a):
    """idx such that P[:, idx] is the posterior of a*X when X has posterior P."""
    ainv = pow(a, -1, q)
    return (ainv * np.arange(q)) % q


def _canonicalize(P, group_maps, decimals=MERGE_DECIMALS):
    """Pick for every row the lexicographically largest relabeling in the group."""
    cand = P[:, group_maps]  # (m, G, q)
    key = np.round(np.sqrt(cand), decimals)
    mask = np.ones(cand.shape[:2], dtype=bool)
    for j in range(P.shape[1]):
        vals = np.where(mask, key[:, :, j], -np.inf)
        mask &= vals == vals.max(axis=1, keepdims=True)
    choice = mask.argmax(axis=1)
    return cand[np.arange(P.shape[0]), choice]


def _affine_maps(q, units):
    # row g gives x -> a*x + b, used as P[:, row]
    return np.array([[(a * x + b) % q for x in range(q)] for a in units for b in range(q)])


@dataclass
class OrbitMeasure:
    """Atom measure of a channel modulo the affine relabelings x -> a x + b, a in ``units``."""

    weights: np.ndarray
    reps: np.ndarray
    units: tuple

    @property
    def q(self):
        return self.reps.shape[1]

    @property
    def size(self):
        return self.weights.size

    def entropy(self):
        return float(np.clip(self.weights @ entropy_array(self.reps), 0.0, 1.0))

    def expand(self):
        """A JointChannel with the same statistics (one atom per orientation)."""
        q = self.q
        W = np.concatenate([self.weights / len(self.units)] * len(self.units))
        P = np.concatenate([self.reps[:, _relabel_index(q, a)] for a in self.units])
        W, P = merge_arrays(W, P)
        return JointChannel(W / W.sum(), P)

    def z_by_d(self):
        zrep = z_by_d_arrays(self.weights, self.reps)
        return symmetrize_z(zrep, self.units, self.q)

    def ml_error(self):
        return ml_error_arrays(self.weights, self.reps)


def symmetrize_z(zrep, units, q):
    """Average Z_d over the multiplicative relabelings (index d-1 holds Z_d)."""
    z = np.empty(q - 1)
    for d in range(1, q):
        z[d - 1] = np.mean([zrep[(a * d) % q - 1] for a in units])
    return z


def _reduce(W, P, units):
    q = P.shape[1]
    P = _canonicalize(P, _affine_maps(q, units))
    W, P = merge_arrays(W, P)
    return W, P


def invariant_units(w: JointChannel):
    """Units a for which relabeling the input by x -> a x leaves the channel unchanged.

    Atoms are compared up to shifts, which is all the statistics can see.
    """
    q = w.q
    base_W, base_P = _reduce(w.weights, w.posteriors, [1])
    order = np.lexsort(np.round(base_P, MERGE_DECIMALS - 2).T[::-1])
    base_W, base_P = base_W[order], base_P[order]
    found = [1]
    for a in units_of(q)[1:]:
        W2, P2 = _reduce(w.weights, w.posteriors[:, _relabel_index(q, a)], [1])
        if W2.size != base_W.size:
            continue
        o2 = np.lexsort(np.round(P2, MERGE_DECIMALS - 2).T[::-1])
        if np.allclose(np.sqrt(P2[o2]), np.sqrt(base_P), atol=1e-11, rtol=0) and np.allclose(W2[o2], base_W, atol=1e-13, rtol=0):
            found.append(a)
    return tuple(found)


def to_measure(w: JointChannel, use_symmetry=True) -> OrbitMeasure:
    units = invariant_units(w) if use_symmetry else (1,)
    W, P = _reduce(w.weights, w.posteriors, units)
    return OrbitMeasure(W, P, units)


def _oriented(P, units):
    q = P.shape[1]
    return np.stack([P[:, _relabel_index(q, a)] for a in units])  # (|M|, m, q)


def _shift_index(q):
    return (np.arange(q)[None, :] - np.arange(q)[:, None]) % q


def minus_measure(mu: OrbitMeasure) -> OrbitMeasure:
    q, M = mu.q, len(mu.units)
    PA = _oriented(mu.reps, mu.units)
    Ws, Ps = [], []
    sh = _shift_index(q)
    for i in range(M):
        R = np.einsum("kx,lxu->klu", mu.reps, PA[i][:, sh]).reshape(-1, q)
        R /= R.sum(axis=1, keepdims=True)
        Ws.append(np.outer(mu.weights, mu.weights).reshape(-1) / M)
        Ps.append(R)
    W, P = _reduce(np.concatenate(Ws), np.concatenate(Ps), mu.units)
    return OrbitMeasure(W, P, mu.units)


def plus_measure(mu: OrbitMeasure) -> OrbitMeasure:
    q, M = mu.q, len(mu.units)
    PA = _oriented(mu.reps, mu.units)
    Pk = mu.reps[:, _shift_index(q)]  # Pk[k, x1, u] = p_k(u - x1)
    Ws, Ps = [], []
    for i in range(M):
        J = Pk[:, None, :, :] * PA[i][None, :, :, None]
        J = np.ascontiguousarray(J.transpose(0, 1, 3, 2)).reshape(-1, q)
        m = J.sum(axis=1)
        W = np.repeat(np.outer(mu.weights, mu.weights).reshape(-1), q) * m / M
        keep = m > 0
        Ws.append(W[keep])
        Ps.append(J[keep] / m[keep, None])
    W, P = _reduce(np.concatenate(Ws), np.concatenate(Ps), mu.units)
    return OrbitMeasure(W, P, mu.units)


def child_size_estimate(mu: OrbitMeasure) -> int:
    """Rows produced by the plus step before merging (the larger of the two)."""
    return len(mu.units) * mu.size * mu.size * mu.q


_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_CHUNK = 1024


@numba.njit(cache=True, error_model="numpy", fastmath=True)
def _log_flat(x, out, ibuf, ebuf):
    """Natural log of positive finite x (branch-free, vectorizable, ~3e-16 relative).

    Zero maps to a large negative finite value, so x * log(x) still vanishes.
    """
    xi = x.view(np.int64)
    n = x.size
    for i in range(n):
        b = xi[i]
        ebuf[i] = ((b >> 52) & 0x7FF) - 1023
        ibuf[i] = (b & 0x000FFFFFFFFFFFFF) | 0x3FF0000000000000
    mf = ibuf.view(np.float64)
    for i in range(n):
        m = mf[i]
        big = np.float64(m > 1.4142135623730951)
        m = m * (1.0 - 0.5 * big)
        e = np.float64(ebuf[i]) + big
        s = (m - 1.0) / (m + 1.0)
        z = s * s
        # 2 atanh(s) = 2 s (1 + z/3 + z^2/5 + ...), |s| <= 0.172
        p = 1.0 / 23.0
        p = p * z + 1.0 / 21.0
        p = p * z + 1.0 / 19.0
        p = p * z + 1.0 / 17.0
        p = p * z + 1.0 / 15.0
        p = p * z + 1.0 / 13.0
        p = p * z + 1.0 / 11.0
        p = p * z + 1.0 / 9.0
        p = p * z + 1.0 / 7.0
        p = p * z + 1.0 / 5.0
        p = p * z + 1.0 / 3.0
        p = p * z
        out[i] = e * _LN2_HI + (2.0 * s + (2.0 * s * p + e * _LN2_LO))


@numba.njit(cache=True, error_model="numpy", fastmath=True)
def _minus_stats_kernel(w, P, PAT):
    """Entropy (nats), per-d Bhattacharyya sums and ML error of the minus child.

    ``PAT[a, x, L]`` holds the posterior of atom L under the a-th unit
    relabeling. Pairs (K, L, a) and (L, K, a^-1) give relabelings of one
    another, so only K <= L is visited; the caller symmetrizes Z over the
    units afterwards. Only d <= q/2 is summed since Z_d = Z_{q-d}. The inner
    loops run over L in chunks so they vectorize.
    """
    m, q = P.shape
    M = PAT.shape[0]
    half = q // 2
    CH = _CHUNK
    R = np.empty((q, CH))
    LG = np.empty((q, CH))
    SR = np.empty((q, CH))
    fac = np.empty(CH)
    mx = np.empty(CH)
    nt = np.empty(CH)
    ibuf = np.empty(CH, dtype=np.int64)
    ebuf = np.empty(CH, dtype=np.int64)
    h_tot = 0.0
    pe_tot = 0.0
    z_tot = np.zeros(q)
    z_row = np.zeros(q)
    for K in range(m):
        pk = P[K]
        h_row = 0.0
        pe_row = 0.0
        for d in range(q):
            z_row[d] = 0.0
        for a in range(M):
            for L0 in range(K, m, CH):
                n = min(m, L0 + CH) - L0
                for j in range(n):
                    fac[j] = 2.0 * w[L0 + j] / M
                if L0 == K:
                    fac[0] = w[K] / M
                for u in range(q):
                    r = R[u]
                    for j in range(n):
                        r[j] = 0.0
                    for x in range(q):
                        c = pk[x]
                        src = PAT[a, (u - x) % q]
                        for j in range(n):
                            r[j] += c * src[L0 + j]
                for u in range(q):
                    _log_flat(R[u, :n], LG[u, :n], ibuf[:n], ebuf[:n])
                    for j in range(n):
                        SR[u, j] = math.sqrt(R[u, j])
                for j in range(n):
                    mx[j] = R[0, j]
                for u in range(1, q):
                    for j in range(n):
                        mx[j] = max(mx[j], R[u, j])
                for j in range(n):
                    nt[j] = 0.0
                for u in range(q):
                    for j in range(n):
                        nt[j] += np.float64(R[u, j] >= mx[j] - 1e-12 * mx[j])
                hs = 0.0
                for u in range(q):
                    for j in range(n):
                        hs -= fac[j] * R[u, j] * LG[u, j]
                h_row += hs
                ps = 0.0
                for j in range(n):
                    ps += fac[j] * (1.0 if nt[j] > 1.5 else 1.0 - mx[j])
                pe_row += ps
                for d in range(1, half + 1):
                    zs = 0.0
                    for u in range(q):
                        v = (u + d) % q
                        for j in range(n):
                            zs += fac[j] * SR[u, j] * SR[v, j]
                    z_row[d] += zs
        h_tot += w[K] * h_row
        pe_tot += w[K] * pe_row
        for d in range(q):
            z_tot[d] += w[K] * z_row[d]
    for d in range(half + 1, q):
        z_tot[d] = z_tot[q - d]
    return h_tot, z_tot, pe_tot


def streamed_children_stats(mu: OrbitMeasure, parent_z):
    """Statistics of both children without materializing them.

    The plus child needs no enumeration: H(W+) = 2H(W) - H(W-) and
    Z_d(W+) = Z_d(W)^2 hold exactly.
    """
    q = mu.q
    PAT = np.ascontiguousarray(_oriented(mu.reps, mu.units).transpose(0, 2, 1))
    h_nats, zsum, pe = _minus_stats_kernel(
        np.ascontiguousarray(mu.weights), np.ascontiguousarray(mu.reps), PAT
    )
    h_minus = float(np.clip(h_nats / math.log(q), 0.0, 1.0))
    z_minus = symmetrize_z(zsum[1:], mu.units, q)
    h_plus = float(np.clip(2.0 * mu.entropy() - h_minus, 0.0, 1.0))
    z_plus = np.asarray(parent_z) ** 2
    return (h_minus, z_minus, float(pe)), (h_plus, z_plus, None)
