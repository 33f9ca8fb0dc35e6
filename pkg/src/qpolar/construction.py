"""Polarized channel trees, per-index statistics and frozen-set selection.

Index convention: the channel seen by U_i at depth n is reached from W by
applying one transform per bit of i, most significant bit first, with bit 0
selecting the minus transform and bit 1 the plus transform. In particular
W_{k+1}^{(2j)} = (W_k^{(j)})^- and W_{k+1}^{(2j+1)} = (W_k^{(j)})^+.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import logsumexp

from . import _tracking
from .channel import (
    JointChannel,
    format_channel,
    minus_transform,
    parse_channel_lines,
    plus_transform,
    sample_joint,
    symmetric_entropy,
    bhattacharyya,
)
from .dist import format_float
from .errors import BudgetExceededError, FormatError, PolarError

DEFAULT_ATOM_BUDGET = 2_000_000
DEFAULT_PAIR_BUDGET = 6_000_000_000
MC_BATCH = 256


@dataclass
class IndexStats:
    """Per-index estimates for the 2**n synthetic channels of one depth."""

    q: int
    n: int
    h: np.ndarray
    z: np.ndarray
    method: str
    channel: JointChannel | None = None
    z_by_d: np.ndarray | None = None
    z_tilde: np.ndarray | None = None
    h_se: np.ndarray | None = None
    z_se: np.ndarray | None = None
    samples: int = 0
    seed: int | None = None
    atom_counts: list = field(default_factory=list)
    channels: list | None = None

    @property
    def N(self):
        return 1 << self.n

    def records(self):
        zt = self.z_tilde if self.z_tilde is not None else [None] * self.N
        return [(i, float(self.h[i]), float(self.z[i]), None if zt[i] is None else float(zt[i]), self.method)
                for i in range(self.N)]

    def digest(self):
        return f"{self.method};{self.samples};{'' if self.seed is None else self.seed}"


# -- exact tracking --------------------------------------------------------------


def _iter_exact_levels(w, n, atom_budget, pair_budget, use_symmetry):
    """Yield (level, entries, max_size) where entries are (measure|None, h, z_by_d)."""
    mu = _tracking.to_measure(w, use_symmetry)
    entries = [(mu, mu.entropy(), mu.z_by_d())]
    yield 0, entries, mu.size
    for level in range(1, n + 1):
        last = level == n
        nxt = []
        biggest = 0
        for parent, h, z in entries:
            est = _tracking.child_size_estimate(parent)
            if est <= atom_budget:
                for child in (_tracking.minus_measure(parent), _tracking.plus_measure(parent)):
                    nxt.append((child, child.entropy(), child.z_by_d()))
                    biggest = max(biggest, child.size)
                continue
            pairs = len(parent.units) * parent.size * (parent.size + 1) // 2
            if not last or pairs > pair_budget:
                raise BudgetExceededError(level, est, atom_budget)
            (hm, zm, _), (hp, zp, _) = _tracking.streamed_children_stats(parent, z)
            nxt.append((None, hm, zm))
            nxt.append((None, hp, zp))
        entries = nxt
        yield level, entries, biggest


def _stats_from_entries(w, n, entries, counts, keep_channels):
    h = np.array([e[1] for e in entries])
    zd = np.array([e[2] for e in entries])
    chans = None
    if keep_channels:
        chans = [None if e[0] is None else e[0].expand() for e in entries]
    return IndexStats(q=w.q, n=n, h=h, z=zd.max(axis=1), method="exact", channel=w,
                      z_by_d=zd, atom_counts=list(counts), channels=chans)


def track_channels_exact(w: JointChannel, n: int, atom_budget: int = DEFAULT_ATOM_BUDGET,
                         keep_channels: bool = False, pair_budget: int = DEFAULT_PAIR_BUDGET,
                         use_symmetry: bool = True) -> IndexStats:
    """Exact H and Z statistics of all 2**n channels W_n^{(i)}.

    Atoms are merged losslessly after every step. ``atom_budget`` caps the
    number of atoms a single transform may produce before merging; the final
    level may instead be evaluated pair by pair (up to ``pair_budget`` pairs)
    without building its channels. Exceeding either raises
    ``BudgetExceededError`` naming the level.
    """
    if n < 0:
        raise PolarError("depth must be nonnegative")
    counts = []
    for level, entries, biggest in _iter_exact_levels(w, n, atom_budget, pair_budget, use_symmetry):
        counts.append(biggest)
    return _stats_from_entries(w, n, entries, counts, keep_channels)


def exact_level_stats(w: JointChannel, n_max: int, atom_budget: int = DEFAULT_ATOM_BUDGET,
                      pair_budget: int = DEFAULT_PAIR_BUDGET, use_symmetry: bool = True) -> list:
    """``track_channels_exact`` for every depth 0..n_max in one pass."""
    out, counts = [], []
    for level, entries, biggest in _iter_exact_levels(w, n_max, atom_budget, pair_budget, use_symmetry):
        counts.append(biggest)
        out.append(_stats_from_entries(w, level, entries, counts, False))
    return out


def synthetic_channel(w: JointChannel, i: int, n: int) -> JointChannel:
    """W_n^{(i)} built literally from the plain transforms (no merging); small n only."""
    ch = w
    for b in range(n - 1, -1, -1):
        ch = plus_transform(ch) if (i >> b) & 1 else minus_transform(ch)
    return ch


# -- Monte Carlo -----------------------------------------------------------------


def _shifted_lse(Le, Lo):
    """log sum_a exp(Le[a] + Lo[u - a]) over the last axis."""
    q = Le.shape[-1]
    idx = (np.arange(q)[None, :] - np.arange(q)[:, None]) % q  # [a, u] -> u - a
    T = Le[..., :, None] + Lo[..., idx]
    return logsumexp(T, axis=-2)


def genie_log_posteriors(loglik, x):
    """Log posteriors of every U_i given the true U_<i and Y, for a batch.

    ``loglik[b, j, :]`` is log Pr[X_j = . | Y_j] for block b and ``x`` holds
    the true inputs. Returns (log posterior array (B, N, q), true u (B, N)).
    Plain numpy reference for the compiled accumulator below.
    """
    B, N, q = loglik.shape
    L = loglik.reshape(B, 1, N, q)
    X = x.reshape(B, 1, N)
    S = 1
    while L.shape[2] > 1:
        Le, Lo = L[:, :, 0::2], L[:, :, 1::2]
        Xe, Xo = X[:, :, 0::2], X[:, :, 1::2]
        s_true = (Xe + Xo) % q
        Lm = _shifted_lse(Le, Lo)
        gather = (s_true[..., None] - np.arange(q)) % q
        Lp = np.take_along_axis(Le, gather, axis=-1) + Lo
        Lm = Lm - Lm.max(axis=-1, keepdims=True)
        Lp = Lp - Lp.max(axis=-1, keepdims=True)
        half = L.shape[2] // 2
        L = np.stack((Lm, Lp), axis=2).reshape(B, 2 * S, half, q)
        X = np.stack((s_true, Xo), axis=2).reshape(B, 2 * S, half)
        S *= 2
    L = L.reshape(B, N, q)
    return L - logsumexp(L, axis=-1, keepdims=True), X.reshape(B, N)


@numba.njit(cache=True, error_model="numpy")
def _minus_node(Ae, Ao, out, ea, eo, q):
    """out[u] = log sum_a exp(Ae[a] + Ao[u - a]), shifted so that max(out) = 0."""
    me = Ae.max()
    mo = Ao.max()
    for u in range(q):
        ea[u] = math.exp(Ae[u] - me)
        eo[u] = math.exp(Ao[u] - mo)
    exact = True
    for u in range(q):
        r = 0.0
        for a in range(q):
            r += ea[a] * eo[(u - a) % q]
        out[u] = r
        if r < 1e-290:
            exact = False
    if exact:
        for u in range(q):
            out[u] = math.log(out[u])
    else:
        # some mass fell below the exp range: redo term by term
        for u in range(q):
            t_max = -np.inf
            for a in range(q):
                t = Ae[a] + Ao[(u - a) % q]
                if t > t_max:
                    t_max = t
            if t_max == -np.inf:
                out[u] = -np.inf
                continue
            acc = 0.0
            for a in range(q):
                acc += math.exp(Ae[a] + Ao[(u - a) % q] - t_max)
            out[u] = t_max + math.log(acc)
    m = out.max()
    for u in range(q):
        out[u] -= m


@numba.njit(cache=True, error_model="numpy")
def _genie_block_prob(LP, X, b, A, Bf, XA, XB, sub, out_h, out_z):
    """Probability-domain genie recursion for block b (messages scaled to max 1).

    Returns False when a true-symbol message underflows to zero, in which
    case the caller falls back to the log-domain recursion.
    """
    N, q = X.shape[1], LP.shape[2]
    for j in range(N):
        XA[j] = X[b, j]
        for u in range(q):
            A[j * q + u] = LP[b, j, u]
    length = N
    while length > 1:
        half = length // 2
        for base in range(0, N, length):
            for j in range(half):
                e = (base + 2 * j) * q
                o = e + q
                xe = XA[base + 2 * j]
                xo = XA[base + 2 * j + 1]
                s = xe + xo
                if s >= q:
                    s -= q
                dm = (base + j) * q
                mx = 0.0
                for u in range(q):
                    r = 0.0
                    for a in range(q):
                        r += A[e + a] * A[o + sub[u, a]]
                    Bf[dm + u] = r
                    if r > mx:
                        mx = r
                inv = 1.0 / mx
                for u in range(q):
                    Bf[dm + u] *= inv
                XB[base + j] = s
                dp = (base + half + j) * q
                mx = 0.0
                for v in range(q):
                    r = A[e + sub[s, v]] * A[o + v]
                    Bf[dp + v] = r
                    if r > mx:
                        mx = r
                inv = 1.0 / mx
                for v in range(q):
                    Bf[dp + v] *= inv
                XB[base + half + j] = xo
                if Bf[dm + s] == 0.0 or Bf[dp + xo] == 0.0:
                    return False
        A, Bf = Bf, A
        XA, XB = XB, XA
        length = half
    lnq = math.log(q)
    for i in range(N):
        u = XA[i]
        tot = 0.0
        for v in range(q):
            tot += A[i * q + v]
        pu = A[i * q + u]
        out_h[i] = math.log(tot / pu) / lnq
        for d in range(1, q):
            v = u + d
            if v >= q:
                v -= q
            out_z[d - 1, i] = math.sqrt(A[i * q + v] / pu)
    return True


@numba.njit(cache=True, error_model="numpy")
def _genie_accumulate(LL, LP, X, acc_h, acc_h2, acc_z, acc_z2):
    """Genie-aided recursion on every block; adds per-index sums of h and z_d.

    LP (B, N, q) holds leaf posteriors, LL their logs, X (B, N) the true
    inputs. A sub-problem of length ``length`` at offset ``base`` sends its
    minus child to [base, base + length/2) and its plus child to the second
    half, so leaf i ends at row i. acc_z[d - 1, i] sums
    sqrt(post(u_i + d) / post(u_i)).
    """
    B, N, q = LL.shape
    A = np.empty(N * q)
    Bf = np.empty(N * q)
    XA = np.empty(N, dtype=np.int64)
    XB = np.empty(N, dtype=np.int64)
    sub = np.empty((q, q), dtype=np.int64)
    for u in range(q):
        for a in range(q):
            sub[u, a] = (u - a) % q
    hs = np.empty(N)
    zs = np.empty((q - 1, N))
    for b in range(B):
        if not _genie_block_prob(LP, X, b, A, Bf, XA, XB, sub, hs, zs):
            _genie_block_log(LL, X, b, hs, zs)
        for i in range(N):
            acc_h[i] += hs[i]
            acc_h2[i] += hs[i] * hs[i]
            for d in range(q - 1):
                acc_z[d, i] += zs[d, i]
                acc_z2[d, i] += zs[d, i] * zs[d, i]


@numba.njit(cache=True, error_model="numpy")
def _genie_block_log(LL, X, b, out_h, out_z):
    """Log-domain genie recursion for block b (exact fallback)."""
    N, q = X.shape[1], LL.shape[2]
    lnq = math.log(q)
    A = np.empty((N, q))
    Bf = np.empty((N, q))
    XA = np.empty(N, dtype=np.int64)
    XB = np.empty(N, dtype=np.int64)
    ea = np.empty(q)
    eo = np.empty(q)
    for j in range(N):
        XA[j] = X[b, j]
        for u in range(q):
            A[j, u] = LL[b, j, u]
    length = N
    while length > 1:
        half = length // 2
        for base in range(0, N, length):
            for j in range(half):
                e = base + 2 * j
                o = e + 1
                s = (XA[e] + XA[o]) % q
                _minus_node(A[e], A[o], Bf[base + j], ea, eo, q)
                XB[base + j] = s
                dst = base + half + j
                m = -np.inf
                for v in range(q):
                    t = A[e, (s - v) % q] + A[o, v]
                    Bf[dst, v] = t
                    if t > m:
                        m = t
                for v in range(q):
                    Bf[dst, v] -= m
                XB[dst] = XA[o]
        A, Bf = Bf, A
        XA, XB = XB, XA
        length = half
    for i in range(N):
        row = A[i]
        m = row.max()
        acc = 0.0
        for v in range(q):
            acc += math.exp(row[v] - m)
        u = XA[i]
        out_h[i] = -(row[u] - m - math.log(acc)) / lnq
        for d in range(1, q):
            out_z[d - 1, i] = math.exp(0.5 * (row[(u + d) % q] - row[u]))


def estimate_index_stats_mc(w: JointChannel, n: int, samples: int, seed: int = 0,
                            batch: int = MC_BATCH) -> IndexStats:
    """Genie-aided Monte Carlo estimates of H(W_n^{(i)}) and Z_d(W_n^{(i)}).

    Each sample draws (X, Y), runs the successive-cancellation recursion with
    the true past symbols, and records -log_q Pr[u_i | .] (unbiased for H) and
    sqrt(Pr[u_i + d | .] / Pr[u_i | .]) (unbiased for Z_d). Batches use seeds
    spawned from ``seed``, so results depend only on (seed, samples, batch).
    """
    if samples < 1:
        raise PolarError("need at least one sample")
    q, N = w.q, 1 << n
    with np.errstate(divide="ignore"):
        logpost = np.log(w.posteriors)
    nb = -(-samples // batch)
    seeds = np.random.SeedSequence(seed).spawn(nb)
    acc_h = np.zeros(N)
    acc_h2 = np.zeros(N)
    acc_z = np.zeros((q - 1, N))
    acc_z2 = np.zeros((q - 1, N))
    done = 0
    for b in range(nb):
        size = min(batch, samples - done)
        x, y = sample_joint(w, size * N, np.random.default_rng(seeds[b]))
        LL = np.ascontiguousarray(logpost[y].reshape(size, N, q))
        LP = np.ascontiguousarray(w.posteriors[y].reshape(size, N, q))
        _genie_accumulate(LL, LP, x.reshape(size, N), acc_h, acc_h2, acc_z, acc_z2)
        done += size
    h = acc_h / samples
    zd = acc_z / samples
    denom = max(samples - 1, 1)
    h_var = np.maximum(acc_h2 / samples - h * h, 0.0) * samples / denom
    z_var = np.maximum(acc_z2 / samples - zd * zd, 0.0) * samples / denom
    dmax = zd.argmax(axis=0)
    cols = np.arange(N)
    return IndexStats(
        q=q, n=n, h=np.clip(h, 0.0, 1.0), z=zd[dmax, cols], method="mc", channel=w,
        z_by_d=zd.T.copy(),
        h_se=np.sqrt(h_var / samples),
        z_se=np.sqrt(z_var[dmax, cols] / samples),
        samples=samples, seed=seed,
    )


# -- bounds, selection, profiles --------------------------------------------------


def z_bound_recursion(z0: float, i: int, n: int, q: int) -> float:
    """Upper bound on Z_max(W_n^{(i)}) from Z_max(W) alone.

    Walks the bits of i from the first-applied transform (most significant)
    to the last: a plus step squares the bound, a minus step multiplies it by
    q**3, capped at 1.
    """
    if not 0.0 <= z0 <= 1.0:
        raise PolarError("z0 must lie in [0, 1]")
    if not 0 <= i < (1 << n):
        raise PolarError("index out of range")
    z = float(z0)
    for b in range(n - 1, -1, -1):
        z = z * z if (i >> b) & 1 else min(1.0, q ** 3 * z)
    return z


def attach_z_bounds(stats: IndexStats, z0: float | None = None) -> IndexStats:
    if z0 is None:
        z0 = bhattacharyya(stats.channel).z_max
    stats.z_tilde = np.array([z_bound_recursion(z0, i, stats.n, stats.q) for i in range(stats.N)])
    return stats


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """One concrete code: alphabet, depth, frozen (transmitted) indices, channel model."""

    q: int
    n: int
    frozen: tuple
    channel: JointChannel
    digest: str = "exact;0;"
    predicted_failure: float | None = None

    def __post_init__(self):
        fr = tuple(sorted(int(i) for i in self.frozen))
        if len(set(fr)) != len(fr) or (fr and (fr[0] < 0 or fr[-1] >= (1 << self.n))):
            raise PolarError("frozen indices must be distinct and lie in [0, 2**n)")
        if self.channel.q != self.q:
            raise PolarError("channel alphabet does not match the code")
        object.__setattr__(self, "frozen", fr)

    @property
    def N(self):
        return 1 << self.n

    @property
    def frozen_mask(self):
        m = np.zeros(self.N, dtype=bool)
        m[list(self.frozen)] = True
        return m

    @property
    def info(self):
        return tuple(i for i in range(self.N) if i not in set(self.frozen))

    @property
    def rate(self):
        """Fraction of indices transmitted (compression rate)."""
        return len(self.frozen) / self.N

    def __eq__(self, other):
        if not isinstance(other, CodeSpec):
            return NotImplemented
        return dump_codespec(self) == dump_codespec(other)


def select_frozen(stats: IndexStats, rate: float | None = None, threshold: float | None = None,
                  channel: JointChannel | None = None) -> CodeSpec:
    """Choose the frozen set by rate (largest entropies) or entropy threshold.

    Ties under the rate policy go to the larger z, then the smaller index.
    The union bound sum over unfrozen i of (q - 1) z_i is recorded on the
    result as ``predicted_failure``.
    """
    if (rate is None) == (threshold is None):
        raise PolarError("give exactly one of rate or threshold")
    N = stats.N
    if rate is not None:
        if not 0.0 <= rate <= 1.0:
            raise PolarError("rate must lie in [0, 1]")
        k = min(N, math.ceil(rate * N - 1e-9))
        order = np.lexsort((np.arange(N), -stats.z, -stats.h))
        frozen = order[:k]
    else:
        frozen = np.nonzero(stats.h > threshold)[0]
    mask = np.zeros(N, dtype=bool)
    mask[frozen] = True
    bound = float((stats.q - 1) * np.sum(stats.z[~mask]))
    ch = channel if channel is not None else stats.channel
    if ch is None:
        raise PolarError("statistics carry no channel; pass one explicitly")
    return CodeSpec(stats.q, stats.n, tuple(int(i) for i in frozen), ch, stats.digest(), bound)


@dataclass
class Profile:
    rows: np.ndarray  # columns i, h, z, T
    mean_T: float
    mean_sqrt_T: float
    frac_low: float
    frac_high: float
    epsilon: float

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("i,h_hat,z_hat,T\n")
        for i, h, z, t in self.rows:
            out.write(f"{int(i)},{format_float(h)},{format_float(z)},{format_float(t)}\n")
        return out.getvalue()

    def aggregates_csv(self) -> str:
        return ("mean_T,mean_sqrt_T,frac_low,frac_high,epsilon\n"
                + ",".join(format_float(v) for v in (self.mean_T, self.mean_sqrt_T, self.frac_low,
                                                     self.frac_high, self.epsilon)) + "\n")


def polarization_profile(stats: IndexStats, epsilon: float = 0.05) -> Profile:
    T = stats.h * (1.0 - stats.h)
    rows = np.column_stack((np.arange(stats.N), stats.h, stats.z, T))
    return Profile(
        rows=rows,
        mean_T=float(T.mean()),
        mean_sqrt_T=float(np.sqrt(T).mean()),
        frac_low=float(np.mean(stats.h <= epsilon)),
        frac_high=float(np.mean(stats.h >= 1.0 - epsilon)),
        epsilon=epsilon,
    )


def rough_polarization_fraction(stats: IndexStats, rho: float = 0.9) -> float:
    """Fraction of indices with z <= 2 rho**n."""
    return float(np.mean(stats.z <= 2.0 * rho ** stats.n))


def contraction_ratio(w: JointChannel) -> float | None:
    """(sqrt T(W-) + sqrt T(W+)) / (2 sqrt T(W)); None when T(W) <= 1e-9."""
    from .channel import channel_entropy

    t = symmetric_entropy(channel_entropy(w))
    if t <= 1e-9:
        return None
    tm = symmetric_entropy(channel_entropy(minus_transform(w)))
    tp = symmetric_entropy(channel_entropy(plus_transform(w)))
    return (math.sqrt(max(tm, 0.0)) + math.sqrt(max(tp, 0.0))) / (2.0 * math.sqrt(t))


# -- CodeSpec text format ----------------------------------------------------------


def dump_codespec(spec: CodeSpec) -> str:
    return (
        "POLARQ v1\n"
        f"q={spec.q};n={spec.n}\n"
        "frozen=" + ",".join(str(i) for i in spec.frozen) + "\n"
        + format_channel(spec.channel)
        + f"digest={spec.digest}\n"
    )


def load_codespec(text: str) -> CodeSpec:
    lines = text.splitlines()
    try:
        if lines[0].strip() != "POLARQ v1":
            raise ValueError("bad magic line")
        a, b = lines[1].strip().split(";")
        if not a.startswith("q=") or not b.startswith("n="):
            raise ValueError("bad q/n line")
        q, n = int(a[2:]), int(b[2:])
        if not lines[2].startswith("frozen="):
            raise ValueError("bad frozen line")
        body = lines[2][len("frozen="):].strip()
        frozen = tuple(int(v) for v in body.split(",")) if body else ()
        if list(frozen) != sorted(set(frozen)):
            raise ValueError("frozen indices must be strictly increasing")
        channel, used = parse_channel_lines(lines[3:])
        rest = [ln for ln in lines[3 + used:] if ln.strip()]
        if len(rest) != 1 or not rest[0].startswith("digest="):
            raise ValueError("bad digest line")
        digest = rest[0][len("digest="):]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed code spec: {exc}") from exc
    return CodeSpec(q, n, frozen, channel, digest)
