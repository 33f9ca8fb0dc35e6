"""Finite channels W = (X; Y), their polarization transforms and statistics.

A channel is stored as a list of output *atoms*. Atom ``k`` stands for an
output symbol ``y_k`` with ``Pr[Y = y_k] = weights[k]`` and posterior
``Pr[X = . | Y = y_k] = posteriors[k]``. The joint law is recovered as
``weights[:, None] * posteriors``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from .dist import DistQ, SLACK, entropy_array, format_float
from .errors import FormatError, InvalidDistributionError, PolarError

#: Posteriors agreeing to this many decimals are treated as identical by
#: lossless merging (floating-point evaluation order alone perturbs ~1e-16).
MERGE_DECIMALS = 12


def _shift_index(q):
    # idx[x, u] = (u - x) mod q
    return (np.arange(q)[None, :] - np.arange(q)[:, None]) % q


@dataclass(frozen=True, eq=False)
class JointChannel:
    """Weighted list of output atoms, each carrying a posterior over Z_q.

    Zero-weight atoms are dropped at construction; weights and posteriors are
    renormalized when their drift exceeds ``1e-12``.
    """

    weights: np.ndarray
    posteriors: np.ndarray
    approximate: bool = False
    entropy_change: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        P = np.array(self.posteriors, dtype=float)
        if P.ndim != 2 or P.shape[0] != w.size:
            raise InvalidDistributionError("need one posterior row per atom")
        if P.shape[1] < 2:
            raise InvalidDistributionError("alphabet size must be at least 2")
        if w.size == 0:
            raise InvalidDistributionError("channel has no output atoms")
        if np.any(w < 0) or np.any(P < 0) or not (np.all(np.isfinite(w)) and np.all(np.isfinite(P))):
            raise InvalidDistributionError("weights and posteriors must be finite and nonnegative")
        keep = w > 0
        w, P = w[keep], P[keep]
        if w.size == 0:
            raise InvalidDistributionError("channel has no output atoms of positive weight")
        s = w.sum()
        if abs(s - 1.0) > 1e-9:
            raise InvalidDistributionError(f"atom weights sum to {s!r}, not 1")
        if abs(s - 1.0) > SLACK:
            w = w / s
        rows = P.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-9):
            raise InvalidDistributionError("every posterior must sum to 1")
        if np.any(np.abs(rows - 1.0) > SLACK):
            P = P / rows[:, None]
        w.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "posteriors", P)

    @property
    def q(self) -> int:
        return self.posteriors.shape[1]

    @property
    def num_atoms(self) -> int:
        return self.weights.size

    def joint(self) -> np.ndarray:
        """Matrix ``J[k, x] = Pr[Y = y_k, X = x]``."""
        return self.weights[:, None] * self.posteriors

    def input_marginal(self) -> np.ndarray:
        return self.weights @ self.posteriors

    def posterior(self, k: int) -> DistQ:
        return DistQ(self.posteriors[k])

    @classmethod
    def from_joint(cls, joint) -> "JointChannel":
        """Build from a joint matrix ``J[y, x]``; all-zero rows are dropped."""
        J = np.asarray(joint, dtype=float)
        w = J.sum(axis=1)
        keep = w > 0
        return cls(w[keep], J[keep] / w[keep, None])

    @classmethod
    def source(cls, p) -> "JointChannel":
        """A source without side information: a single output atom."""
        p = p.probs if isinstance(p, DistQ) else np.asarray(p, dtype=float)
        return cls(np.ones(1), p[None, :])

    def __repr__(self):
        return f"JointChannel(q={self.q}, atoms={self.num_atoms})"


@dataclass(frozen=True)
class ChannelStats:
    entropy: float
    symmetric_entropy: float
    z_max: float
    z_by_d: tuple


def symmetric_entropy(h: float) -> float:
    """T = H (1 - H)."""
    return h * (1.0 - h)


def channel_entropy(w: JointChannel) -> float:
    """H(X | Y), normalized by lg q."""
    return float(np.clip(w.weights @ entropy_array(w.posteriors), 0.0, 1.0))


# -- array kernels shared with the exact tracker ---------------------------------


def minus_arrays(w, P):
    """Atoms of W^- = (A0 + A1; B0, B1) before any merging."""
    q = P.shape[1]
    R = np.einsum("kx,lxu->klu", P, P[:, _shift_index(q)]).reshape(-1, q)
    W = np.outer(w, w).reshape(-1)
    R /= R.sum(axis=1, keepdims=True)
    return W, R


def plus_arrays(w, P):
    """Atoms of W^+ = (A1; A0 + A1, B0, B1) before merging; zero-weight atoms dropped.

    Output atom (k, l, u) has unnormalized joint ``P[k, u - x1] * P[l, x1]``.
    """
    k, q = P.shape
    Pk = P[:, _shift_index(q)]  # Pk[k, x1, u] = P[k, u - x1]
    J = Pk[:, None, :, :] * P[None, :, :, None]  # (k, l, x1, u)
    J = np.ascontiguousarray(J.transpose(0, 1, 3, 2)).reshape(-1, q)
    m = J.sum(axis=1)
    W = np.repeat(np.outer(w, w).reshape(-1), q) * m
    keep = m > 0
    return W[keep], J[keep] / m[keep, None]


def merge_arrays(w, P, decimals=MERGE_DECIMALS):
    """Merge atoms whose square-root posteriors agree to ``decimals`` places.

    Agreement is judged on square roots of the posteriors: Z_d is a sum of
    sqrt(p p'), so a 1e-13 discrepancy in a tiny probability can move Z by
    3e-7 while its square root barely moves.
    """
    if w.size <= 1:
        return w, P
    key = np.round(np.sqrt(P), decimals) + 0.0  # +0.0 folds -0.0 into 0.0
    _, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    m = int(inv.max()) + 1
    if m == w.size:
        return w, P
    W = np.bincount(inv, weights=w, minlength=m)
    Q = np.empty((m, P.shape[1]))
    for j in range(P.shape[1]):
        Q[:, j] = np.bincount(inv, weights=w * P[:, j], minlength=m)
    keep = W > 0  # products of tiny weights can underflow
    return W[keep], Q[keep] / W[keep, None]


def z_by_d_arrays(w, P):
    """Z_d for d = 1..q-1."""
    q = P.shape[1]
    S = np.sqrt(P)
    return np.array([w @ (S * np.roll(S, -d, axis=1)).sum(axis=1) for d in range(1, q)])


def ml_error_arrays(w, P):
    mx = P.max(axis=1)
    tied = (P >= mx[:, None] - 1e-12 * np.maximum(mx[:, None], 1e-300)).sum(axis=1) > 1
    per_atom = np.where(tied, 1.0, 1.0 - mx)
    return float(np.clip(w @ per_atom, 0.0, 1.0))


# -- public operations ------------------------------------------------------------


def minus_transform(w: JointChannel) -> JointChannel:
    W, R = minus_arrays(w.weights, w.posteriors)
    return JointChannel(W, R)


def plus_transform(w: JointChannel) -> JointChannel:
    W, R = plus_arrays(w.weights, w.posteriors)
    return JointChannel(W, R)


def bhattacharyya(w: JointChannel) -> ChannelStats:
    """Z_d(W) = sum_{x,y} sqrt(p(x,y) p(x+d,y)) for every d != 0, plus H and T."""
    z = z_by_d_arrays(w.weights, w.posteriors)
    h = channel_entropy(w)
    return ChannelStats(
        entropy=h,
        symmetric_entropy=symmetric_entropy(h),
        z_max=float(z.max()),
        z_by_d=tuple(float(v) for v in z),
    )


def ml_error_prob(w: JointChannel) -> float:
    """Exact error probability of the MAP guess of X from Y.

    An atom whose argmax is not unique counts entirely as an error.
    """
    return ml_error_arrays(w.weights, w.posteriors)


def merge_equivalent_outputs(w: JointChannel, tol: float = 0.0) -> JointChannel:
    """Merge atoms with (near-)identical posteriors.

    ``tol == 0`` merges only posteriors whose square roots agree to
    ``MERGE_DECIMALS`` places and leaves every statistic unchanged. ``tol > 0`` greedily clusters
    posteriors within L1 distance ``tol`` of a cluster's first member; the
    result is flagged ``approximate`` and carries the entropy change.
    """
    if tol < 0:
        raise PolarError("merge tolerance must be nonnegative")
    if tol == 0:
        W, Q = merge_arrays(w.weights, w.posteriors)
        return JointChannel(W, Q, approximate=w.approximate, entropy_change=w.entropy_change)
    P = w.posteriors
    order = np.lexsort(P.T[::-1])
    labels = np.full(P.shape[0], -1)
    reps = []
    for i in order:
        if reps:
            d = np.abs(P[reps] - P[i]).sum(axis=1)
            j = int(d.argmin())
            if d[j] <= tol:
                labels[i] = j
                continue
        labels[i] = len(reps)
        reps.append(i)
    m = len(reps)
    W = np.bincount(labels, weights=w.weights, minlength=m)
    Q = np.stack([np.bincount(labels, weights=w.weights * P[:, j], minlength=m) for j in range(w.q)], axis=1)
    Q /= W[:, None]
    out = JointChannel(W, Q)
    dh = channel_entropy(out) - channel_entropy(w)
    return JointChannel(out.weights, out.posteriors, approximate=True,
                        entropy_change=w.entropy_change + dh)


def make_qsc(q: int, flip_prob: float) -> JointChannel:
    """q-ary symmetric channel with uniform input, seen from the output side."""
    if q < 2:
        raise InvalidDistributionError("alphabet size must be at least 2")
    if not 0.0 <= flip_prob <= (q - 1) / q + 1e-15:
        raise InvalidDistributionError(f"flip probability must lie in [0, {(q - 1) / q}]")
    P = np.full((q, q), flip_prob / (q - 1))
    np.fill_diagonal(P, 1.0 - flip_prob)
    return JointChannel(np.full(q, 1.0 / q), P)


def qsc_flip_for_entropy(q: int, target: float, xtol: float = 1e-15) -> float:
    """Flip probability of the q-ary symmetric channel with H(W) = target (bisection)."""
    if not 0.0 <= target <= 1.0:
        raise InvalidDistributionError("target entropy must lie in [0, 1]")
    hi = (q - 1) / q
    if target == 0.0:
        return 0.0
    if target == 1.0:
        return hi
    return brentq(lambda f: channel_entropy(make_qsc(q, f)) - target, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def qsc_with_entropy(q: int, target: float) -> JointChannel:
    return make_qsc(q, qsc_flip_for_entropy(q, target))


def noiseless_channel(q: int, prior=None) -> JointChannel:
    """Y = X: every posterior is a point mass."""
    prior = np.full(q, 1.0 / q) if prior is None else np.asarray(prior, dtype=float)
    return JointChannel(prior, np.eye(q))


def random_channel(q: int, max_atoms: int = 8, seed=None, concentration=None) -> JointChannel:
    """Random channel with 1..max_atoms atoms and Dirichlet posteriors.

    The posterior concentration is drawn log-uniformly from [0.05, 20] unless
    given, so the corpus spans nearly deterministic to nearly uniform atoms.
    """
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, max_atoms + 1))
    w = rng.dirichlet(np.ones(k))
    if concentration is None:
        concentration = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
    P = rng.dirichlet(np.full(q, concentration), size=k)
    P = np.maximum(P, 0.0)
    P /= P.sum(axis=1, keepdims=True)
    return JointChannel(w / w.sum(), P)


def sample_joint(w: JointChannel, size: int, seed=None):
    """Draw ``size`` i.i.d. pairs; returns (x symbols, y atom indices)."""
    rng = np.random.default_rng(seed)
    y = rng.choice(w.num_atoms, size=size, p=w.weights)
    cdf = np.cumsum(w.posteriors[y], axis=1)
    x = (rng.random(size)[:, None] * cdf[:, -1:] >= cdf).sum(axis=1)
    return np.minimum(x, w.q - 1), y


def output_given_input(w: JointChannel) -> np.ndarray:
    """Transition matrix ``T[x, k] = Pr[Y = y_k | X = x]`` (rows with zero input mass are zero)."""
    J = w.joint().T
    m = J.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(m > 0, J / np.where(m > 0, m, 1.0), 0.0)


def sample_outputs(w: JointChannel, x, seed=None) -> np.ndarray:
    """Draw Y given a fixed input word ``x`` (used for channel coding)."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x)
    T = output_given_input(w)
    if np.any(T[x].sum(axis=1) <= 0):
        raise PolarError("input symbol has zero probability under the channel model")
    cdf = np.cumsum(T[x], axis=1)
    y = (rng.random(x.size)[:, None] * cdf[:, -1:] >= cdf).sum(axis=1)
    return np.minimum(y, w.num_atoms - 1)


def format_channel(w: JointChannel) -> str:
    lines = [f"q={w.q};atoms={w.num_atoms}"]
    for wk, pk in zip(w.weights, w.posteriors):
        lines.append(f"w={format_float(wk)};p=" + ",".join(format_float(v) for v in pk))
    return "\n".join(lines) + "\n"


def parse_channel_lines(lines: Iterable[str]) -> tuple:
    """Parse a channel from an iterator of lines; returns (channel, lines consumed)."""
    it = iter(lines)
    try:
        header = next(it).strip()
        hq, ha = header.split(";")
        if not hq.startswith("q=") or not ha.startswith("atoms="):
            raise ValueError
        q, k = int(hq[2:]), int(ha[6:])
        w = np.empty(k)
        P = np.empty((k, q))
        for i in range(k):
            line = next(it).strip()
            a, b = line.split(";", 1)
            if not a.startswith("w=") or not b.startswith("p="):
                raise ValueError
            w[i] = float(a[2:])
            row = [float(v) for v in b[2:].split(",")]
            if len(row) != q:
                raise ValueError
            P[i] = row
    except (ValueError, StopIteration) as exc:
        raise FormatError("malformed channel text") from exc
    return JointChannel(w, P), k + 1


def parse_channel(text: str) -> JointChannel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    ch, used = parse_channel_lines(lines)
    if used != len(lines):
        raise FormatError("trailing content after channel")
    return ch
