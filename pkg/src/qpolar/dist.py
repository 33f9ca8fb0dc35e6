"""Probability distributions over Z_q and their normalized entropies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlphabetMismatchError, FormatError, InvalidDistributionError

#: Slack used by every inequality check in the package.
SLACK = 1e-12

_SUM_TOL = 1e-9


def _xlogx_sum(p):
    """-sum p ln p over the last axis, with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -t.sum(axis=-1)


def entropy_array(p, q=None):
    """Normalized entropy of the distributions stored along the last axis of ``p``."""
    p = np.asarray(p, dtype=float)
    q = p.shape[-1] if q is None else q
    return np.clip(_xlogx_sum(p) / math.log(q), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class DistQ:
    """A probability vector over Z_q.

    Construction validates nonnegativity and the total mass; a drift above
    ``1e-12`` (but within ``1e-9``) is renormalized away.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1:
            raise InvalidDistributionError("probability vector must be one-dimensional")
        if p.size < 2:
            raise InvalidDistributionError("alphabet size must be at least 2")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistributionError("probabilities must be finite and nonnegative")
        s = p.sum()
        if abs(s - 1.0) > _SUM_TOL:
            raise InvalidDistributionError(f"probabilities sum to {s!r}, not 1")
        if abs(s - 1.0) > SLACK:
            p = p / s
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def q(self) -> int:
        return self.probs.size

    def __len__(self):
        return self.q

    def __getitem__(self, i):
        return self.probs[i]

    def __eq__(self, other):
        if not isinstance(other, DistQ):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"DistQ({format_dist(self)})"

    @classmethod
    def uniform(cls, q: int) -> "DistQ":
        return cls(np.full(q, 1.0 / q))

    @classmethod
    def point(cls, q: int, symbol: int) -> "DistQ":
        p = np.zeros(q)
        p[symbol % q] = 1.0
        return cls(p)


def _check_same_q(a: DistQ, b: DistQ):
    if a.q != b.q:
        raise AlphabetMismatchError(f"alphabet sizes differ: {a.q} != {b.q}")


def entropy_norm(p: DistQ) -> float:
    """H(p) = -(1/lg q) sum p(a) lg p(a), clamped to [0, 1]."""
    return float(entropy_array(p.probs))


def cyclic_shift(p: DistQ, j: int) -> DistQ:
    """The distribution of X + j when X ~ p, i.e. result(m) = p(m - j)."""
    return DistQ(np.roll(p.probs, j % p.q))


def convolve_array(a, b):
    """Cyclic convolution over the last axis (broadcasting over leading axes)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = a.shape[-1]
    # idx[x, u] = (u - x) mod q
    idx = (np.arange(q)[None, :] - np.arange(q)[:, None]) % q
    return np.einsum("...x,...xu->...u", a, b[..., idx])


def convolve(a: DistQ, b: DistQ) -> DistQ:
    """Law of A + B mod q for independent A ~ a, B ~ b."""
    _check_same_q(a, b)
    r = convolve_array(a.probs, b.probs)
    return DistQ(r / r.sum())


def l1_distance(a: DistQ, b: DistQ) -> float:
    _check_same_q(a, b)
    return float(np.abs(a.probs - b.probs).sum())


def mix(weights: DistQ | Sequence[float], parts: Sequence[DistQ]) -> DistQ:
    """Convex combination sum_k weights[k] * parts[k]."""
    w = weights.probs if isinstance(weights, DistQ) else np.asarray(weights, dtype=float)
    if len(parts) == 0 or w.shape != (len(parts),):
        raise InvalidDistributionError("need one weight per part")
    if np.any(w < 0) or abs(w.sum() - 1.0) > _SUM_TOL:
        raise InvalidDistributionError("mixture weights must be nonnegative and sum to 1")
    q = parts[0].q
    for part in parts:
        if part.q != q:
            raise AlphabetMismatchError("all mixture parts must share the alphabet")
    return DistQ(w @ np.stack([part.probs for part in parts]))


def sample_random_dist(q: int, concentration: float = 1.0, seed=None) -> DistQ:
    """Symmetric Dirichlet(concentration) draw; ``seed`` may be an int or a Generator."""
    if q < 2:
        raise InvalidDistributionError("alphabet size must be at least 2")
    if not concentration > 0:
        raise InvalidDistributionError("concentration must be positive")
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(q, float(concentration)))
    return DistQ(p / p.sum())


def format_float(v: float) -> str:
    return f"{float(v):.17g}"


def format_dist(p: DistQ) -> str:
    """Text literal ``q=<int>;p=<v0>,...``."""
    return f"q={p.q};p=" + ",".join(format_float(v) for v in p.probs)


def parse_dist(text: str) -> DistQ:
    try:
        head, body = text.strip().split(";", 1)
        if not head.startswith("q=") or not body.startswith("p="):
            raise ValueError
        q = int(head[2:])
        vals = [float(v) for v in body[2:].split(",")]
    except ValueError as exc:
        raise FormatError(f"bad distribution literal: {text!r}") from exc
    if len(vals) != q:
        raise FormatError(f"expected {q} probabilities, got {len(vals)}")
    return DistQ(np.array(vals))
