"""Source compression with side information, SC decoding, channel coding, multilevel codes.

Side information reaches the decoder as atom indices into the code's channel
model. The successive-cancellation decoder runs in the log domain over a
batch of blocks at once: a sub-problem with inputs X and log-likelihoods L
splits into the minus child (inputs X_even + X_odd) holding the first half
of the U indices and the plus child (inputs X_odd) holding the second half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import JointChannel, channel_entropy
from .construction import CodeSpec
from .errors import DecodingError, FormatError, PolarError, StageDecodingError
from .transform import inverse_transform, transform

STREAM_MAGIC = "POLARQC v1"

#: Log-likelihoods within this distance of the maximum count as tied.
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CompressedBlock:
    q: int
    n: int
    payload: np.ndarray  # U at the frozen indices, increasing index order

    def __post_init__(self):
        p = np.asarray(self.payload, dtype=np.int64).reshape(-1)
        if p.size and (p.min() < 0 or p.max() >= self.q):
            raise PolarError(f"payload symbols must lie in [0, {self.q})")
        object.__setattr__(self, "payload", p)

    def __eq__(self, other):
        return (isinstance(other, CompressedBlock) and (self.q, self.n) == (other.q, other.n)
                and np.array_equal(self.payload, other.payload))


def _check_word(x, spec: CodeSpec):
    x = np.asarray(x)
    if x.shape[-1] != spec.N:
        raise PolarError(f"expected words of length {spec.N}, got {x.shape[-1]}")
    return x


def compress(x, spec: CodeSpec) -> CompressedBlock:
    """Keep only U = G_n x at the frozen indices."""
    x = _check_word(x, spec)
    if x.ndim != 1:
        raise PolarError("compress takes one word; use compress_many for a batch")
    u = transform(x, spec.q)
    return CompressedBlock(spec.q, spec.n, u[list(spec.frozen)])


def compress_many(X, spec: CodeSpec) -> np.ndarray:
    """Payloads of a batch of words, shape (blocks, |frozen|)."""
    X = _check_word(np.atleast_2d(X), spec)
    return transform(X, spec.q)[:, list(spec.frozen)]


def _normalize(L):
    # an all -inf row (impossible prefix) stays -inf instead of turning into nan
    m = L.max(axis=-1, keepdims=True)
    return L - np.where(np.isfinite(m), m, 0.0)


def _minus_ll(Le, Lo):
    q = Le.shape[-1]
    idx = (np.arange(q)[None, :] - np.arange(q)[:, None]) % q  # [a, u] -> u - a
    return _normalize(logsumexp(Le[..., :, None] + Lo[..., idx], axis=-2))


def _plus_ll(Le, Lo, s_hat):
    q = Le.shape[-1]
    gather = (s_hat[..., None] - np.arange(q)) % q
    return _normalize(np.take_along_axis(Le, gather, axis=-1) + Lo)


def _sc(L, frozen, fvals):
    """Decode one sub-problem; returns (u_hat, x_hat) for every block in the batch."""
    length = L.shape[1]
    if length == 1:
        if frozen[0]:
            u = fvals[:, :1].copy()
        else:
            # rows are normalized to max 0; ties go to the smallest symbol
            u = (L[:, 0, :] >= -TIE_TOL).argmax(axis=-1)[:, None]
        return u, u
    half = length // 2
    Le, Lo = L[:, 0::2], L[:, 1::2]
    u1, s_hat = _sc(_minus_ll(Le, Lo), frozen[:half], fvals[:, :half])
    u2, xo = _sc(_plus_ll(Le, Lo, s_hat), frozen[half:], fvals[:, half:])
    q = L.shape[-1]
    x = np.empty((L.shape[0], length), dtype=np.int64)
    x[:, 0::2] = (s_hat - xo) % q
    x[:, 1::2] = xo
    return np.concatenate((u1, u2), axis=1), x


def _log_likelihoods(y_atoms, w: JointChannel):
    y = np.asarray(y_atoms)
    if not np.issubdtype(y.dtype, np.integer):
        raise PolarError("side information must be atom indices")
    if y.size and (y.min() < 0 or y.max() >= w.num_atoms):
        raise PolarError(f"atom index out of range [0, {w.num_atoms})")
    with np.errstate(divide="ignore"):
        return np.log(w.posteriors)[y]


def sc_decode_many(payloads, y_atoms, spec: CodeSpec, channel: JointChannel | None = None):
    """Successive-cancellation decoding of a batch; returns (x_hat, u_hat), each (blocks, N).

    ``channel`` overrides ``spec.channel`` as the likelihood model (used by
    the multilevel planes, whose model is the plane's sub-channel).
    """
    w = spec.channel if channel is None else channel
    Y = np.atleast_2d(np.asarray(y_atoms))
    _check_word(Y, spec)
    P = np.asarray(payloads, dtype=np.int64).reshape(Y.shape[0], -1)
    if P.shape[1] != len(spec.frozen):
        raise PolarError(f"payload length {P.shape[1]} != {len(spec.frozen)} frozen indices")
    fvals = np.zeros(Y.shape, dtype=np.int64)
    fvals[:, list(spec.frozen)] = P
    L = _normalize(_log_likelihoods(Y, w))
    u, x = _sc(L, spec.frozen_mask, fvals)
    return x, u


def sc_decode(block: CompressedBlock, y_atoms, spec: CodeSpec) -> np.ndarray:
    """Estimate the source word from the frozen symbols and the side information."""
    if (block.q, block.n) != (spec.q, spec.n):
        raise PolarError("block does not belong to this code")
    y = np.asarray(y_atoms)
    if y.ndim != 1:
        raise PolarError("sc_decode takes one block; use sc_decode_many for a batch")
    x, _ = sc_decode_many(block.payload[None, :], y[None, :], spec)
    return x[0]


decompress = sc_decode


def channel_encode(message, spec: CodeSpec, frozen_fill=None) -> np.ndarray:
    """Codeword x = G_n^{-1} U with the message on the unfrozen indices."""
    info = list(spec.info)
    m = np.asarray(message, dtype=np.int64).reshape(-1)
    fill = np.zeros(len(spec.frozen), dtype=np.int64) if frozen_fill is None else np.asarray(frozen_fill, dtype=np.int64).reshape(-1)
    if m.size != len(info):
        raise PolarError(f"message length {m.size} != {len(info)} unfrozen indices")
    if fill.size != len(spec.frozen):
        raise PolarError(f"frozen fill length {fill.size} != {len(spec.frozen)}")
    u = np.zeros(spec.N, dtype=np.int64)
    u[info] = m
    u[list(spec.frozen)] = fill
    return inverse_transform(u, spec.q)


def channel_decode(received_atoms, spec: CodeSpec, frozen_fill=None) -> np.ndarray:
    """SC decoding with the frozen symbols known; returns the unfrozen estimates."""
    Y = np.asarray(received_atoms)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    fill = np.zeros(len(spec.frozen), dtype=np.int64) if frozen_fill is None else np.asarray(frozen_fill, dtype=np.int64)
    _, u = sc_decode_many(np.broadcast_to(fill, (Y.shape[0], len(spec.frozen))), Y, spec)
    msg = u[:, list(spec.info)]
    return msg[0] if single else msg


# -- compressed stream -----------------------------------------------------------


def write_stream(payloads, q: int, n: int) -> bytes:
    P = np.asarray(payloads, dtype=np.int64)
    if P.ndim == 1:
        P = P[None, :]
    if P.ndim != 2:
        raise PolarError("payloads must be one row per block")
    if q > 251:
        raise PolarError("the byte stream holds alphabets up to 251 symbols")
    if P.size and (P.min() < 0 or P.max() >= q):
        raise PolarError("payload symbol out of range")
    head = f"{STREAM_MAGIC}\nq={q};n={n};count={P.shape[0]}\n".encode("ascii")
    return head + P.astype(np.uint8).tobytes()


def _read_line(data: bytes, pos: int):
    end = data.find(b"\n", pos)
    if end < 0:
        raise FormatError("truncated stream header")
    return data[pos:end].decode("ascii"), end + 1


def read_stream(data: bytes, frozen_count: int | None = None, pos: int = 0):
    """Parse one stream; returns (q, n, payloads (count, k), next position)."""
    try:
        magic, pos = _read_line(data, pos)
        if magic != STREAM_MAGIC:
            raise FormatError("bad stream magic")
        line, pos = _read_line(data, pos)
        fields = dict(kv.split("=", 1) for kv in line.split(";"))
        q, n, count = int(fields["q"]), int(fields["n"]), int(fields["count"])
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"malformed stream header: {exc}") from exc
    if frozen_count is None:
        rest = len(data) - pos
        if count == 0:
            frozen_count = 0
        elif rest % count:
            raise FormatError("payload size is not a multiple of the block count")
        else:
            frozen_count = rest // count
    size = count * frozen_count
    if len(data) - pos < size:
        raise FormatError("truncated payload")
    P = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos).astype(np.int64)
    if P.size and P.max() >= q:
        raise FormatError("payload symbol out of range")
    return q, n, P.reshape(count, frozen_count), pos + size


# -- composite alphabets ---------------------------------------------------------


def prime_factors(q: int) -> tuple:
    """Prime factors of q, ascending with multiplicity (12 -> (2, 2, 3))."""
    if q < 2:
        raise PolarError("alphabet size must be at least 2")
    out, p, r = [], 2, q
    while p * p <= r:
        while r % p == 0:
            out.append(p)
            r //= p
        p += 1
    if r > 1:
        out.append(r)
    return tuple(out)


def _check_factors(factors):
    factors = tuple(int(f) for f in factors)
    if not factors or list(factors) != sorted(factors) or any(prime_factors(f) != (f,) for f in factors):
        raise PolarError(f"bad factorization {factors}: need primes in ascending order")
    return factors


def digit_decompose(x, factors) -> np.ndarray:
    """Mixed-radix digits: x = d_1 + q_1 d_2 + q_1 q_2 d_3 + ...; the digit axis is last."""
    factors = _check_factors(factors)
    x = np.asarray(x, dtype=np.int64)
    q = math.prod(factors)
    if x.size and (x.min() < 0 or x.max() >= q):
        raise PolarError(f"symbols must lie in [0, {q})")
    out = []
    for f in factors:
        out.append(x % f)
        x = x // f
    return np.stack(out, axis=-1)


def digit_compose(digits, factors) -> np.ndarray:
    factors = _check_factors(factors)
    d = np.asarray(digits, dtype=np.int64)
    if d.shape[-1] != len(factors):
        raise PolarError("one digit per factor expected")
    x = np.zeros(d.shape[:-1], dtype=np.int64)
    radix = 1
    for j, f in enumerate(factors):
        if d[..., j].size and (d[..., j].min() < 0 or d[..., j].max() >= f):
            raise PolarError(f"digit {j} must lie in [0, {f})")
        x += radix * d[..., j]
        radix *= f
    return x


@dataclass(frozen=True)
class PlaneChannel:
    """W^(j) = (U^(j); Y, U^(1..j-1)); atom_map[k, v] is the atom for base atom k and lower digits v (-1 if impossible)."""

    channel: JointChannel
    atom_map: np.ndarray
    radix: int  # number of values the lower digits can take


def plane_channels(w: JointChannel, factors=None) -> list:
    """The sub-channels of every digit plane, lowest digit first."""
    factors = prime_factors(w.q) if factors is None else _check_factors(factors)
    if math.prod(factors) != w.q:
        raise PolarError("factorization does not match the alphabet")
    D = digit_decompose(np.arange(w.q), factors)  # (q, s)
    J = w.joint()  # (k, x)
    out = []
    radix = 1
    for j, f in enumerate(factors):
        low = _lower_value(D, j, factors)
        T = np.zeros((w.num_atoms, radix, f))
        for x in range(w.q):
            T[:, low[x], D[x, j]] += J[:, x]
        T = T.reshape(-1, f)
        m = T.sum(axis=1)
        keep = m > 0
        atom_map = np.full(m.size, -1, dtype=np.int64)
        atom_map[keep] = np.arange(int(keep.sum()))
        ch = JointChannel(m[keep] / m[keep].sum(), T[keep] / m[keep, None])
        out.append(PlaneChannel(ch, atom_map.reshape(w.num_atoms, radix), radix))
        radix *= f
    return out


def plane_entropies_bits(w: JointChannel, factors=None) -> np.ndarray:
    """H(W^(j)) in bits; they add up to H(X | Y) in bits."""
    factors = prime_factors(w.q) if factors is None else _check_factors(factors)
    return np.array([channel_entropy(pc.channel) * math.log2(f)
                     for pc, f in zip(plane_channels(w, factors), factors)])


@dataclass(frozen=True, eq=False)
class MultilevelCode:
    """One CodeSpec per digit plane of a composite-alphabet channel."""

    channel: JointChannel
    factors: tuple
    specs: tuple
    planes: tuple

    @property
    def n(self):
        return self.specs[0].n

    @property
    def rate(self):
        """Transmitted symbols per source symbol, in units of lg q."""
        return sum(len(s.frozen) * math.log(f) for s, f in zip(self.specs, self.factors)) / (self.specs[0].N * math.log(self.channel.q))


def build_multilevel_code(w: JointChannel, n: int, threshold: float = 0.0, rates=None,
                          method: str = "exact", samples: int = 10_000, seed: int = 0) -> MultilevelCode:
    """Construct every plane's code on its own sub-channel.

    Planes are frozen by entropy threshold (default: every index with h > 0)
    unless per-plane ``rates`` are given.
    """
    from .construction import estimate_index_stats_mc, select_frozen, track_channels_exact

    factors = prime_factors(w.q)
    planes = plane_channels(w, factors)
    specs = []
    for j, pc in enumerate(planes):
        if method == "exact":
            stats = track_channels_exact(pc.channel, n)
        elif method == "mc":
            stats = estimate_index_stats_mc(pc.channel, n, samples, seed + j)
        else:
            raise PolarError(f"unknown construction method {method!r}")
        if rates is None:
            specs.append(select_frozen(stats, threshold=threshold))
        else:
            specs.append(select_frozen(stats, rate=rates[j]))
    return MultilevelCode(w, factors, tuple(specs), tuple(planes))


def _lower_value(D, j, factors):
    v = np.zeros(D.shape[:-1], dtype=np.int64)
    radix = 1
    for i in range(j):
        v += radix * D[..., i]
        radix *= factors[i]
    return v


def multilevel_compress(X, code: MultilevelCode) -> list:
    """Per-plane payloads (blocks, |frozen_j|) for a batch of words over Z_q."""
    X = np.atleast_2d(np.asarray(X, dtype=np.int64))
    D = digit_decompose(X, code.factors)
    return [compress_many(D[..., j], spec) for j, spec in enumerate(code.specs)]


def multilevel_decompress(payloads, y_atoms, code: MultilevelCode) -> np.ndarray:
    """Decode plane by plane, feeding recovered planes forward as side information.

    Raises ``StageDecodingError`` naming the first plane whose side information
    is impossible under the model (a sign that an earlier plane failed).
    """
    Y = np.atleast_2d(np.asarray(y_atoms, dtype=np.int64))
    D = np.zeros(Y.shape + (len(code.factors),), dtype=np.int64)
    for j, (spec, pc) in enumerate(zip(code.specs, code.planes)):
        side = pc.atom_map[Y, _lower_value(D, j, code.factors)]
        if np.any(side < 0):
            raise StageDecodingError(j, "recovered lower planes are impossible under the model")
        try:
            D[..., j], _ = sc_decode_many(payloads[j], side, spec, pc.channel)
        except PolarError as exc:
            raise StageDecodingError(j, str(exc)) from exc
    return digit_compose(D, code.factors)


def multilevel_side_information(X, Y, code: MultilevelCode) -> list:
    """Atom indices each plane's encoder sees (true lower planes plus Y)."""
    D = digit_decompose(np.asarray(X), code.factors)
    return [pc.atom_map[np.asarray(Y), _lower_value(D, j, code.factors)] for j, pc in enumerate(code.planes)]


def write_multilevel_stream(payloads, code: MultilevelCode) -> bytes:
    parts = []
    for j, (P, f, spec) in enumerate(zip(payloads, code.factors, code.specs)):
        parts.append(f"plane={j};q={f}\n".encode("ascii") + write_stream(P, f, spec.n))
    return b"".join(parts)


def read_multilevel_stream(data: bytes, frozen_counts=None) -> list:
    """Returns [(plane, q_j, payloads)] in stream order."""
    out, pos, j = [], 0, 0
    while pos < len(data):
        line, pos = _read_line(data, pos)
        try:
            fields = dict(kv.split("=", 1) for kv in line.split(";"))
            plane, qj = int(fields["plane"]), int(fields["q"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"malformed plane header {line!r}") from exc
        fc = None if frozen_counts is None else frozen_counts[j]
        if fc is None:
            raise FormatError("multilevel streams need the per-plane frozen counts")
        q, _, P, pos = read_stream(data, fc, pos)
        if q != qj:
            raise FormatError("plane header and stream disagree on the alphabet")
        out.append((plane, qj, P))
        j += 1
    return out


__all__ = [
    "CompressedBlock", "compress", "compress_many", "sc_decode", "sc_decode_many", "decompress",
    "channel_encode", "channel_decode", "write_stream", "read_stream", "prime_factors",
    "digit_decompose", "digit_compose", "plane_channels", "plane_entropies_bits",
    "MultilevelCode", "build_multilevel_code", "multilevel_compress", "multilevel_decompress",
    "multilevel_side_information", "write_multilevel_stream", "read_multilevel_stream",
    "DecodingError",
]
