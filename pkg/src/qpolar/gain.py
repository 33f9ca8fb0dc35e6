"""Entropy-gain inequalities over Z_q, checked numerically, and empirical gain constants.

Every check returns a ``BoundCheckReport`` whose ``lhs`` is the side the
inequality claims to be larger, so ``margin = lhs - rhs`` and a check passes
when ``margin >= -SLACK``. Operands outside a bound's hypotheses raise
``HypothesisError`` instead of producing a report.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import JointChannel, channel_entropy, random_channel, symmetric_entropy
from .dist import SLACK, DistQ, convolve, cyclic_shift, entropy_array, entropy_norm, format_dist, format_float, l1_distance
from .errors import AlphabetMismatchError, HypothesisError, PolarError

LG_E = 1.0 / math.log(2.0)
T_FLOOR = 1e-6


def is_prime(q: int) -> bool:
    return q >= 2 and all(q % d for d in range(2, math.isqrt(q) + 1))


def lg(x):
    return math.log2(x)


@dataclass(frozen=True)
class BoundCheckReport:
    bound_id: str
    inputs: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    cases: tuple = ()

    def csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow(
            [self.bound_id, self.inputs, format_float(self.lhs), format_float(self.rhs),
             format_float(self.margin), "true" if self.passed else "false"])
        return buf.getvalue()


def _report(bound_id, inputs, lhs, rhs, cases=()):
    lhs, rhs = float(lhs), float(rhs)
    margin = lhs - rhs
    return BoundCheckReport(bound_id, inputs, lhs, rhs, margin, margin >= -SLACK, tuple(cases))


def _digest(*parts):
    out = []
    for p in parts:
        if isinstance(p, DistQ):
            out.append(format_dist(p))
        elif isinstance(p, (float, np.floating)):
            out.append(format_float(p))
        else:
            out.append(str(p))
    return "|".join(out)


def _same_q(*ds):
    q = ds[0].q
    if any(d.q != q for d in ds):
        raise AlphabetMismatchError("operands live on different alphabets")
    return q


# -- constants ---------------------------------------------------------------------


def gamma0(q: int) -> float:
    """1 / (500 (q-1)^4 lg q)."""
    return 1.0 / (500.0 * (q - 1) ** 4 * lg(q))


def c_const(q: int) -> float:
    """gamma0^3 lg q / (48 q^5 (q-1)^3 lg(6/gamma0) lg^2 e)."""
    g = gamma0(q)
    return g ** 3 * lg(q) / (48.0 * q ** 5 * (q - 1) ** 3 * lg(6.0 / g) * LG_E ** 2)


@dataclass
class GainConstants:
    q: int
    gamma0: float
    c: float
    alpha_estimate: float | None = None
    minimizer: JointChannel | None = field(default=None, repr=False)
    evaluated: int = 0

    @classmethod
    def for_q(cls, q: int) -> "GainConstants":
        if q < 2:
            raise PolarError("alphabet size must be at least 2")
        return cls(q, gamma0(q), c_const(q))


# -- unconditional gain --------------------------------------------------------------


def gain_unconditional(a: DistQ, b: DistQ) -> float:
    """H(A + B) - (H(A) + H(B)) / 2."""
    _same_q(a, b)
    return entropy_norm(convolve(a, b)) - 0.5 * (entropy_norm(a) + entropy_norm(b))


def check_max_ineq(a: DistQ, b: DistQ) -> BoundCheckReport:
    """H(A + B) >= max(H(A), H(B))."""
    _same_q(a, b)
    return _report("max_entropy", _digest(a, b), entropy_norm(convolve(a, b)),
                   max(entropy_norm(a), entropy_norm(b)))


def wtavg_cases(ha: float, hb: float, q: int) -> tuple:
    """Which of the five proof cases (by the gamma0 thresholds) contain (H(A), H(B)), H(A) >= H(B)."""
    g = gamma0(q)
    cases = []
    if 0.0 <= ha <= g and 0.0 <= hb <= g:
        cases.append(1)
    if g / 2 <= ha <= 1 - g / 2 and g / 2 <= hb <= 1 - g / 2:
        cases.append(2)
    if 1 - g <= ha <= 1 and 1 - g <= hb <= 1:
        cases.append(3)
    if ha > g and hb < g / 2:
        cases.append(4)
    if ha > 1 - g / 2 and hb < 1 - g:
        cases.append(5)
    return tuple(cases)


def check_wtavg(a: DistQ, b: DistQ, consts: GainConstants | None = None) -> BoundCheckReport:
    """H(A+B) >= (2H(A) + H(B))/3 + c min{T(A), T(B)}, oriented so that H(A) >= H(B)."""
    q = _same_q(a, b)
    consts = GainConstants.for_q(q) if consts is None else consts
    if consts.q != q:
        raise AlphabetMismatchError("constants were built for another alphabet")
    if not is_prime(q):
        raise HypothesisError(f"the weighted-average bound needs a prime alphabet, got q={q}")
    ha, hb = entropy_norm(a), entropy_norm(b)
    if ha < hb:
        a, b, ha, hb = b, a, hb, ha
    rhs = (2 * ha + hb) / 3 + consts.c * min(symmetric_entropy(ha), symmetric_entropy(hb))
    return _report("weighted_average_gain", _digest(a, b), entropy_norm(convolve(a, b)), rhs,
                   wtavg_cases(ha, hb, q))


# -- conditional gain and alpha ------------------------------------------------------


def conditional_gain(w: JointChannel) -> float:
    """E over independent output pairs (y, z) of H(X_y + X_z) - (H(X_y) + H(X_z)) / 2.

    Equals H(W-) - H(W).
    """
    P, wt = w.posteriors, w.weights
    q = w.q
    hs = entropy_array(P)
    idx = (np.arange(q)[None, :] - np.arange(q)[:, None]) % q
    Ps = P[:, idx]  # Ps[l, x, u] = P[l, u - x]
    total = 0.0
    chunk = max(1, 200_000 // max(1, P.shape[0] * q))
    for k0 in range(0, P.shape[0], chunk):
        R = np.einsum("kx,lxu->klu", P[k0:k0 + chunk], Ps)
        R /= R.sum(axis=-1, keepdims=True)
        H = entropy_array(R)
        D = H - 0.5 * (hs[k0:k0 + chunk, None] + hs[None, :])
        total += wt[k0:k0 + chunk] @ D @ wt
    return float(total)


def gain_ratio(w: JointChannel):
    """conditional_gain / T, or None when T <= 1e-6."""
    t = symmetric_entropy(channel_entropy(w))
    if t <= T_FLOOR:
        return None
    return conditional_gain(w) / t


def _perturb(w: JointChannel, rng, step: float) -> JointChannel:
    """Multiplicative log-normal jitter of one coordinate (a weight or a posterior entry)."""
    W = w.weights.copy()
    P = w.posteriors.copy()
    k = int(rng.integers(W.size + P.size))
    jitter = math.exp(step * rng.standard_normal())
    if k < W.size:
        W[k] *= jitter
    else:
        r, c = divmod(k - W.size, P.shape[1])
        P[r, c] = max(P[r, c], 1e-300) * jitter
        P[r] /= P[r].sum()
    return JointChannel(W / W.sum(), P)


def estimate_alpha(q: int, trials: int, seed: int = 0, refine: int = 200,
                   max_atoms: int = 8) -> GainConstants:
    """Smallest observed conditional_gain / T over random channels, then locally refined.

    Channels with T <= 1e-6 are skipped. The refinement perturbs one
    coordinate of the incumbent at a time with a step that shrinks whenever a
    round brings no improvement. Deterministic given ``seed``.
    """
    if not is_prime(q):
        raise HypothesisError(f"alpha is defined here for prime q, got {q}")
    if trials < 1:
        raise PolarError("need at least one trial")
    rng = np.random.default_rng(seed)
    best, best_w, evaluated = math.inf, None, 0
    for _ in range(trials):
        w = random_channel(q, max_atoms, seed=rng)
        r = gain_ratio(w)
        if r is None:
            continue
        evaluated += 1
        if r < best:
            best, best_w = r, w
    step = 1.0
    for _ in range(refine if best_w is not None else 0):
        cand = _perturb(best_w, rng, step)
        r = gain_ratio(cand)
        if r is not None:
            evaluated += 1
            if r < best:
                best, best_w = r, cand
                continue
        step = max(step * 0.97, 1e-3)
    out = GainConstants.for_q(q)
    out.alpha_estimate = None if best_w is None else float(best)
    out.minimizer = best_w
    out.evaluated = evaluated
    return out


# -- catalog of supporting bounds ------------------------------------------------------


def _low_eps_cap(q):
    return min(1.0 / 500.0, 1.0 / (q - 1) ** 4)


def _eps_of(p: DistQ):
    return 1.0 - float(p.probs.max())


def _delta_of(p: DistQ):
    return float(np.abs(p.probs - 1.0 / p.q).max())


def _f(x, q):
    """-x lg x / lg q with 0 lg 0 = 0."""
    return 0.0 if x <= 0 else -x * math.log(x) / math.log(q)


def _need(cond, msg):
    if not cond:
        raise HypothesisError(msg)


def _strong_convexity(x: DistQ, y: DistQ, alpha: float):
    q = _same_q(x, y)
    _need(0.0 <= alpha <= 1.0, "mixing weight must lie in [0, 1]")
    m = DistQ(alpha * x.probs + (1 - alpha) * y.probs)
    rhs = alpha * entropy_norm(x) + (1 - alpha) * entropy_norm(y) \
        + alpha * (1 - alpha) * l1_distance(x, y) ** 2 / (2 * lg(q))
    return entropy_norm(m), rhs, _digest(x, y, alpha)


def _shift_mixture_gain(p: DistQ, lam: DistQ, i: int, j: int):
    q = _same_q(p, lam)
    _need(i != j and 0 <= i < q and 0 <= j < q, "need two distinct shifts in [0, q)")
    li, lj = lam[i], lam[j]
    _need(li + lj > 0, "the two chosen shift weights must not both vanish")
    mixed = DistQ(sum(lam[k] * cyclic_shift(p, k).probs for k in range(q)))
    d = l1_distance(cyclic_shift(p, i), cyclic_shift(p, j))
    rhs = entropy_norm(p) + li * lj / (li + lj) * d * d / (2 * lg(q))
    return entropy_norm(mixed), rhs, _digest(p, lam, i, j)


def _cyclic_shift_distance(p: DistQ, i: int, j: int):
    q = p.q
    _need(is_prime(q), f"needs a prime alphabet, got q={q}")
    _need(i != j and 0 <= i < q and 0 <= j < q, "need two distinct shifts in [0, q)")
    lhs = l1_distance(cyclic_shift(p, i), cyclic_shift(p, j))
    rhs = (1 - entropy_norm(p)) * lg(q) / (2 * q * q * (q - 1) * LG_E)
    return lhs, rhs, _digest(p, i, j)


def _tail_bound(eps: float):
    _need(0.0 < eps <= 1.0 / 500.0, "needs 0 < eps <= 1/500")
    return -eps * lg(eps) / 6.0, -(1 - eps) * lg(1 - eps), _digest(eps)


def _log_ratio_domination(eps: float, q: int):
    _need(q >= 2, "alphabet size must be at least 2")
    _need(0.0 < eps <= 1.0 / (q - 1) ** 4, "needs 0 < eps <= 1/(q-1)^4")
    return 1.25 * eps * lg(1 / eps), eps * lg((q - 1) / eps), _digest(eps, q)


def _xlogx_monotone(x: float, y: float):
    _need(0.0 < x < y < 1.0, "needs 0 < x < y < 1")
    f = lambda t: t * lg(1 / t)  # noqa: E731
    e = 1 / math.e
    if y <= e:
        return f(y), f(x), _digest(x, y)
    _need(x >= e, "x and y must lie on the same side of 1/e")
    return f(x), f(y), _digest(x, y)


def _low_entropy_lower(p: DistQ):
    eps = _eps_of(p)
    _need(0.0 <= eps < 1.0, "needs 0 <= eps < 1")
    rhs = 0.0 if eps == 0.0 else eps * lg(1 / eps) / lg(p.q)
    return entropy_norm(p), rhs, _digest(p)


def _low_entropy_upper(p: DistQ):
    q, eps = p.q, _eps_of(p)
    _need(0.0 < eps <= _low_eps_cap(q), "needs 0 < eps <= min(1/500, 1/(q-1)^4)")
    return 17 * eps * lg(1 / eps) / (12 * lg(q)), entropy_norm(p), _digest(p)


def _low_entropy_sum_gain(x: DistQ, y: DistQ):
    q = _same_q(x, y)
    hx, hy = entropy_norm(x), entropy_norm(y)
    _need(hx >= hy, "needs H(X) >= H(Y)")
    cap = _low_eps_cap(q)
    _need(0.0 < _eps_of(x) <= cap and 0.0 < _eps_of(y) <= cap,
          "needs 0 < eps, eps' <= min(1/500, 1/(q-1)^4)")
    lhs = entropy_norm(convolve(x, y)) - (2 * hx + hy) / 3
    return lhs, symmetric_entropy(hy) / 51.0, _digest(x, y)


def _taylor_terms(t: float, q: int):
    _need(q >= 2, "alphabet size must be at least 2")
    _need(-1.0 / q <= t <= (q - 1) / q, "needs -1/q <= t <= (q-1)/q")
    lq = math.log(q)
    base = 1.0 / q + (1 - 1 / lq) * t
    lower = base - q / lq * t * t
    upper = base - q * (q * lq - (q - 1)) / ((q - 1) ** 2 * lq) * t * t
    return lower, _f(1.0 / q + t, q), upper


def _taylor_lower(t: float, q: int):
    lower, mid, _ = _taylor_terms(t, q)
    return mid, lower, _digest(t, q)


def _taylor_upper(t: float, q: int):
    _, mid, upper = _taylor_terms(t, q)
    return upper, mid, _digest(t, q)


def _near_uniform_lower(p: DistQ):
    q, d = p.q, _delta_of(p)
    return entropy_norm(p), 1 - q * q / math.log(q) * d * d, _digest(p)


def _near_uniform_upper(p: DistQ):
    q, d = p.q, _delta_of(p)
    lq = math.log(q)
    return 1 - q * q * (q * lq - (q - 1)) / ((q - 1) ** 3 * lq) * d * d, entropy_norm(p), _digest(p)


def _near_uniform_sum_gain(x: DistQ, y: DistQ):
    q = _same_q(x, y)
    hx, hy = entropy_norm(x), entropy_norm(y)
    _need(hx >= hy, "needs H(X) >= H(Y)")
    cap = 1.0 / (2 * q * q)
    _need(0.0 < _delta_of(x) <= cap and 0.0 < _delta_of(y) <= cap, "needs 0 < delta, delta' <= 1/(2q^2)")
    lhs = entropy_norm(convolve(x, y)) - hx
    return lhs, math.log(q) / (16 * q * q) * symmetric_entropy(hx), _digest(x, y)


def _max_entropy(a: DistQ, b: DistQ):
    r = check_max_ineq(a, b)
    return r.lhs, r.rhs, r.inputs


def _weighted_average_gain(a: DistQ, b: DistQ):
    r = check_wtavg(a, b)
    return r.lhs, r.rhs, r.inputs


CATALOG = {
    "strong_convexity": _strong_convexity,
    "shift_mixture_gain": _shift_mixture_gain,
    "cyclic_shift_distance": _cyclic_shift_distance,
    "tail_bound": _tail_bound,
    "log_ratio_domination": _log_ratio_domination,
    "xlogx_monotone": _xlogx_monotone,
    "low_entropy_lower": _low_entropy_lower,
    "low_entropy_upper": _low_entropy_upper,
    "low_entropy_sum_gain": _low_entropy_sum_gain,
    "taylor_lower": _taylor_lower,
    "taylor_upper": _taylor_upper,
    "near_uniform_lower": _near_uniform_lower,
    "near_uniform_upper": _near_uniform_upper,
    "near_uniform_sum_gain": _near_uniform_sum_gain,
    "max_entropy": _max_entropy,
    "weighted_average_gain": _weighted_average_gain,
}


def verify_bound(bound_id: str, *operands) -> BoundCheckReport:
    """Evaluate one catalog inequality on the given operands."""
    try:
        fn = CATALOG[bound_id]
    except KeyError:
        raise PolarError(f"unknown bound id {bound_id!r}") from None
    lhs, rhs, digest = fn(*operands)
    cases = ()
    if bound_id == "weighted_average_gain":
        cases = check_wtavg(*operands).cases
    return _report(bound_id, digest, lhs, rhs, cases)


# -- hypothesis-respecting random operands ------------------------------------------------


def random_dist(q: int, rng) -> DistQ:
    """Dirichlet draw with log-uniform concentration in [0.02, 50] (spans all entropies)."""
    conc = math.exp(rng.uniform(math.log(0.02), math.log(50.0)))
    p = rng.dirichlet(np.full(q, conc))
    return DistQ(p / p.sum())


def _concentrated(q, eps, rng):
    """Mass 1 - eps on a random symbol, the rest spread at random."""
    rest = rng.dirichlet(np.full(q - 1, math.exp(rng.uniform(math.log(0.1), math.log(10.0)))))
    p = np.empty(q)
    j = int(rng.integers(q))
    p[j] = 1 - eps
    p[np.arange(q) != j] = eps * rest
    return DistQ(p / p.sum())


def _near_uniform(q, delta, rng):
    """p = 1/q + d with sum(d) = 0 and max |d| = delta."""
    d = rng.standard_normal(q)
    d -= d.mean()
    d *= delta / np.abs(d).max()
    return DistQ(1.0 / q + d)


def _log_uniform(rng, lo, hi):
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def random_operands(bound_id: str, q: int, rng):
    """One operand tuple satisfying the hypotheses of ``bound_id`` on alphabet q."""
    if bound_id in ("strong_convexity",):
        return random_dist(q, rng), random_dist(q, rng), float(rng.uniform())
    if bound_id == "shift_mixture_gain":
        lam = random_dist(q, rng)
        i = int(lam.probs.argmax())
        j = int(rng.choice([k for k in range(q) if k != i]))
        return random_dist(q, rng), lam, i, j
    if bound_id == "cyclic_shift_distance":
        i, j = rng.choice(q, 2, replace=False)
        return random_dist(q, rng), int(i), int(j)
    if bound_id == "tail_bound":
        return (_log_uniform(rng, 1e-12, 1 / 500),)
    if bound_id == "log_ratio_domination":
        return _log_uniform(rng, 1e-12, 1.0 / (q - 1) ** 4), q
    if bound_id == "xlogx_monotone":
        e = 1 / math.e
        lo, hi = (1e-9, e) if rng.uniform() < 0.5 else (e, 1 - 1e-9)
        x, y = sorted(rng.uniform(lo, hi, 2))
        return float(x), float(y) if y > x else float(np.nextafter(x, 1))
    if bound_id == "low_entropy_lower":
        return (_concentrated(q, float(rng.uniform(0.0, (q - 1) / q)), rng),)
    if bound_id == "low_entropy_upper":
        return (_concentrated(q, _log_uniform(rng, 1e-12, _low_eps_cap(q)), rng),)
    if bound_id == "low_entropy_sum_gain":
        cap = _low_eps_cap(q)
        x = _concentrated(q, _log_uniform(rng, 1e-12, cap), rng)
        y = _concentrated(q, _log_uniform(rng, 1e-12, cap), rng)
        return (x, y) if entropy_norm(x) >= entropy_norm(y) else (y, x)
    if bound_id in ("taylor_lower", "taylor_upper"):
        return float(rng.uniform(-1.0 / q, (q - 1) / q)), q
    if bound_id in ("near_uniform_lower", "near_uniform_upper"):
        return (random_dist(q, rng),)
    if bound_id == "near_uniform_sum_gain":
        cap = 1.0 / (2 * q * q)
        x = _near_uniform(q, _log_uniform(rng, 1e-9, cap), rng)
        y = _near_uniform(q, _log_uniform(rng, 1e-9, cap), rng)
        return (x, y) if entropy_norm(x) >= entropy_norm(y) else (y, x)
    if bound_id in ("max_entropy", "weighted_average_gain"):
        return random_dist(q, rng), random_dist(q, rng)
    raise PolarError(f"unknown bound id {bound_id!r}")


def applicable_bounds(q: int) -> list:
    """Catalog ids whose hypotheses can hold on alphabet q."""
    ids = list(CATALOG)
    if not is_prime(q):
        ids = [b for b in ids if b not in ("cyclic_shift_distance", "weighted_average_gain")]
    return ids


def sweep(q: int, trials: int, seed: int = 0, bound_ids=None):
    """Yield reports for ``trials`` random operand tuples per applicable bound."""
    rng = np.random.default_rng(seed)
    for bid in bound_ids or applicable_bounds(q):
        for _ in range(trials):
            yield verify_bound(bid, *random_operands(bid, q, rng))
