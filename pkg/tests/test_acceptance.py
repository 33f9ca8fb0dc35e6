"""End-to-end acceptance checks, one test per criterion.

A verdict line per criterion is printed in the "acceptance criteria" section
of the pytest terminal summary.
"""

import functools
import itertools
import time

import numpy as np
import pytest

from qpolar.channel import (
    bhattacharyya,
    channel_entropy,
    minus_transform,
    ml_error_prob,
    noiseless_channel,
    plus_transform,
    qsc_with_entropy,
    random_channel,
    sample_joint,
)
from qpolar.codec import (
    build_multilevel_code,
    compress_many,
    multilevel_compress,
    multilevel_decompress,
    plane_entropies_bits,
    sc_decode_many,
)
from qpolar.construction import (
    CodeSpec,
    attach_z_bounds,
    contraction_ratio,
    estimate_index_stats_mc,
    exact_level_stats,
    polarization_profile,
    select_frozen,
    track_channels_exact,
)
from qpolar.gain import check_max_ineq, check_wtavg, conditional_gain, random_dist
from qpolar.transform import transform

from _oracles import kron_matrix, sc_oracle

CORPUS_QS = (2, 3, 5)
CORPUS_SIZE = 1000


@functools.lru_cache(maxsize=None)
def corpus(q):
    """1000 seeded random channels with at most 8 atoms, with their minus/plus children."""
    rng = np.random.default_rng([2024, q])
    out = []
    for _ in range(CORPUS_SIZE):
        w = random_channel(q, 8, seed=rng)
        out.append((w, minus_transform(w), plus_transform(w)))
    return out


@functools.lru_cache(maxsize=None)
def lambda_hat(q):
    ratios = [r for w, _, _ in corpus(q) if (r := contraction_ratio(w)) is not None]
    return max(ratios), len(ratios)


@pytest.mark.criterion(1)
def test_transform_equals_matrix_oracle(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    checked = 0
    for q in (2, 3, 5):
        for n in range(0, 5):
            M = kron_matrix(n)
            if n <= 2:
                X = np.array(list(itertools.product(range(q), repeat=1 << n)))
            else:
                X = rng.integers(0, q, (1000, 1 << n))
            assert np.array_equal(transform(X, q), X @ M.T % q)
            checked += len(X)
    elapsed = time.perf_counter() - t0
    record(1, None, f"{checked} vectors exact, {elapsed:.2f} s")
    assert elapsed < 5


@pytest.mark.criterion(2)
def test_conservation_and_ordering(record):
    worst_cons, worst_order = 0.0, -np.inf
    for q in CORPUS_QS:
        for w, m, p in corpus(q):
            h, hm, hp = channel_entropy(w), channel_entropy(m), channel_entropy(p)
            worst_cons = max(worst_cons, abs(hm + hp - 2 * h))
            worst_order = max(worst_order, hp - h, h - hm)
    record(2, None, f"max |H-+H+-2H| = {worst_cons:.2e}, max ordering violation = {worst_order:.2e}")
    assert worst_cons <= 1e-9
    assert worst_order <= 1e-12


@pytest.mark.criterion(3)
def test_inequality_suite(record):
    t0 = time.perf_counter()
    worst = np.inf
    for q in (2, 3, 5, 7):
        rng = np.random.default_rng([3, q])
        for _ in range(10_000):
            a, b = random_dist(q, rng), random_dist(q, rng)
            r1, r2 = check_max_ineq(a, b), check_wtavg(a, b)
            worst = min(worst, r1.margin, r2.margin)
            assert r1.margin >= -1e-12, r1
            assert r2.margin >= -1e-12, r2
    alphas = {}
    for q in CORPUS_QS:
        ratios = []
        for w, _, _ in corpus(q):
            g = conditional_gain(w)
            assert g >= -1e-12
            t = channel_entropy(w) * (1 - channel_entropy(w))
            if t > 1e-6:
                ratios.append(g / t)
        alphas[q] = min(ratios)
    elapsed = time.perf_counter() - t0
    record(3, None, f"min margin {worst:.2e}; min gain/T " + ", ".join(f"q={q}: {a:.4f}" for q, a in alphas.items())
           + f"; {elapsed:.1f} s")
    assert all(a > 0 for a in alphas.values())
    assert elapsed < 120


@pytest.mark.criterion(4)
def test_bhattacharyya_laws(record):
    slack = -np.inf
    for q in CORPUS_QS:
        for w, m, p in corpus(q):
            z, zm, zp = (bhattacharyya(c).z_max for c in (w, m, p))
            h = channel_entropy(w)
            gaps = (zp - z * z, zm - q ** 3 * z, z * z - (q - 1) ** 2 * h, ml_error_prob(w) - (q - 1) * z)
            slack = max(slack, *gaps)
            assert all(g <= 1e-9 for g in gaps)
    record(4, None, f"largest lhs - rhs over all four laws: {slack:.2e}")


@pytest.mark.criterion(5)
def test_sc_decoder_equals_sequential_ml(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    decisions = 0
    for q in (2, 3):
        X = np.array(list(itertools.product(range(q), repeat=4)))
        for _ in range(20):
            frozen = tuple(sorted(int(v) for v in rng.choice(4, int(rng.integers(0, 5)), replace=False)))
            for _ in range(3):
                w = random_channel(q, 4, seed=rng)
                spec = CodeSpec(q, 2, frozen, w)
                Y = rng.integers(0, w.num_atoms, X.shape)
                P = compress_many(X, spec)
                _, uh = sc_decode_many(P, Y, spec)
                for b in range(len(X)):
                    assert uh[b].tolist() == sc_oracle(P[b], Y[b], frozen, w.posteriors, q, 2)
                    decisions += 4
    elapsed = time.perf_counter() - t0
    record(5, None, f"{decisions} decisions identical, {elapsed:.1f} s")
    assert elapsed < 60


@pytest.mark.criterion(6)
def test_sqrt_t_contraction(record):
    found = {q: lambda_hat(q) for q in CORPUS_QS}
    record(6, None, "Lambda_hat " + ", ".join(f"q={q}: {v:.4f} ({k} channels)" for q, (v, k) in found.items()))
    assert all(v < 1 for v, _ in found.values())


@pytest.mark.criterion(7)
def test_polarization_profile(record):
    t0 = time.perf_counter()
    w = qsc_with_entropy(3, 0.5)
    assert abs(channel_entropy(w) - 0.5) <= 1e-9
    profiles = [polarization_profile(s, 0.05) for s in exact_level_stats(w, 6)]
    elapsed = time.perf_counter() - t0
    means = np.array([p.mean_sqrt_T for p in profiles])
    ratios = means[1:] / means[:-1]
    frac = np.array([p.frac_low + p.frac_high for p in profiles])
    lam = lambda_hat(3)[0]
    record(7, None, "E[sqrt T] " + " ".join(f"{m:.4f}" for m in means)
           + "; polarized fraction " + " ".join(f"{f:.4f}" for f in frac) + f"; {elapsed:.1f} s")
    assert np.all(np.diff(means) < 0)
    assert np.all(ratios <= lam + 0.02)
    assert np.all(np.diff(frac) >= 0)
    assert elapsed < 120
    assert frac[-1] >= 0.6


@pytest.mark.criterion(8)
def test_end_to_end_compression(record):
    t0 = time.perf_counter()
    w = qsc_with_entropy(3, 0.5)
    stats = estimate_index_stats_mc(w, 12, 100_000, seed=2024)
    spec = select_frozen(stats, rate=0.6)
    blocks = 1000
    x, y = sample_joint(w, blocks * spec.N, seed=99)
    X, Y = x.reshape(blocks, spec.N), y.reshape(blocks, spec.N)
    failures = 0
    for s in range(0, blocks, 100):
        xh, _ = sc_decode_many(compress_many(X[s:s + 100], spec), Y[s:s + 100], spec)
        failures += int(np.any(xh != X[s:s + 100], axis=1).sum())
    elapsed = time.perf_counter() - t0
    rate = failures / blocks
    p0 = min(spec.predicted_failure, 1.0)
    se = np.sqrt(p0 * (1 - p0) / blocks)
    record(8, None, f"empirical failure {rate:.4f}, union bound {spec.predicted_failure:.4f}, {elapsed:.0f} s")
    assert rate <= spec.predicted_failure + 3 * se
    assert elapsed < 600
    assert rate <= 0.05


@pytest.mark.criterion(9)
def test_composite_alphabet(record):
    worst = 0.0
    for seed in range(100):
        w = random_channel(6, 8, seed=seed)
        worst = max(worst, abs(plane_entropies_bits(w).sum() - channel_entropy(w) * np.log2(6)))
    assert worst <= 1e-9
    rng = np.random.default_rng(9)
    for n in range(0, 9):
        code = build_multilevel_code(noiseless_channel(6), n)
        X = rng.integers(0, 6, (20, 1 << n))
        assert np.array_equal(multilevel_decompress(multilevel_compress(X, code), X, code), X)
    record(9, None, f"max chain-rule error {worst:.2e} bits; noiseless round trips exact for n = 0..8")


@pytest.mark.criterion(10)
def test_z_bound_soundness(record):
    channels = [qsc_with_entropy(q, h) for q in CORPUS_QS for h in (0.1, 0.5, 0.9)]
    channels += [random_channel(q, 2, seed=s) for q in (2, 3) for s in range(3)]
    worst, count = -np.inf, 0
    for w in channels:
        for s in exact_level_stats(w, 4):
            attach_z_bounds(s)
            worst = max(worst, float(np.max(s.z - s.z_tilde)))
            count += s.N
            assert np.all(s.z <= s.z_tilde + 1e-9)
    record(10, None, f"{count} indices, largest z - bound {worst:.2e}")
