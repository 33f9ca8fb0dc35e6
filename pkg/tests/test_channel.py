import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpolar import errors
from qpolar.channel import (
    JointChannel,
    bhattacharyya,
    channel_entropy,
    format_channel,
    make_qsc,
    merge_equivalent_outputs,
    minus_transform,
    ml_error_prob,
    noiseless_channel,
    parse_channel,
    plus_transform,
    qsc_with_entropy,
    random_channel,
    sample_joint,
    sample_outputs,
)

from _oracles import channel_entropy_oracle, minus_oracle, plus_oracle, z_by_d_oracle

seeds = st.integers(0, 2**32 - 1)
primes = st.sampled_from([2, 3, 5])


def uniform_atom(q):
    return JointChannel([1.0], [np.full(q, 1.0 / q)])


def test_entropy_examples():
    assert channel_entropy(uniform_atom(4)) == pytest.approx(1.0, abs=1e-15)
    assert channel_entropy(noiseless_channel(3)) == 0.0
    w = JointChannel([0.5, 0.5], [[1, 0], [0.5, 0.5]])
    assert channel_entropy(w) == pytest.approx(0.5, abs=1e-15)


def test_minus_examples():
    m = minus_transform(uniform_atom(3))
    assert m.num_atoms == 1 and channel_entropy(m) == pytest.approx(1.0, abs=1e-15)
    assert channel_entropy(minus_transform(noiseless_channel(3))) == 0.0
    m = minus_transform(JointChannel.source([0.75, 0.25]))
    assert m.num_atoms == 1
    assert np.allclose(m.posteriors[0], [0.625, 0.375], atol=1e-15)


def test_plus_examples():
    assert channel_entropy(plus_transform(noiseless_channel(5))) == 0.0
    assert channel_entropy(plus_transform(uniform_atom(3))) == pytest.approx(1.0, abs=1e-15)


def test_bhattacharyya_examples():
    assert bhattacharyya(noiseless_channel(3)).z_max == 0.0
    assert bhattacharyya(uniform_atom(5)).z_max == pytest.approx(1.0, abs=1e-15)
    st_ = bhattacharyya(JointChannel.source([0.9, 0.1]))
    assert st_.z_by_d[0] == pytest.approx(0.6, abs=1e-15)
    assert st_.symmetric_entropy == pytest.approx(st_.entropy * (1 - st_.entropy))


def test_ml_error_examples():
    assert ml_error_prob(noiseless_channel(4)) == 0.0
    assert ml_error_prob(JointChannel([0.5, 0.5], [[0.5, 0.5], [1, 0]])) == pytest.approx(0.5)
    assert ml_error_prob(JointChannel.source([0.9, 0.1])) == pytest.approx(0.1, abs=1e-15)


def test_merge_examples():
    w = JointChannel([0.25, 0.25, 0.5], [[0.3, 0.7], [0.3, 0.7], [0.9, 0.1]])
    m = merge_equivalent_outputs(w)
    assert m.num_atoms == 2
    assert channel_entropy(m) == pytest.approx(channel_entropy(w), abs=1e-12)
    v = random_channel(3, 5, seed=2)
    assert merge_equivalent_outputs(v).num_atoms == v.num_atoms
    a = merge_equivalent_outputs(JointChannel([0.5, 0.5], [[0.5, 0.5], [0.51, 0.49]]), tol=0.05)
    assert a.num_atoms == 1 and a.approximate
    assert a.entropy_change == pytest.approx(channel_entropy(a) - channel_entropy(JointChannel([0.5, 0.5], [[0.5, 0.5], [0.51, 0.49]])))
    with pytest.raises(errors.PolarError):
        merge_equivalent_outputs(w, tol=-1)


def test_merge_keeps_tracked_qsc_small():
    w = make_qsc(2, 0.11)
    ch = w
    for _ in range(4):
        ch = merge_equivalent_outputs(minus_transform(ch))
    assert ch.num_atoms < (2 * 2) ** 16


def test_qsc():
    assert channel_entropy(make_qsc(3, 0.0)) == 0.0
    assert channel_entropy(make_qsc(3, 2 / 3)) == pytest.approx(1.0, abs=1e-12)
    for q in (2, 3, 5):
        assert abs(channel_entropy(qsc_with_entropy(q, 0.5)) - 0.5) <= 1e-9
    with pytest.raises(errors.InvalidDistributionError):
        make_qsc(3, 0.9)


def test_validation():
    with pytest.raises(errors.InvalidDistributionError):
        JointChannel([0.5, 0.4], [[1, 0], [0, 1]])
    with pytest.raises(errors.InvalidDistributionError):
        JointChannel([1.0], [[0.6, 0.6]])
    with pytest.raises(errors.InvalidDistributionError):
        JointChannel([0.0], [[0.5, 0.5]])
    assert JointChannel([0.0, 1.0], [[1, 0], [0.5, 0.5]]).num_atoms == 1


def test_text_round_trip():
    w = random_channel(5, 6, seed=8)
    back = parse_channel(format_channel(w))
    assert np.array_equal(back.weights, w.weights) and np.array_equal(back.posteriors, w.posteriors)
    for bad in ["q=2;atoms=1\nw=1;p=0.5\n", "q=2;atoms=2\nw=1;p=0.5,0.5\n", "atoms=1\n"]:
        with pytest.raises(errors.FormatError):
            parse_channel(bad)


def test_sampling():
    w = random_channel(3, 4, seed=5)
    x, y = sample_joint(w, 200_000, seed=1)
    emp = np.zeros((w.num_atoms, 3))
    np.add.at(emp, (y, x), 1)
    assert np.abs(emp / 200_000 - w.joint()).max() < 0.01
    assert np.array_equal(sample_joint(w, 50, seed=3)[0], sample_joint(w, 50, seed=3)[0])
    out = sample_outputs(noiseless_channel(3), np.array([2, 0, 1]), seed=0)
    assert out.tolist() == [2, 0, 1]


@settings(max_examples=60)
@given(primes, seeds)
def test_transforms_match_oracles(q, seed):
    w = random_channel(q, 4, seed=seed)
    for fn, oracle in ((minus_transform, minus_oracle), (plus_transform, plus_oracle)):
        W, P = oracle(w.weights.tolist(), w.posteriors.tolist())
        got = fn(w)
        assert channel_entropy(got) == pytest.approx(channel_entropy_oracle(W, P), abs=1e-12)
        assert np.allclose(bhattacharyya(got).z_by_d, z_by_d_oracle(W, P), atol=1e-12, rtol=0)


@settings(max_examples=200)
@given(primes, seeds)
def test_conservation_ordering_and_z_laws(q, seed):
    w = random_channel(q, 8, seed=seed)
    h, hm, hp = (channel_entropy(c) for c in (w, minus_transform(w), plus_transform(w)))
    assert abs(hm + hp - 2 * h) <= 1e-9
    assert hp <= h + 1e-12 and h <= hm + 1e-12
    z, zm, zp = (bhattacharyya(c).z_max for c in (w, minus_transform(w), plus_transform(w)))
    assert zp <= z * z + 1e-9
    assert zm <= q ** 3 * z + 1e-9
    assert z * z <= (q - 1) ** 2 * h + 1e-9
    assert ml_error_prob(w) <= (q - 1) * z + 1e-9


@settings(max_examples=100)
@given(st.integers(2, 6), seeds)
def test_lossless_merge_preserves_statistics(q, seed):
    w = random_channel(q, 6, seed=seed)
    dup = JointChannel(np.concatenate([w.weights, w.weights]) / 2, np.vstack([w.posteriors, w.posteriors]))
    m = merge_equivalent_outputs(dup)
    assert m.num_atoms <= w.num_atoms
    assert channel_entropy(m) == pytest.approx(channel_entropy(dup), abs=1e-12)
    assert np.allclose(bhattacharyya(m).z_by_d, bhattacharyya(dup).z_by_d, atol=1e-12, rtol=0)
    assert ml_error_prob(m) == pytest.approx(ml_error_prob(dup), abs=1e-12)


def test_entropy_equals_bits_definition():
    w = random_channel(4, 5, seed=0)
    direct = -sum(wk * sum(p * math.log(p, 4) for p in row if p > 0) for wk, row in zip(w.weights, w.posteriors))
    assert channel_entropy(w) == pytest.approx(direct, abs=1e-12)
