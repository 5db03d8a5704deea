import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from motorhrl.nn import Adam
from motorhrl.skills import (
    DegenerateEmbeddingError,
    DiscreteSkill,
    SkillEncoder,
    encode,
    min_pairwise_distance,
    sample_random_skill,
    sample_skill,
    sd_loss,
    unit_embedding,
)


def encoder_with(table, **kw):
    enc = SkillEncoder(n_skills=len(table), dim=len(table[0]), **kw)
    enc.table.data[:] = np.asarray(table, np.float32)
    return enc


def test_zero_table_encodes_zero():
    enc = encoder_with(np.zeros((10, 7)))
    assert np.all(encode(enc, 3).data == 0)


def test_encode_is_lookup():
    table = np.arange(21.0).reshape(3, 7)
    enc = encoder_with(table)
    np.testing.assert_array_equal(encode(enc, DiscreteSkill(2, 3)).data, table[2])


def test_out_of_range_skill():
    enc = SkillEncoder()
    with pytest.raises(IndexError):
        encode(enc, 10)
    with pytest.raises(IndexError):
        DiscreteSkill(-1)


def test_encode_gradient_touches_one_row():
    enc = SkillEncoder(rng=np.random.default_rng(0))
    encode(enc, 4).sum().backward()
    touched = np.flatnonzero(np.abs(enc.table.grad).sum(axis=1))
    assert touched.tolist() == [4]


def test_zero_sigma_returns_mean(rng):
    enc = SkillEncoder(sigma_z=0.0, rng=rng)
    s = sample_skill(enc, 5, rng)
    np.testing.assert_array_equal(s.raw, enc.table.data[5])
    np.testing.assert_allclose(s.squashed, np.tanh(s.raw))


def test_sampled_skills_stay_inside_box(rng):
    enc = encoder_with(np.zeros((10, 7)), sigma_z=3.0)
    s = sample_skill(enc, rng.integers(0, 10, 1000), rng)
    assert np.all(np.abs(s.squashed) < 1)


def test_sample_mean_matches_embedding(rng):
    enc = SkillEncoder(sigma_z=0.3, rng=rng)
    n = 100_000
    raw = sample_skill(enc, np.full(n, 2), rng).raw.astype(np.float64)
    assert np.all(np.abs(raw.mean(axis=0) - enc.table.data[2]) < 3 * 0.3 / math.sqrt(n))


def test_random_skills(rng):
    s = sample_random_skill(7, rng, 100_000)
    assert s.squashed.shape == (100_000, 7)
    assert np.all(np.abs(s.squashed) < 1)
    assert np.all(np.abs(s.squashed.mean(axis=0)) < 0.02)
    assert sample_random_skill(7, rng).squashed.shape == (7,)


def test_unit_embedding_cases():
    v = np.array([0.6, 0.8, 0, 0, 0, 0, 0])
    np.testing.assert_allclose(unit_embedding(encoder_with([v]), 0).data, np.tanh(v), rtol=1e-6)
    big = encoder_with([[10.0, 0, 0, 0, 0, 0, 0]])
    np.testing.assert_allclose(unit_embedding(big, 0).data, [np.tanh(10) / 10, 0, 0, 0, 0, 0, 0], rtol=1e-6)
    mu = np.array([0.3, -0.2, 0.1, 0.5, 0, 0, 0.2])
    assert not np.allclose(unit_embedding(encoder_with([mu]), 0).data, unit_embedding(encoder_with([2 * mu]), 0).data)


def test_tanh_normalization_gives_unit_vectors(rng):
    enc = SkillEncoder(rng=rng, normalize="tanh")
    np.testing.assert_allclose(np.linalg.norm(unit_embedding(enc).data, axis=1), 1.0, rtol=1e-5)


def test_degenerate_row():
    enc = encoder_with(np.zeros((2, 3)))
    with pytest.raises(DegenerateEmbeddingError):
        unit_embedding(enc, 0)
    with pytest.raises(DegenerateEmbeddingError):
        sd_loss(enc)


def test_sd_loss_single_skill():
    assert sd_loss(encoder_with([[0.3, 0.1]])).item() == 0.0


def test_sd_loss_antipodal_unit_vectors():
    # tanh normalization makes the unit embeddings exactly +-e1
    enc = encoder_with([[1.0, 0.0], [-1.0, 0.0]], normalize="tanh")
    assert sd_loss(enc).item() == pytest.approx(-2.0, abs=1e-5)


def test_three_skill_optimum_on_circle():
    # brute force over angle triples on a grid; the best sum of pairwise chords is 3*sqrt(3)
    angles = np.linspace(0, 2 * np.pi, 72, endpoint=False)
    pts = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    best = 0.0
    for i, j in itertools.combinations(range(len(angles)), 2):
        d = np.linalg.norm(pts[i] - pts[j]) + np.linalg.norm(pts - pts[i], axis=1) + np.linalg.norm(pts - pts[j], axis=1)
        best = max(best, d.max())
    assert best == pytest.approx(3 * math.sqrt(3), rel=1e-9)
    # the encoder attains it with directions at 120 degrees (tanh normalization -> exact unit vectors)
    rows = [np.arctanh(0.5 * np.array([math.cos(a), math.sin(a)])) for a in (0, 2 * np.pi / 3, 4 * np.pi / 3)]
    assert sd_loss(encoder_with(rows, normalize="tanh")).item() == pytest.approx(-3 * math.sqrt(3), rel=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sd_loss_permutation_invariant(seed):
    r = np.random.default_rng(seed)
    table = r.normal(0, 0.5, (6, 4)) + 0.01
    perm = r.permutation(6)
    assert sd_loss(encoder_with(table)).item() == pytest.approx(sd_loss(encoder_with(table[perm])).item(), rel=1e-5)


def test_sd_loss_decreases_over_first_updates():
    enc = SkillEncoder(rng=np.random.default_rng(3))
    opt = Adam(enc.parameters(), lr=1e-5)
    start = sd_loss(enc).item()
    for _ in range(100):
        opt.zero_grad()
        sd_loss(enc).backward()
        opt.step()
    assert sd_loss(enc).item() < start


def test_min_pairwise_distance():
    assert min_pairwise_distance(np.array([[0.0, 0], [3, 4], [0, 1]])) == pytest.approx(1.0)
    assert min_pairwise_distance(np.zeros((1, 3))) == 0.0
