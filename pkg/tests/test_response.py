import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from reluclosure.geometry import CellSignature, HalfSpace
from reluclosure.response import (DimensionMismatch, EffectiveTuple, GeneralizedResponse, InvalidResponse,
                                  NetworkConfig, OnBreakline, SharedBreakline, SignatureMismatch, Summand,
                                  canonical_reduce, cell_affine, eval_generalized, eval_network, eval_tuple,
                                  from_effective, response_gradient, step_response, switch_sides,
                                  to_effective, tuple_to_generalized, validate)

weights = st.floats(-5, 5, allow_nan=False)


@st.composite
def networks(draw, d_in=None):
    d_in = d_in or draw(st.integers(1, 3))
    d = draw(st.integers(0, 4))
    W1 = draw(arrays(float, (d, d_in), elements=weights))
    if d and draw(st.booleans()):
        W1[0] = 0.0  # degenerate neuron
    return NetworkConfig(W1, draw(arrays(float, d, elements=weights)), draw(arrays(float, d, elements=weights)),
                         draw(weights), d_in)


def test_eval_network_example():
    cfg = NetworkConfig([[1.0]], [0.0], [1.0], 0.0)
    assert eval_network(cfg, [2.0]) == 2.0
    assert eval_network(cfg, [-2.0]) == 0.0


def test_zero_neuron_network_is_constant():
    cfg = NetworkConfig(np.zeros((0, 2)), [], [], 1.5, 2)
    assert np.all(eval_network(cfg, np.ones((4, 2))) == 1.5)


def test_dimension_mismatch():
    cfg = NetworkConfig([[1.0, 2.0]], [0.0], [1.0], 0.0)
    with pytest.raises(DimensionMismatch):
        eval_network(cfg, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatch):
        NetworkConfig([[1.0, 2.0]], [0.0, 1.0], [1.0], 0.0)


def test_to_effective_example():
    t = to_effective(NetworkConfig([[3.0, 4.0]], [5.0], [2.0], 0.0))
    assert np.allclose(t.normals, [[0.6, 0.8]])
    assert np.allclose(t.offsets, [-1.0]) and np.allclose(t.kinks, [10.0])


def test_degenerate_neuron_folds_into_bias():
    t = to_effective(NetworkConfig([[0.0, 0.0]], [2.0], [3.0], 1.0))
    assert t.kinks[0] == 0.0 and t.offsets[0] == 0.0
    assert np.array_equal(t.normals[0], [1.0, 0.0])
    assert t.bias == 7.0


@given(networks())
@settings(max_examples=200, deadline=None)
def test_representation_equivalence(cfg):
    X = np.random.default_rng(0).uniform(-3, 3, (20, cfg.d_in))
    a = eval_network(cfg, X)
    b = eval_tuple(to_effective(cfg), X)
    assert np.max(np.abs(a - b), initial=0.0) < 1e-10 * max(1.0, np.max(np.abs(a), initial=0.0))
    assert np.allclose(eval_network(from_effective(to_effective(cfg)), X), a, atol=1e-10)


@given(networks(), st.floats(0.01, 100))
@settings(max_examples=100, deadline=None)
def test_positive_rescaling_invariance(cfg, c):
    scaled = NetworkConfig(c * cfg.W1, c * cfg.b1, cfg.W2 / c, cfg.b2, cfg.d_in)
    X = np.random.default_rng(1).uniform(-2, 2, (10, cfg.d_in))
    a, b = eval_network(cfg, X), eval_network(scaled, X)
    assert np.max(np.abs(a - b), initial=0.0) <= 1e-12 * max(1.0, np.max(np.abs(a), initial=0.0)) * 100
    ta, tb = to_effective(cfg), to_effective(scaled)
    assert np.allclose(ta.normals, tb.normals, atol=1e-12) and np.allclose(ta.offsets, tb.offsets, atol=1e-12)


def test_theta_roundtrip_order():
    cfg = NetworkConfig([[1.0, 2.0], [3.0, 4.0]], [5.0, 6.0], [7.0, 8.0], 9.0)
    th = cfg.theta()
    assert th.tolist() == [1, 2, 3, 4, 5, 6, 7, 8, 9]
    back = NetworkConfig.from_theta(th, 2, 2)
    assert np.array_equal(back.W1, cfg.W1)


def test_response_gradient():
    t = EffectiveTuple([[1.0, 0.0]], [0.0], [2.0], 0.0)
    assert np.allclose(response_gradient(t, [1.0, 0.0]), [2.0, 0.0])
    assert np.allclose(response_gradient(t, [-1.0, 0.0]), [0.0, 0.0])
    with pytest.raises(OnBreakline):
        response_gradient(t, [0.0, 0.3])


def test_tuple_embedding_preserves_values(rng):
    t = to_effective(NetworkConfig(rng.standard_normal((3, 2)), rng.standard_normal(3), rng.standard_normal(3),
                                   0.4))
    r = tuple_to_generalized(t)
    assert validate(r) == []
    X = rng.uniform(-1, 1, (200, 2))
    assert np.allclose(eval_generalized(r, X), eval_tuple(t, X), atol=1e-12)
    assert all(s.multiplicity == 1 for s in r.summands)


def test_tuple_embedding_shared_breakline():
    t = EffectiveTuple([[1.0], [-1.0]], [0.5, -0.5], [1.0, 1.0], 0.0)
    with pytest.raises(SharedBreakline):
        tuple_to_generalized(t)


def test_step_response_values():
    r = step_response(HalfSpace([1.0], 0.0), 2.0)
    assert eval_generalized(r, [0.5]) == 2.0
    assert eval_generalized(r, [0.0]) == 0.0  # boundary counts as outside
    assert eval_generalized(r, [-0.5]) == 0.0


def test_validate_flags(f4):
    assert validate(f4) == []
    bad = GeneralizedResponse([0.0], 0.0, (Summand(HalfSpace([1.0], 0.0), [0.0], 1.0, 1),), 0, "c")
    assert [v.code for v in validate(bad)] == ["containment"]
    dup = GeneralizedResponse([0.0, 0.0], 0.0,
                              (Summand(HalfSpace([1.0, 0.0], 0.2), [0.0, 0.0], 1.0),
                               Summand(HalfSpace([-1.0, 0.0], -0.2), [0.0, 0.0], 1.0)), 0, "c")
    msgs = [str(v) for v in validate(dup)]
    assert any("pairwise distinct boundaries" in m for m in msgs)
    wrong_case = GeneralizedResponse([1.0, 0.0], 0.0, (Summand(HalfSpace([1.0, 0.0], 0.2), [0.0, 0.0], 1.0),),
                                     0, "c")
    assert "case" in {v.code for v in validate(wrong_case)}


def test_switch_sides_agrees_off_boundary(f4, rng):
    X = rng.uniform(-1, 1, (300, 2))
    for j in range(2):
        s = switch_sides(f4, j)
        assert np.allclose(eval_generalized(s, X), eval_generalized(f4, X), atol=1e-13)
    with pytest.raises(IndexError):
        switch_sides(f4, 5)


def test_canonical_reduce_merges_and_classifies(rng):
    h = HalfSpace([1.0, 0.0], 0.1)
    r = GeneralizedResponse([0.0, 0.0], 0.0,
                            (Summand(h, [0.0, 0.0], 1.0), Summand(h.opposite(), [0.0, 0.0], 0.5)), 0, "c")
    out, cls = canonical_reduce(r)
    assert len(out.summands) == 1 and cls.reduced_dimension <= r.dimension()
    assert not cls.representable and cls.strict_at(5)
    X = rng.uniform(-1, 1, (200, 2))
    X = X[np.abs(X[:, 0] - 0.1) > 1e-9]
    assert np.allclose(eval_generalized(out, X), eval_generalized(r, X), atol=1e-12)


def test_canonical_reduce_continuous_is_representable():
    r = GeneralizedResponse([0.0], 0.0, (Summand(HalfSpace([1.0], 0.0), [1.0], 0.0, 2),), 0, "c")
    out, cls = canonical_reduce(r)
    assert cls.representable and out.summands[0].multiplicity == 1
    assert cls.reduced_dimension == 1 and cls.strict_at(2) and not cls.strict_at(1)


def test_canonical_reduce_rejects_invalid():
    r = GeneralizedResponse([0.0], 0.0, (Summand(HalfSpace([1.0], 0.0), [0.0], 1.0, 3),), 0, "c")
    with pytest.raises(InvalidResponse):
        canonical_reduce(r)


def test_cell_affine(f4):
    g, b = cell_affine(f4, CellSignature((True, True)))
    assert np.allclose(g, 0.0) and b == 1.5
    with pytest.raises(SignatureMismatch):
        cell_affine(f4, CellSignature((True,)))


def test_from_effective_example():
    cfg = from_effective(EffectiveTuple([[1.0]], [1.0], [6.0], 1.0))
    assert cfg.W1.tolist() == [[1.0]] and cfg.b1.tolist() == [-1.0] and cfg.W2.tolist() == [6.0]
    assert cfg.b2 == 1.0
    empty = from_effective(EffectiveTuple(np.zeros((0, 1)), [], [], 2.5, 1))
    assert empty.width == 0 and empty.b2 == 2.5


def test_embedding_example():
    t = EffectiveTuple([[1.0]], [0.0], [2.0], 3.0)
    r = tuple_to_generalized(t)
    s, = r.summands
    assert s.multiplicity == 1 and s.delta.tolist() == [2.0] and s.jump == 0.0 and r.affine_const == 3.0
    assert eval_generalized(r, [1.5]) == 6.0


def test_gradient_examples():
    t = EffectiveTuple([[1.0], [-1.0]], [0.0, 0.0], [1.0, 1.0], 0.0)
    assert response_gradient(t, [0.5]).tolist() == [1.0]
    assert response_gradient(t, [-0.5]).tolist() == [-1.0]
    assert response_gradient(EffectiveTuple(np.zeros((0, 2)), [], [], 0.0, 2), [0.1, 0.2]).tolist() == [0, 0]


def test_validate_no_case_holds():
    r = GeneralizedResponse([1.0, 0.0], 0.0, (Summand(HalfSpace([0.0, 1.0], 0.0), [0.0, 0.0], 1.0, 2),), 0, "b")
    assert "case" in {v.code for v in validate(r)}


def test_canonical_reduce_examples(rng):
    _, cls = canonical_reduce(step_response(HalfSpace([1.0], 0.0)))
    assert (cls.reduced_dimension, cls.representable, cls.case_tag) == (2, False, "c")
    t = to_effective(NetworkConfig(rng.standard_normal((3, 2)), rng.standard_normal(3), rng.standard_normal(3), 0))
    _, cls = canonical_reduce(tuple_to_generalized(t))
    assert cls.reduced_dimension == 3 and cls.representable
    h = HalfSpace([1.0], 0.5)
    r = GeneralizedResponse([0.0], 0.0, (Summand(h, [2.0], -1.0, 2),), 0, "c")
    out, _ = canonical_reduce(r)
    assert out.summands[0].multiplicity == 1


@given(networks(d_in=2))
@settings(max_examples=50, deadline=None)
def test_reduce_never_increases_dimension(cfg):
    t = to_effective(cfg)
    keep = [j for j in range(t.width) if t.kinks[j] != 0]
    hs = t.halfspaces()
    if any(hs[i].same_boundary(hs[j]) for i in keep for j in keep if i < j):
        return
    t = EffectiveTuple(t.normals[keep], t.offsets[keep], t.kinks[keep], t.bias, 2)
    r = tuple_to_generalized(t)
    out, cls = canonical_reduce(r)
    assert cls.reduced_dimension <= r.dimension()
    assert validate(out) == []
    X = np.random.default_rng(0).uniform(-3, 3, (50, 2))
    assert np.allclose(eval_generalized(out, X), eval_generalized(r, X), atol=1e-9 * (1 + np.abs(t.kinks).sum()))


def test_cell_affine_matches_evaluation(f4, rng):
    g, b = cell_affine(f4, CellSignature((True, False)))
    assert b == 1.0
    X = rng.uniform(-1, 1, (200, 2))
    for x in X:
        sig = CellSignature(tuple(bool(s.halfspace.signed_distance(x) > 1e-12) for s in f4.summands))
        g, b = cell_affine(f4, sig)
        assert abs(g @ x + b - eval_generalized(f4, x)) < 1e-12


def test_switch_sides_examples(rng):
    r = step_response(HalfSpace([1.0], 0.0))
    s = switch_sides(r, 0)
    assert s.affine_const == 1.0 and s.summands[0].jump == -1.0
    assert np.allclose(s.summands[0].halfspace.normal, [-1.0])
    for x in (0.5, -0.5):
        assert eval_generalized(s, [x]) == eval_generalized(r, [x])
    X = rng.uniform(-1, 1, (100, 1))
    assert np.allclose(eval_generalized(switch_sides(s, 0), X), eval_generalized(r, X), atol=1e-12)
    assert validate(s) == []
