import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from groupseq import glm
from groupseq.dataset import SynthConfig, center_responses, whiten_groups
from groupseq.errors import NoConvergence, PreconditionError
from groupseq.glm import GlmModel, GlmSpec, MeanFunction
from groupseq.sequencer import ridge_risk, sequence_omp
from oracles import central_difference, instance, random_instance, toy_dataset

SOFTMAX = MeanFunction.SOFTMAX
IDENTITY = MeanFunction.IDENTITY


def class_data(seed, n=120, classes=3, sizes=(2, 1, 2, 3), sparsity=2, whiten=True):
    d = SynthConfig(seed=seed, n=n, group_sizes=list(sizes), costs=[1.0] * len(sizes), sparsity=sparsity,
                    n_classes=classes).generate()
    return whiten_groups(d)[0] if whiten else d


def naive_loss(d, model):
    spec = model.spec
    total = 0.0
    for i in range(d.n):
        z = [sum(model.w[p, k] * d.x[i, c] for k, c in enumerate(model.selected_columns)) for p in range(spec.p)]
        if spec.mean_fn is IDENTITY:
            phi = 0.5 * sum(v * v for v in z)
        else:
            phi = math.log(sum(math.exp(v) for v in z))
        total += phi - sum(d.y[i, p] * z[p] for p in range(spec.p))
    return total / d.n + 0.5 * spec.lam * float(np.sum(model.w ** 2))


def test_mean_function_examples():
    sm = GlmSpec(4, SOFTMAX)
    assert mean_eq(glm.mean_fn_eval(sm, np.zeros(4)), [0.25] * 4)
    assert glm.mean_fn_eval(GlmSpec(2, IDENTITY), [3.0, -1.0]).tolist() == [3.0, -1.0]
    out = glm.mean_fn_eval(GlmSpec(2, SOFTMAX), [1000.0, 0.0])
    mpmath.mp.dps = 50
    ref = [mpmath.mpf(1) / (1 + mpmath.exp(-1000)), mpmath.exp(-1000) / (1 + mpmath.exp(-1000))]
    assert np.all(np.isfinite(out))
    assert abs(out[0] - float(ref[0])) < 1e-15 and out[1] == float(ref[1])


def mean_eq(a, b):
    return np.allclose(a, b, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (5,), elements=st.floats(-1e6, 1e6)))
def test_softmax_is_a_distribution(z):
    p = glm.mean_fn_eval(GlmSpec(5, SOFTMAX), z)
    assert np.all(p >= 0) and abs(p.sum() - 1.0) <= 1e-12


def test_zero_model_loss():
    d = class_data(0)
    assert glm.glm_loss(d, GlmModel.zero(GlmSpec(3, SOFTMAX))) == pytest.approx(math.log(3), abs=1e-14)
    lin = instance(0)
    assert glm.glm_loss(lin, GlmModel.zero(GlmSpec(1, IDENTITY))) == 0.0


def test_identity_loss_matches_ridge_risk():
    d = instance(1)
    spec = GlmSpec(1, IDENTITY, lam=0.3)
    cols = d.structure.columns_of([0, 2])
    risk, w = ridge_risk(d, cols, 0.3)
    model = GlmModel(cols, w[None, :], spec)
    assert glm.glm_loss(d, model) + 0.5 * np.mean(d.y[:, 0] ** 2) == pytest.approx(risk, abs=1e-10)


@pytest.mark.parametrize("mean_fn", [IDENTITY, SOFTMAX])
def test_loss_matches_naive_loop(mean_fn):
    rng = np.random.default_rng(3)
    d = class_data(1, n=30) if mean_fn is SOFTMAX else instance(2, n=30)
    spec = GlmSpec(d.p, mean_fn, lam=0.2)
    cols = np.array([0, 2, 3])
    model = GlmModel(cols, rng.standard_normal((d.p, 3)), spec)
    assert glm.glm_loss(d, model) == pytest.approx(naive_loss(d, model), rel=1e-12)


def test_gradient_reductions():
    d = instance(3)
    g = glm.glm_gradient(d, GlmModel.zero(GlmSpec(1, IDENTITY)))
    assert np.allclose(g[0], -d.x.T @ d.y[:, 0] / d.n)
    c = class_data(2)
    g = glm.glm_gradient(c, GlmModel.zero(GlmSpec(3, SOFTMAX)))
    assert np.allclose(g, (np.full((c.n, 3), 1 / 3) - c.y).T @ c.x / c.n)


@pytest.mark.parametrize("mean_fn", [IDENTITY, SOFTMAX])
def test_gradient_matches_finite_differences(mean_fn):
    rng = np.random.default_rng(4)
    for _ in range(5):
        d = class_data(int(rng.integers(1000)), n=40) if mean_fn is SOFTMAX else random_instance(rng)
        spec = GlmSpec(d.p, mean_fn, lam=float(rng.uniform(0, 1)))
        cols = np.arange(d.dim)
        w0 = rng.standard_normal((d.p, d.dim))
        model = GlmModel(cols, w0, spec)
        fd = central_difference(lambda w: glm.glm_loss(d, GlmModel(cols, w, spec)), w0)
        assert np.allclose(glm.glm_gradient(d, model), fd, atol=1e-4)


def test_identity_fit_matches_ridge():
    d = instance(5)
    cols = d.structure.columns_of([1, 2])
    model = glm.glm_fit(d, cols, GlmSpec(1, IDENTITY, lam=0.1))
    assert np.allclose(model.w[0], ridge_risk(d, cols, 0.1)[1], atol=1e-6)


def test_softmax_fit_separable_toy():
    x = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]])
    labels = (x[:, 0] > 0).astype(int)
    d = toy_dataset(x, np.eye(2)[labels], [1], [1.0])
    spec = GlmSpec(2, SOFTMAX, lam=0.1)
    model = glm.glm_fit(d, [0], spec)
    assert glm.glm_predict_accuracy(model, d) == 1.0
    assert np.linalg.norm(glm._grad_restricted(d.x, d.y, model.w, spec)) <= spec.newton_tol


def test_fit_empty_support_and_nonconvergence():
    d = class_data(3)
    spec = GlmSpec(3, SOFTMAX, lam=0.01)
    m = glm.glm_fit(d, [], spec)
    assert m.w.shape == (3, 0)
    assert glm.glm_loss(d, m) == pytest.approx(math.log(3))
    with pytest.raises(NoConvergence):
        glm.glm_fit(d, np.arange(d.dim), GlmSpec(3, SOFTMAX, lam=0.01, newton_max_iter=1))


def test_fit_optimality():
    d = class_data(4)
    spec = GlmSpec(3, SOFTMAX, lam=0.05)
    cols = d.structure.columns_of([0, 3])
    m = glm.glm_fit(d, cols, spec)
    assert np.linalg.norm(glm.glm_gradient(d, m)[:, cols]) <= spec.newton_tol


def test_identity_sequence_reduces_to_linear():
    rng = np.random.default_rng(6)
    for _ in range(5):
        d = random_instance(rng)
        lam = float(rng.choice([0.01, 0.1, 1.0]))
        a = glm.sequence_omp_glm(d, GlmSpec(1, IDENTITY, lam=lam))
        b = sequence_omp(d, lam)
        assert a.order == b.order
        assert np.allclose(a.prefix_objectives, b.prefix_objectives, atol=1e-8)


def test_signal_group_selected_first():
    d = class_data(7, n=300, sizes=(2, 2, 2, 2), sparsity=1)
    spec = GlmSpec(3, SOFTMAX, lam=0.01)
    r = glm.sequence_omp_glm(d, spec)
    grad = glm.glm_gradient(d, GlmModel.zero(spec))
    table = [float(np.sum(grad[:, d.structure.columns(j)] ** 2)) for j in range(4)]
    assert r.order_indices[0] == int(np.argmax(table))
    assert r.selection_scores[0] == pytest.approx(dict(zip(d.structure.names, table)))
    assert np.all(np.diff(r.prefix_objectives) >= -1e-10)


def test_sequence_single_group_and_preconditions():
    d = class_data(8, sizes=(3,), sparsity=1)
    assert glm.sequence_omp_glm(d, GlmSpec(3, SOFTMAX, lam=0.1)).order == ["g0"]
    with pytest.raises(PreconditionError):
        glm.sequence_omp_glm(class_data(8, whiten=False), GlmSpec(3, SOFTMAX))
    with pytest.raises(PreconditionError):
        glm.sequence_omp_glm(d, GlmSpec(2, SOFTMAX))


def test_spec_validation_and_round_trip():
    with pytest.raises(ValueError):
        GlmSpec(0)
    with pytest.raises(ValueError):
        GlmSpec(1, lam=-1.0)
    with pytest.raises(ValueError):
        GlmSpec(1, newton_tol=0.0)
    s = GlmSpec(3, "softmax", 0.2)
    assert GlmSpec.from_dict(s.to_dict()) == s
    m = GlmModel(np.array([1, 0]), np.arange(6.0).reshape(3, 2), s)
    back = GlmModel.from_dict(m.to_dict())
    assert np.array_equal(back.w, m.w) and back.spec == s
