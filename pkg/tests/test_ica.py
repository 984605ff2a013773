import numpy as np
import pytest

from gcica.errors import ValidationError
from gcica.ica import fastica, vanilla_ica_warm_start
from gcica.metrics import match_components
from gcica.model import standardize
from gcica.synthetic import sample_laplace_sources


@pytest.fixture
def mixture():
    rng = np.random.default_rng(0)
    s = sample_laplace_sources(2000, 2, rng)
    a = np.array([[1.0, 0.5, 0.0, 0.2], [0.0, 0.3, 1.0, 0.7]])
    return s, a, standardize(s @ a)


def test_recovers_noiseless_mixture(mixture):
    s, a, y = mixture
    rec = vanilla_ica_warm_start(y, 2, seed=0)
    assert np.all(rec >= 0)
    m = match_components(rec, a)
    assert min(m.correlations) >= 0.95


def test_sources_whitened_and_match(mixture):
    s, _, y = mixture
    res = fastica(y, 2, seed=1)
    assert res.converged
    np.testing.assert_allclose(np.cov(res.sources.T, bias=True), np.eye(2), atol=1e-8)
    corr = np.abs(np.corrcoef(res.sources.T, s.T)[:2, 2:])
    assert np.all(corr.max(axis=1) > 0.99)
    # Y = S_hat @ mixing on the retained subspace (exact here, rank 2)
    np.testing.assert_allclose(res.sources @ res.mixing, y - y.mean(axis=0), atol=1e-8)


def test_agrees_with_sklearn(mixture):
    sk = pytest.importorskip("sklearn.decomposition")
    _, _, y = mixture
    ours = fastica(y, 2, seed=0).mixing
    ref = sk.FastICA(n_components=2, whiten="unit-variance", fun="logcosh", random_state=0,
                     max_iter=1000, tol=1e-6).fit(y).mixing_.T
    m = match_components(ours, ref)
    assert min(m.correlations) > 0.999


def test_deterministic(mixture):
    y = mixture[2]
    np.testing.assert_array_equal(fastica(y, 2, seed=5).mixing, fastica(y, 2, seed=5).mixing)


def test_bad_component_count(mixture):
    with pytest.raises(ValidationError):
        fastica(mixture[2], 5)
