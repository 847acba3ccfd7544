"""Config validation, channel generation, error models, serialization."""

import numpy as np
import pytest

from gee_precoder import (ChannelSet, ConfigError, DimensionError,
                          ErrorRealization, NormBoundedError,
                          ShapingMatrixError, StochasticError, SystemConfig,
                          channelset_from_json, channelset_to_json, compose,
                          generate_channels, sample_error)


def _cfg(**kw):
    base = dict(K=2, M=3, N=2, d=1)
    base.update(kw)
    return SystemConfig(**base)


def test_config_defaults():
    cfg = _cfg()
    assert cfg.alpha == (1.0, 1.0)
    assert cfg.sigma2 == 1.0 and cfg.rho == 1.0 and cfg.P_cir == 0.0


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(d=3)  # d > min(M, N)
    with pytest.raises(ConfigError):
        _cfg(K=0)
    with pytest.raises(ConfigError):
        _cfg(sigma2=0.0)
    with pytest.raises(ConfigError):
        _cfg(P_m=0.0)
    with pytest.raises(ConfigError):
        _cfg(P_cir=-0.1)
    with pytest.raises(ConfigError):
        _cfg(rho=0.9)
    with pytest.raises(ConfigError):
        _cfg(alpha=(1.0,))
    with pytest.raises(ConfigError):
        _cfg(alpha=(1.0, -1.0))
    with pytest.raises(ConfigError):
        _cfg(sigma_h2=0.0)


def test_generate_channels_deterministic():
    cfg = _cfg()
    H1 = generate_channels(cfg, 42).H
    H2 = generate_channels(cfg, 42).H
    H3 = generate_channels(cfg, 43).H
    assert H1.shape == (2, 2, 2, 3)
    assert np.array_equal(H1, H2)
    assert np.abs(H1 - H3).max() > 1e-3


def test_link_streams_are_order_invariant():
    # link (i, j) depends only on (seed, i, j), not on K
    a = generate_channels(_cfg(K=2), 7).H
    b = generate_channels(_cfg(K=3), 7).H
    assert np.array_equal(a[0, 0], b[0, 0])
    assert np.array_equal(a[1, 0], b[1, 0])


def test_channel_statistics():
    cfg = SystemConfig(K=1, M=30, N=30, d=1, sigma_h2=2.5)
    samples = np.concatenate([generate_channels(cfg, s).H.ravel()
                              for s in range(60)])
    # 54000 draws: the sample mean has std ~0.007, the variance ~0.011
    assert abs(np.mean(samples)) < 0.03
    assert abs(np.mean(np.abs(samples) ** 2) - 2.5) < 0.05


def test_channelset_validation_and_readonly():
    with pytest.raises(DimensionError):
        ChannelSet(H=np.zeros((2, 3, 2, 2)))
    cs = generate_channels(_cfg(), 0)
    with pytest.raises(ValueError):
        cs.H[0, 0, 0, 0] = 0.0


def test_stochastic_error_sampling():
    cfg = SystemConfig(K=1, M=25, N=25, d=1)
    model = StochasticError(sigma_delta2=0.3)
    samples = np.concatenate([sample_error(model, cfg, s).delta.ravel()
                              for s in range(20)])
    assert abs(np.mean(np.abs(samples) ** 2) - 0.3) < 0.01
    zero = sample_error(StochasticError(sigma_delta2=0.0), cfg, 0)
    assert np.abs(zero.delta).max() == 0.0
    with pytest.raises(ConfigError):
        StochasticError(sigma_delta2=-0.1)


def test_norm_bounded_sampling_stays_in_ball():
    cfg = _cfg()
    rng = np.random.default_rng(9)
    B = np.empty((2, 2, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            B[i, j] = X @ X.conj().T + 0.5 * np.eye(2)
    model = NormBoundedError(B=B, eps=np.full((2, 2), 0.7))
    radii = []
    for s in range(200):
        delta = sample_error(model, cfg, s).delta
        for i in range(2):
            for j in range(2):
                radii.append(np.linalg.norm(B[i, j] @ delta[i, j]))
    radii = np.array(radii)
    assert radii.max() <= 0.7 + 1e-12
    assert radii.max() >= 0.6  # draws do reach near the boundary


def test_norm_bounded_zero_radius_and_identity_factory():
    cfg = _cfg()
    model = NormBoundedError.identity(2, 2, 0.0)
    assert np.abs(sample_error(model, cfg, 1).delta).max() == 0.0
    model2 = NormBoundedError.identity(3, 4, 0.2)
    assert model2.B.shape == (3, 3, 4, 4)
    assert np.all(model2.eps == 0.2)
    with pytest.raises(ConfigError):
        NormBoundedError.identity(2, 2, -0.1)


def test_norm_bounded_shaping_validation():
    cfg = _cfg()
    bad = np.broadcast_to(np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex),
                          (2, 2, 2, 2)).copy()
    model = NormBoundedError(B=bad, eps=np.full((2, 2), 0.1))
    with pytest.raises(ShapingMatrixError):
        sample_error(model, cfg, 0)
    singular = np.broadcast_to(np.diag([1.0, 0.0]).astype(complex),
                               (2, 2, 2, 2)).copy()
    model2 = NormBoundedError(B=singular, eps=np.full((2, 2), 0.1))
    with pytest.raises(ShapingMatrixError):
        sample_error(model2, cfg, 0)


def test_compose():
    cfg = _cfg()
    est = generate_channels(cfg, 3)
    err = sample_error(StochasticError(0.1), cfg, 4)
    true = compose(est, err)
    assert np.array_equal(true.H, est.H + err.delta)
    with pytest.raises(DimensionError):
        compose(est, ErrorRealization(delta=np.zeros((2, 2, 2, 5))))


def test_channelset_json_roundtrip():
    cs = generate_channels(_cfg(), 11)
    text = channelset_to_json(cs)
    back = channelset_from_json(text)
    assert np.array_equal(back.H, cs.H)
    with pytest.raises(DimensionError):
        channelset_from_json(text.replace('"shape": [2, 2, 2, 3]',
                                          '"shape": [2, 2, 3, 2]'))


def test_sample_error_rejects_unknown_model():
    with pytest.raises(TypeError):
        sample_error(object(), _cfg(), 0)
