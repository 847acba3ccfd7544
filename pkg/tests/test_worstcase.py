"""Worst-case pipeline: error-term split, S-procedure blocks against a
trust-region oracle, per-step monotonicity, closed-form step oracles."""

import numpy as np
import pytest

from gee_precoder import (DecoderSet, DimensionError, ErrorRealization,
                          NormBoundedError, PrecoderSet, SystemConfig,
                          WcOptions, WeightSet, assemble_error_terms,
                          build_power_lmi, build_robust_lmi, compose,
                          generate_channels, initial_precoders,
                          lower_bound_rates, min_feasible_lambda,
                          mmse_receiver, mse_matrix, run_statistical,
                          run_worstcase, shaping_lift, solve_g_step,
                          solve_qcqp, solve_u_step, solve_v_step,
                          subtractive_lower_bound, total_power, user_rate)
from gee_precoder.exceptions import ShapingMatrixError
from gee_precoder.linalg import LN2, herm, hermitize, unvec, vec
from gee_precoder.worstcase import RobustAuxiliaries, _inv_sqrt_scaled


def _instance(seed, K=2, M=2, N=2, d=1, **kw):
    cfg = SystemConfig(K=K, M=M, N=N, d=d, **kw)
    rng = np.random.default_rng(seed)
    est = generate_channels(cfg, seed)
    V = rng.normal(size=(K, M, d)) + 1j * rng.normal(size=(K, M, d))
    U = rng.normal(size=(K, N, d)) + 1j * rng.normal(size=(K, N, d))
    G = rng.normal(size=(K, d, d)) + 1j * rng.normal(size=(K, d, d))
    G = G + 2.0 * np.broadcast_to(np.eye(d), (K, d, d))
    for k in range(K):
        V[k] *= np.sqrt(cfg.P_m) * rng.uniform(0.5, 1.0) / np.linalg.norm(V[k])
    return cfg, est, PrecoderSet(V=V), DecoderSet(U=U), WeightSet(G=G)


def _random_shaping(rng, K, N):
    B = np.empty((K, K, N, N), dtype=complex)
    for i in range(K):
        for j in range(K):
            X = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
            B[i, j] = X @ herm(X) + 0.5 * np.eye(N)
    return B


def trust_region_worst_case(e, E, B, eps):
    """Exact max of ||e + E vec(Delta)||^2 over ||B Delta||_F <= eps via the
    secular equation of the sphere-constrained quadratic maximization."""
    n = E.shape[1]
    M = n // B.shape[0]
    A = eps * (E @ np.kron(np.eye(M), np.linalg.inv(B)))
    Q = hermitize(herm(A) @ A)
    q = herm(A) @ e
    w, Vecs = np.linalg.eigh(Q)
    c = herm(Vecs) @ q
    top = w[-1]

    def znorm2(nu):
        return float(np.sum(np.abs(c) ** 2 / (nu - w) ** 2))

    lo = top + 1e-12 * max(top, 1.0)
    if znorm2(lo) <= 1.0:
        # hard case: pad with the top eigenvector
        coeff = np.where(top - w > 1e-10 * max(top, 1.0), c / (top - w), 0.0)
        z0 = Vecs @ coeff
        t = np.sqrt(max(0.0, 1.0 - np.linalg.norm(z0) ** 2))
        z = z0 + t * Vecs[:, -1]
    else:
        hi = top + np.linalg.norm(q) + 1.0
        for _ in range(300):
            mid = 0.5 * (lo + hi)
            if znorm2(mid) > 1.0:
                lo = mid
            else:
                hi = mid
        z = np.linalg.solve(hi * np.eye(n) - Q, q)
    return float(np.linalg.norm(e + A @ z) ** 2)


def test_error_split_identity():
    rng = np.random.default_rng(0)
    for seed in range(12):
        d = 1 + seed % 2
        cfg, est, pre, dec, wts = _instance(seed, K=2, M=3, N=2, d=d,
                                            sigma2=0.8)
        pair = assemble_error_terms(est, pre, dec, wts, cfg)
        delta = 0.3 * (rng.normal(size=est.H.shape)
                       + 1j * rng.normal(size=est.H.shape))
        true = compose(est, ErrorRealization(delta=delta))
        for i in range(cfg.K):
            W = wts.G[i] @ herm(wts.G[i])
            lhs = float(np.real(np.trace(
                W @ mse_matrix(true, pre, dec, cfg, i))))
            rhs = sum(float(np.linalg.norm(
                pair.e[i][j] + pair.E[i][j] @ vec(delta[i, j])) ** 2)
                for j in range(cfg.K))
            assert abs(lhs - rhs) < 1e-10 * (1.0 + abs(lhs))


def test_error_term_shapes():
    cfg, est, pre, dec, wts = _instance(3, K=2, M=3, N=2, d=2)
    pair = assemble_error_terms(est, pre, dec, wts, cfg)
    for i in range(2):
        for j in range(2):
            l = 4 + 4 if i == j else 4  # d^2 + N d on the diagonal
            assert pair.e[i][j].shape == (l,)
            assert pair.E[i][j].shape == (l, 6)  # M N columns


def test_shaping_lift_parametrizes_the_ball():
    rng = np.random.default_rng(4)
    model = NormBoundedError(B=_random_shaping(rng, 2, 2),
                             eps=np.full((2, 2), 0.5))
    Btilde = shaping_lift(model, 3)
    assert Btilde.shape == (2, 2, 6, 6)
    for i in range(2):
        for j in range(2):
            ref = np.kron(np.eye(3), np.linalg.inv(model.B[i, j]))
            assert np.abs(Btilde[i, j] - ref).max() < 1e-12
            u = rng.normal(size=6) + 1j * rng.normal(size=6)
            delta = unvec(Btilde[i, j] @ u, 2, 3)
            assert abs(np.linalg.norm(model.B[i, j] @ delta)
                       - np.linalg.norm(u)) < 1e-10


def test_shaping_lift_rejects_singular():
    B = np.broadcast_to(np.diag([1.0, 0.0]).astype(complex),
                        (2, 2, 2, 2)).copy()
    model = NormBoundedError(B=B, eps=np.zeros((2, 2)))
    with pytest.raises(ShapingMatrixError):
        shaping_lift(model, 3)


def test_power_lmi_schur():
    rng = np.random.default_rng(5)
    V = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    p = float(np.linalg.norm(V) ** 2)
    ok = build_power_lmi(V, p * 1.01)
    bad = build_power_lmi(V, p * 0.99)
    assert ok.shape == (7, 7)
    assert np.linalg.eigvalsh(hermitize(ok))[0] >= -1e-12
    assert np.linalg.eigvalsh(hermitize(bad))[0] < 0.0


def test_robust_lmi_zero_radius_threshold():
    rng = np.random.default_rng(6)
    e = rng.normal(size=3) + 1j * rng.normal(size=3)
    E = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    B = np.eye(2, dtype=complex)
    lam = float(np.linalg.norm(e) ** 2)
    ok = build_robust_lmi(e, E, B, 0.0, lam * 1.001, 0.0)
    bad = build_robust_lmi(e, E, B, 0.0, lam * 0.999, 0.0)
    assert ok.shape == (8, 8)  # always 1 + l + M N, radius zero included
    assert np.linalg.eigvalsh(hermitize(ok))[0] >= -1e-12
    assert np.linalg.eigvalsh(hermitize(bad))[0] < 0.0


def test_min_feasible_lambda_matches_trust_region_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    for trial in range(8):
        l, N, M = (3, 2, 2) if trial % 2 else (4, 2, 3)
        e = rng.normal(size=l) + 1j * rng.normal(size=l)
        E = rng.normal(size=(l, M * N)) + 1j * rng.normal(size=(l, M * N))
        X = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        B = X @ herm(X) + 0.5 * np.eye(N)
        eps = 0.3 + 0.1 * trial
        Btilde = np.kron(np.eye(M), np.linalg.inv(B))
        lam = min_feasible_lambda(e, E, Btilde, eps)
        ref = trust_region_worst_case(e, E, B, eps)
        assert abs(lam - ref) < 1e-5 * (1.0 + abs(ref))
        checked += 1
    assert checked == 8
    # zero radius short-circuits to the plain squared norm
    assert min_feasible_lambda(e, E, Btilde, 0.0) \
        == pytest.approx(float(np.linalg.norm(e) ** 2), rel=1e-12)


def test_certified_bound_dominates_sampled_errors():
    rng = np.random.default_rng(8)
    cfg, est, pre, dec, wts = _instance(9, K=2, M=2, N=2, d=1)
    model = NormBoundedError(B=_random_shaping(rng, 2, 2),
                             eps=np.full((2, 2), 0.4))
    pair = assemble_error_terms(est, pre, dec, wts, cfg)
    Btilde = shaping_lift(model, cfg.M)
    for i in range(2):
        for j in range(2):
            lam = min_feasible_lambda(pair.e[i][j], pair.E[i][j],
                                      Btilde[i, j], 0.4)
            for _ in range(200):
                u = rng.normal(size=4) + 1j * rng.normal(size=4)
                u *= 0.4 * rng.uniform() ** 0.25 / np.linalg.norm(u)
                delta = Btilde[i, j] @ u  # ||B Delta||_F = ||u|| <= eps
                val = float(np.linalg.norm(
                    pair.e[i][j] + pair.E[i][j] @ delta) ** 2)
                assert val <= lam + 1e-6 * (1.0 + lam)


def test_u_step_recovers_mmse_at_zero_radius():
    for seed in range(3):
        cfg, est, pre, _, wts = _instance(seed, K=2, M=3, N=2, d=1)
        model = NormBoundedError.identity(2, 2, 0.0)
        dec, aux = solve_u_step(est, cfg, pre, wts, model)
        ref = mmse_receiver(est, pre, cfg)
        assert np.abs(dec.U - ref.U).max() < 1e-4
        # lam equals the pair norms at the optimum
        pair = assemble_error_terms(est, pre, dec, wts, cfg)
        for i in range(2):
            for j in range(2):
                assert aux.lam[i, j] == pytest.approx(
                    float(np.linalg.norm(pair.e[i][j]) ** 2), abs=1e-5)


def test_g_step_recovers_inverse_sqrt_at_zero_radius():
    for seed in range(3):
        cfg, est, pre, _, wts = _instance(seed, K=2, M=3, N=2, d=1 + seed % 2)
        dec = mmse_receiver(est, pre, cfg)
        model = NormBoundedError.identity(2, 2, 0.0)
        wts2, _ = solve_g_step(est, cfg, pre, dec, wts, model)
        for i in range(2):
            ref = _inv_sqrt_scaled(mse_matrix(est, pre, dec, cfg, i))
            # interior-point accuracy on the det-max step is ~1e-4 relative
            assert np.abs(wts2.G[i] - ref).max() < 1e-3


def test_v_step_matches_qcqp_for_single_user():
    # K=1, zero radius: the precoder step is a ridge-regularized norm-ball
    # least squares with a closed form through the secular equation
    for seed in range(3):
        cfg, est, _, dec, wts = _instance(seed, K=1, M=3, N=2, d=2,
                                          P_m=1.3, rho=1.6)
        model = NormBoundedError.identity(1, 2, 0.0)
        eta = 0.45
        pre, aux = solve_v_step(est, cfg, dec, wts, model, eta)
        Ac = herm(wts.G[0]) @ herm(dec.U[0]) @ est.H[0, 0]
        Psi = herm(Ac) @ Ac
        b = -vec(herm(Ac) @ herm(wts.G[0]))
        x, _ = solve_qcqp(Psi, b, eta, cfg.rho, cfg.P_m)
        assert np.abs(pre.V[0] - unvec(x, 3, 2)).max() < 1e-4


def test_alternation_steps_are_monotone():
    cfg, est, pre, _, _ = _instance(11, K=2, M=2, N=2, d=1,
                                    P_cir=0.3, rho=1.5)
    model = NormBoundedError.identity(2, 2, 0.15)
    eta = 0.3
    V = initial_precoders(est, cfg)
    U = mmse_receiver(est, V, cfg)
    G = WeightSet(G=np.stack([_inv_sqrt_scaled(mse_matrix(est, V, U, cfg, i))
                              for i in range(2)]))
    J = None
    for _ in range(3):
        V, aux = solve_v_step(est, cfg, U, G, model, eta)
        J_v = subtractive_lower_bound(G, aux, V, cfg, eta)
        if J is not None:
            assert J_v >= J - 1e-6
        U, aux = solve_u_step(est, cfg, V, G, model)
        J_u = subtractive_lower_bound(G, aux, V, cfg, eta)
        assert J_u >= J_v - 1e-6
        G, aux = solve_g_step(est, cfg, V, U, G, model)
        J_g = subtractive_lower_bound(G, aux, V, cfg, eta)
        assert J_g >= J_u - 1e-6
        J = J_g


def test_lower_bound_collapses_to_rate_at_zero_radius():
    # with G = (MSE ln2)^(-1/2) and lam at the pair norms, the bound equals
    # -log2 det(MSE), the exact rate at the MMSE receiver
    cfg, est, pre, _, _ = _instance(12, K=2, M=3, N=2, d=2)
    dec = mmse_receiver(est, pre, cfg)
    G = WeightSet(G=np.stack([_inv_sqrt_scaled(mse_matrix(est, pre, dec, cfg, i))
                              for i in range(2)]))
    pair = assemble_error_terms(est, pre, dec, G, cfg)
    lam = np.array([[float(np.linalg.norm(pair.e[i][j]) ** 2)
                     for j in range(2)] for i in range(2)])
    aux = RobustAuxiliaries(lam=lam, mu=np.zeros((2, 2)),
                            Btilde=shaping_lift(
                                NormBoundedError.identity(2, 2, 0.0), cfg.M))
    bounds = lower_bound_rates(G, aux, cfg)
    for i in range(2):
        mse = mse_matrix(est, pre, dec, cfg, i)
        ref = -np.linalg.slogdet(mse)[1] / LN2
        assert abs(bounds[i] - ref) < 1e-10 * (1.0 + abs(ref))
        assert abs(bounds[i] - user_rate(est, pre, dec, cfg, i)) < 1e-9


def test_run_worstcase_report_consistency():
    cfg = SystemConfig(K=2, M=2, N=2, d=1, P_m=1.0, P_cir=10 ** -0.5,
                       rho=1 / 0.38)
    est = generate_channels(cfg, 3)
    V, U, G, rep = run_worstcase(est, cfg, NormBoundedError.identity(2, 2, 0.1))
    assert rep.converged and rep.warning == ""
    assert rep.gee == pytest.approx(
        float(np.dot(cfg.alpha, rep.rates)) / rep.total_power, rel=1e-12)
    assert rep.total_power == pytest.approx(total_power(V, cfg), rel=1e-12)
    for k in range(2):
        assert V.power(k) <= cfg.P_m * (1.0 + 1e-6)
    etas = np.array([t[0] for t in rep.trace])
    assert np.all(np.diff(etas) >= -1e-9)


def test_run_worstcase_degrades_with_radius():
    cfg = SystemConfig(K=2, M=2, N=2, d=1, P_m=1.0, P_cir=10 ** -0.5,
                       rho=1 / 0.38)
    est = generate_channels(cfg, 3)
    gee0 = run_worstcase(est, cfg, NormBoundedError.identity(2, 2, 0.0))[3].gee
    gee2 = run_worstcase(est, cfg, NormBoundedError.identity(2, 2, 0.2))[3].gee
    assert gee0 >= gee2 - 1e-6


def test_run_worstcase_zero_radius_matches_statistical():
    cfg = SystemConfig(K=2, M=2, N=2, d=1, P_m=1.0, P_cir=10 ** -0.5,
                       rho=1 / 0.38)
    est = generate_channels(cfg, 3)
    wc = run_worstcase(est, cfg, NormBoundedError.identity(2, 2, 0.0))[3].gee
    st = run_statistical(est, cfg, 0.0)[2].gee
    assert abs(wc - st) < 1e-3 * (1.0 + abs(st))


def test_sweep_cap_is_reported():
    cfg = SystemConfig(K=2, M=2, N=2, d=1, P_cir=0.3, rho=1.5)
    est = generate_channels(cfg, 4)
    opts = WcOptions(sweep_tol=1e-12, max_sweeps=1, dinkelbach_max_iter=2)
    _, _, _, rep = run_worstcase(est, cfg, NormBoundedError.identity(2, 2, 0.1),
                                 opts)
    assert not rep.converged
    assert "cap" in rep.warning


def test_validation_errors():
    with pytest.raises(DimensionError):
        WeightSet(G=np.zeros((2, 1, 1), dtype=complex))
    with pytest.raises(DimensionError):
        RobustAuxiliaries(lam=np.array([[-1.0]]), mu=np.zeros((1, 1)),
                          Btilde=np.zeros((1, 1, 2, 2), dtype=complex))
    cfg = SystemConfig(K=2, M=2, N=2, d=1)
    est = generate_channels(cfg, 0)
    with pytest.raises(DimensionError):
        run_worstcase(est, cfg, NormBoundedError.identity(3, 2, 0.1))
