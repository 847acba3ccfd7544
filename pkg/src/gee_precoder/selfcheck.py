"""Fast invariant checks on tiny instances, behind `gee-precoder check`.

Each check exercises one load-bearing identity end to end: rate/MSE
duality, surrogate tangency, QCQP stationarity, the error-affine MSE
split, S-procedure tightness on a scalar instance, and a one-variable
cone program with a known answer.
"""

import numpy as np

from .channel import (ErrorRealization, SystemConfig, compose,
                      generate_channels)
from .linalg import LN2, herm, hermitize, logdet_hermitian, vec
from .metrics import (DecoderSet, PrecoderSet, mmse_receiver, mse_matrix,
                      user_rate)
from .sdp import SdpProblem, solve_sdp
from .stat_robust import (build_surrogate, initial_precoders, solve_qcqp,
                          subtractive_objective, surrogate_value)
from .worstcase import (WeightSet, assemble_error_terms, build_robust_lmi)


def _rng(tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((0xC4EC, tag))))


def _crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def check_rate_mse_duality():
    """R_k = -log2 det(MSE_k) at the MMSE receiver."""
    cfg = SystemConfig(K=2, M=3, N=3, d=2, sigma2=0.8, P_m=2.0, P_cir=0.3, rho=1.5)
    channels = generate_channels(cfg, 7)
    V = initial_precoders(channels, cfg)
    U = mmse_receiver(channels, V, cfg)
    worst = 0.0
    for k in range(cfg.K):
        r = user_rate(channels, V, U, cfg, k)
        m = logdet_hermitian(mse_matrix(channels, V, U, cfg, k)) / LN2
        worst = max(worst, abs(r + m))
    return worst, 1e-8


def check_surrogate_tangency():
    """Surrogate equals the subtractive objective at its expansion point."""
    cfg = SystemConfig(K=2, M=3, N=2, d=1, sigma2=1.0, P_m=1.0, P_cir=0.3, rho=2.0)
    channels = generate_channels(cfg, 11)
    V = initial_precoders(channels, cfg)
    sd2, eta = 0.05, 0.3
    surr = build_surrogate(channels, V, cfg, sd2)
    lhs = surrogate_value(surr, V, cfg, LN2 * eta)
    rhs = LN2 * subtractive_objective(channels, V, cfg, sd2, eta)
    return abs(lhs - rhs), 1e-8


def check_qcqp_stationarity():
    """KKT residuals of the closed-form power-constrained quadratic solve."""
    rng = _rng(3)
    M, d = 4, 2
    R = _crandn(rng, (M, M))
    Psi = hermitize(R @ herm(R))
    b = vec(_crandn(rng, (M, d)))
    eta, rho, P = 0.7, 1.3, 2.0
    x, lam = solve_qcqp(Psi, b, eta, rho, P)
    kern = np.kron(np.eye(d), Psi) + (eta * rho + lam) * np.eye(M * d)
    grad = float(np.max(np.abs(kern @ x + b)))
    feas = max(0.0, float(np.real(np.vdot(x, x))) - P)
    compl = abs(lam * (float(np.real(np.vdot(x, x))) - P))
    return max(grad, feas, compl), 1e-8


def check_error_split():
    """tr(W_i MSE_i(Hhat + Delta)) = sum_j ||e_ij + E_ij vec(Delta_ij)||^2."""
    cfg = SystemConfig(K=2, M=2, N=2, d=1, sigma2=0.7, P_m=1.0, P_cir=0.2, rho=1.2)
    rng = _rng(4)
    estimates = generate_channels(cfg, 13)
    V = PrecoderSet(V=_crandn(rng, (cfg.K, cfg.M, cfg.d)))
    U = DecoderSet(U=_crandn(rng, (cfg.K, cfg.N, cfg.d)))
    G = WeightSet(G=_crandn(rng, (cfg.K, cfg.d, cfg.d)) + np.eye(cfg.d))
    delta = 0.3 * _crandn(rng, (cfg.K, cfg.K, cfg.N, cfg.M))
    true = compose(estimates, ErrorRealization(delta=delta))
    pair = assemble_error_terms(estimates, V, U, G, cfg)
    worst = 0.0
    for i in range(cfg.K):
        W = G.G[i] @ herm(G.G[i])
        lhs = float(np.real(np.trace(W @ mse_matrix(true, V, U, cfg, i))))
        rhs = sum(float(np.real(np.vdot(
            pair.e[i][j] + pair.E[i][j] @ vec(delta[i, j]),
            pair.e[i][j] + pair.E[i][j] @ vec(delta[i, j]))))
            for j in range(cfg.K))
        worst = max(worst, abs(lhs - rhs))
    return worst, 1e-10


def check_scalar_s_procedure():
    """Scalar instance e = E = B = 1, eps = 0.5: the tightest certified
    bound over a mu grid equals the brute-force worst case 2.25."""
    e = np.array([1.0 + 0.0j])
    E = np.array([[1.0 + 0.0j]])
    B = np.array([[1.0 + 0.0j]])
    eps = 0.5
    best = np.inf
    for mu in np.arange(eps ** 2 + 1e-3, 2.0, 1e-3):
        blk0 = build_robust_lmi(e, E, B, eps, 0.0, mu)
        tail = blk0[1:, 1:]
        if np.linalg.eigvalsh(tail)[0] <= 0:
            continue
        a = blk0[1:, 0]
        lam = mu + float(np.real(np.vdot(a, np.linalg.solve(tail, a))))
        best = min(best, lam)
    return abs(best - 2.25), 1e-2


def check_sdp_analytic():
    """minimize x subject to [[x, 1], [1, x]] PSD has optimum 1."""
    prob = SdpProblem("analytic")
    prob.add_real("x")
    prob.add_lmi(lambda a: np.array([[a["x"], 1.0], [1.0, a["x"]]]),
                 uses=["x"], name="corner")
    prob.set_objective("minimize", {"x": 1.0})
    sol = solve_sdp(prob)
    err = abs(sol.objective - 1.0) if sol.status == "optimal" else np.inf
    return err, 1e-5


_CHECKS = (
    ("rate/MSE duality", check_rate_mse_duality),
    ("surrogate tangency", check_surrogate_tangency),
    ("QCQP stationarity", check_qcqp_stationarity),
    ("worst-case error split", check_error_split),
    ("scalar S-procedure", check_scalar_s_procedure),
    ("analytic cone program", check_sdp_analytic),
)


def run_all():
    """Returns (report lines, all_ok)."""
    lines, ok = [], True
    for name, fn in _CHECKS:
        try:
            err, tol = fn()
            passed = err <= tol
        except Exception as exc:  # a check must never take the suite down
            err, tol, passed = float("nan"), float("nan"), False
            lines.append(f"FAIL {name}: {exc!r}")
            ok = False
            continue
        ok = ok and passed
        tag = "ok  " if passed else "FAIL"
        lines.append(f"{tag} {name}: error {err:.3e} (tolerance {tol:.0e})")
    return lines, ok
