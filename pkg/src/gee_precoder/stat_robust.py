"""Statistical-error pipeline: Dinkelbach + minorize-maximize + closed-form QCQPs.

With i.i.d. CN(0, sigma_delta2) estimation errors, averaging the weighted
MSE over the error turns it into the perfect-CSI expression with the noise
inflated to sigma_eff^2(V) = sigma2 + sigma_delta2 * sum_l tr(V_l V_l^H).
The pipeline therefore maximizes the expected-MSE robust GEE

    sum_k alpha_k log2 det(I + V_k^H Hhat_kk^H Cbar_k(V)^-1 Hhat_kk V_k)
    ------------------------------------------------------------------,
    sum_k rho tr(V_k V_k^H) + M P_cir

where Cbar_k uses sigma_eff^2. Each Dinkelbach iteration fixes eta and runs
a minorize-maximize loop: expanding the weighted MSE around the incumbent
precoders gives a concave quadratic surrogate that touches the objective at
the expansion point, and whose per-user maximization is a norm-ball QCQP

    min_x  x^H (I_d kron Psi_k + eta rho I) x + 2 Re(x^H b_k),
    s.t.   ||x||^2 <= P_m,

solved in closed form through the secular equation of the power multiplier.
Surrogate algebra is carried in natural-log units; eta and all reported
rates convert to bits at the boundary.
"""

from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelSet, SystemConfig, _readonly
from .dinkelbach import solve_fractional
from .exceptions import DimensionError
from .linalg import LN2, herm, hermitize, unvec, vec
from .metrics import DecoderSet, GeeReport, PrecoderSet, mmse_receiver, total_power


@dataclass(frozen=True)
class SurrogateData:
    """One minorize-maximize expansion.

    Psi[k] is the M x M quadratic kernel of user k's QCQP, b[k] its length
    M*d linear term, F12[k]/F22[k] the d x N and N x N intermediate blocks
    of the expansion. const collects the x-independent remainder so that

        -sum_k [x_k^H (I kron Psi_k + eta_nat rho I) x_k + 2 Re(x_k^H b_k)]
        + const - eta_nat * K * M * P_cir

    equals the subtractive objective's minorant in nats.
    """

    Psi: np.ndarray  # (K, M, M) Hermitian PSD
    b: np.ndarray    # (K, M*d)
    F12: np.ndarray  # (K, d, N)
    F22: np.ndarray  # (K, N, N) Hermitian PSD
    const: float

    def __post_init__(self):
        for name in ("Psi", "b", "F12", "F22"):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), dtype=complex)))


@dataclass(frozen=True)
class StatOptions:
    """Stopping rules and restart policy for run_statistical."""

    # the inner loop must out-resolve the ratio search or the search can
    # stall at a fixed point whose residual sits just above its tolerance
    dinkelbach_tol: float = 1e-6
    dinkelbach_max_iter: int = 50
    mami_tol: float = 1e-7
    mami_max_iter: int = 300
    restarts: int = 0
    seed: int = 0


def effective_noise(precoders: PrecoderSet, cfg: SystemConfig,
                    sigma_delta2: float) -> float:
    """sigma2 inflated by the average error power sigma_delta2 * sum_l ||V_l||_F^2."""
    tx = sum(precoders.power(k) for k in range(cfg.K))
    return float(cfg.sigma2 + sigma_delta2 * tx)


def _cbar(estimates: ChannelSet, precoders: PrecoderSet, cfg: SystemConfig,
          sigma_delta2: float, k: int) -> np.ndarray:
    """Expected interference-plus-noise covariance at receiver k."""
    C = effective_noise(precoders, cfg, sigma_delta2) * np.eye(cfg.N, dtype=complex)
    for l in range(cfg.K):
        if l == k:
            continue
        T = estimates.H[k, l] @ precoders.V[l]
        C = C + T @ herm(T)
    return hermitize(C)


def expected_rates(estimates: ChannelSet, precoders: PrecoderSet,
                   cfg: SystemConfig, sigma_delta2: float) -> np.ndarray:
    """Expected-MSE robust rates in bits/s/Hz (nominal rates at sigma_delta2=0)."""
    rates = np.empty(cfg.K)
    for k in range(cfg.K):
        C = _cbar(estimates, precoders, cfg, sigma_delta2, k)
        Hd = estimates.H[k, k] @ precoders.V[k]
        X = np.linalg.solve(np.linalg.cholesky(C), Hd)
        Q = np.eye(cfg.d, dtype=complex) + herm(X) @ X
        rates[k] = np.linalg.slogdet(hermitize(Q))[1] / LN2
    return rates


def subtractive_objective(estimates: ChannelSet, precoders: PrecoderSet,
                          cfg: SystemConfig, sigma_delta2: float,
                          eta_bits: float) -> float:
    """sum_k alpha_k R_k - eta * total power, in bits."""
    rates = expected_rates(estimates, precoders, cfg, sigma_delta2)
    return float(np.dot(cfg.alpha, rates) - eta_bits * total_power(precoders, cfg))


def build_surrogate(estimates: ChannelSet, prev_precoders: PrecoderSet,
                    cfg: SystemConfig, sigma_delta2: float) -> SurrogateData:
    """Expand the expected weighted MSE around prev_precoders.

    For every user the expansion keeps the implicit MMSE receiver of the
    expected-MSE problem at the incumbent point, which is what makes the
    surrogate touch the subtractive objective there and stay below it
    elsewhere.
    """
    K, M, N, d = cfg.K, cfg.M, cfg.N, cfg.d
    F12 = np.empty((K, d, N), dtype=complex)
    F22 = np.empty((K, N, N), dtype=complex)
    const = 0.0
    for i in range(K):
        C = _cbar(estimates, prev_precoders, cfg, sigma_delta2, i)
        Hd = estimates.H[i, i] @ prev_precoders.V[i]     # N x d
        Ci_Hd = np.linalg.solve(C, Hd)                   # C^-1 Hhat V
        F12[i] = -herm(Hd) @ np.linalg.inv(C)            # -V^H Hhat^H C^-1
        T = np.eye(d, dtype=complex) + herm(Hd) @ Ci_Hd  # I + V^H Hhat^H C^-1 Hhat V
        F22[i] = hermitize(herm(F12[i]) @ np.linalg.solve(T, F12[i]))
        const += cfg.alpha[i] * (np.linalg.slogdet(hermitize(T))[1] + d
                                 - float(np.real(np.trace(T)))
                                 - cfg.sigma2 * float(np.real(np.trace(F22[i]))))
    Psi = np.empty((K, M, M), dtype=complex)
    b = np.empty((K, M * d), dtype=complex)
    for i in range(K):
        P = np.zeros((M, M), dtype=complex)
        for l in range(K):
            Hli = estimates.H[l, i]
            P = P + cfg.alpha[l] * (herm(Hli) @ F22[l] @ Hli
                                    + sigma_delta2 * np.real(np.trace(F22[l]))
                                    * np.eye(M))
        Psi[i] = hermitize(P)
        b[i] = vec(cfg.alpha[i] * herm(estimates.H[i, i]) @ herm(F12[i]))
    return SurrogateData(Psi=Psi, b=b, F12=F12, F22=F22, const=float(const))


def surrogate_value(surr: SurrogateData, precoders: PrecoderSet,
                    cfg: SystemConfig, eta_nat: float) -> float:
    """Evaluate the minorant at the given precoders (nats)."""
    total = surr.const - eta_nat * cfg.K * cfg.M * cfg.P_cir
    for k in range(cfg.K):
        x = vec(precoders.V[k])
        quad = np.real(np.vdot(x, vec(surr.Psi[k] @ precoders.V[k]))) \
            + eta_nat * cfg.rho * np.real(np.vdot(x, x))
        total -= quad + 2.0 * np.real(np.vdot(x, surr.b[k]))
    return float(total)


def solve_qcqp(Psi: np.ndarray, b: np.ndarray, eta: float, rho: float,
               P: float):
    """Closed-form solution of min x^H (I_d kron Psi + eta rho I) x + 2 Re(x^H b)
    subject to ||x||^2 <= P.

    Diagonalizing Psi once makes the secular equation g(lam) =
    sum |beta_i|^2 / (D_i + lam)^2 = P an O(M d) evaluation; the power
    multiplier is bisected on [0, ||b|| / sqrt(P)], which always brackets
    the root when the constraint binds. Returns (x, lam) satisfying the KKT
    conditions of the convex problem.
    """
    Psi = np.asarray(Psi, dtype=complex)
    b = np.asarray(b, dtype=complex).reshape(-1)
    M = Psi.shape[0]
    if b.size % M != 0:
        raise DimensionError("b length must be a multiple of Psi's side")
    d = b.size // M
    if P <= 0:
        raise DimensionError("power budget must be positive")
    ridge = float(eta) * float(rho)

    w, Q = np.linalg.eigh(hermitize(Psi))
    w = np.maximum(w, 0.0)  # Psi is PSD up to roundoff
    Bmat = unvec(b, M, d)
    beta = herm(Q) @ Bmat                      # coordinates of b per stream
    D = np.tile(w, d) + ridge                  # eigenvalues of the full kernel
    beta_flat = vec(beta)
    absb2 = np.abs(beta_flat) ** 2

    def x_of(lam: float) -> np.ndarray:
        denom = D + lam
        coeff = np.where(absb2 > 0.0, -beta_flat / np.where(denom > 0, denom, 1.0), 0.0)
        return vec(Q @ unvec(coeff, M, d))

    def g(lam: float) -> float:
        denom = D + lam
        mask = absb2 > 0.0
        if np.any(mask & (denom <= 0.0)):
            return np.inf
        return float(np.sum(absb2[mask] / denom[mask] ** 2)) if np.any(mask) else 0.0

    if g(0.0) <= P:
        return x_of(0.0), 0.0

    lo, hi = 0.0, float(np.linalg.norm(beta_flat) / np.sqrt(P))
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        val = g(mid)
        if val > P:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * max(hi, 1e-300) or abs(val - P) <= 1e-13 * P:
            break
    lam = hi  # feasible side of the bracket
    return x_of(lam), float(lam)


def initial_precoders(estimates: ChannelSet, cfg: SystemConfig) -> PrecoderSet:
    """Full-power match to the top-d right singular space of each direct link."""
    V = np.empty((cfg.K, cfg.M, cfg.d), dtype=complex)
    scale = np.sqrt(cfg.P_m / cfg.d)
    for k in range(cfg.K):
        _, _, Vh = np.linalg.svd(estimates.H[k, k])
        V[k] = scale * herm(Vh[: cfg.d, :])
    return PrecoderSet(V=V)


def _random_precoders(cfg: SystemConfig, rng: np.random.Generator) -> PrecoderSet:
    V = rng.standard_normal((cfg.K, cfg.M, cfg.d)) \
        + 1j * rng.standard_normal((cfg.K, cfg.M, cfg.d))
    for k in range(cfg.K):
        V[k] *= np.sqrt(cfg.P_m) / np.linalg.norm(V[k])
    return PrecoderSet(V=V)


def _run_from(estimates: ChannelSet, cfg: SystemConfig, sigma_delta2: float,
              opts: StatOptions, V0: PrecoderSet):
    trace = []
    state = {"V": V0, "mami_capped": False}

    def inner(eta_bits: float):
        eta_nat = LN2 * eta_bits
        V = state["V"]
        obj_prev = subtractive_objective(estimates, V, cfg, sigma_delta2, eta_bits)
        hit_cap = True
        for _ in range(opts.mami_max_iter):
            surr = build_surrogate(estimates, V, cfg, sigma_delta2)
            Vnew = np.empty_like(V.V)
            for k in range(cfg.K):
                x, _ = solve_qcqp(surr.Psi[k], surr.b[k], eta_nat, cfg.rho, cfg.P_m)
                Vnew[k] = unvec(x, cfg.M, cfg.d)
            V = PrecoderSet(V=Vnew)
            obj = subtractive_objective(estimates, V, cfg, sigma_delta2, eta_bits)
            trace.append((float(eta_bits), float(obj)))
            if abs(obj - obj_prev) <= opts.mami_tol * (1.0 + abs(obj_prev)):
                hit_cap = False
                break
            obj_prev = obj
        state["V"] = V
        state["mami_capped"] = state["mami_capped"] or hit_cap
        num = float(np.dot(cfg.alpha, expected_rates(estimates, V, cfg, sigma_delta2)))
        return V, num, total_power(V, cfg)

    num0 = float(np.dot(cfg.alpha, expected_rates(estimates, V0, cfg, sigma_delta2)))
    eta0 = num0 / total_power(V0, cfg)
    V_final, ftrace = solve_fractional(inner, eta0, tol=opts.dinkelbach_tol,
                                       max_iter=opts.dinkelbach_max_iter)
    return V_final, ftrace, trace, state["mami_capped"]


def run_statistical(estimates: ChannelSet, cfg: SystemConfig,
                    sigma_delta2: float, opts: StatOptions = None):
    """Full statistical-error design.

    Returns (PrecoderSet, DecoderSet, GeeReport); the report's rates are the
    expected-MSE robust rates, its trace holds one (eta, objective) pair per
    minorize-maximize step, and the decoders are the deployment MMSE filters
    on the estimated channels (refreshed after the ratio search ends).
    """
    if sigma_delta2 < 0:
        raise DimensionError("sigma_delta2 must be nonnegative")
    opts = opts or StatOptions()

    starts = [initial_precoders(estimates, cfg)]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((opts.seed, 0x5747))))
    for _ in range(max(0, opts.restarts)):
        starts.append(_random_precoders(cfg, rng))

    best = None
    for V0 in starts:
        V, ftrace, trace, capped = _run_from(estimates, cfg, sigma_delta2, opts, V0)
        rates = expected_rates(estimates, V, cfg, sigma_delta2)
        value = float(np.dot(cfg.alpha, rates)) / total_power(V, cfg)
        if best is None or value > best[0]:
            best = (value, V, ftrace, trace, capped, rates)

    value, V, ftrace, trace, capped, rates = best
    decoders = mmse_receiver(estimates, V, cfg)
    warning = ""
    if not ftrace.converged:
        warning = "ratio search hit its iteration cap"
    elif capped:
        warning = "a minorize-maximize loop hit its iteration cap"
    report = GeeReport(rates=tuple(float(r) for r in rates),
                       total_power=total_power(V, cfg), gee=value,
                       trace=tuple(trace),
                       converged=ftrace.converged and not capped,
                       warning=warning)
    return V, decoders, report
