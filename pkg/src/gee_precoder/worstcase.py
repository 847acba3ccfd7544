"""Worst-case robust design over norm-bounded channel errors.

The weighted per-user MSE is split into K squared vector norms, each affine
in one link's error matrix; a lossless S-procedure turns every "bounded for
all errors in the ellipsoid" requirement into one LMI block. Transmit
precoders, receive filters, and decoding weights are then updated by
alternating conic programs (the weight step maximizes a log-det), with a
ratio search on the energy-efficiency objective outside. All reported rates
are lower bounds that become exact when every error radius is zero.

Rates and eta are in bits; the lam bounds are plain squared norms.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, NormBoundedError, SystemConfig, _readonly
from .dinkelbach import solve_fractional
from .exceptions import DimensionError, SdpError, ShapingMatrixError
from .linalg import LN2, herm, hermitize, logdet_hermitian, vec
from .metrics import (DecoderSet, GeeReport, PrecoderSet, mmse_receiver,
                      mse_matrix, total_power)
from .sdp import SdpOptions, SdpProblem, solve_maxdet, solve_sdp
from .stat_robust import initial_precoders

_LOG2_LN2 = float(np.log2(LN2))


@dataclass(frozen=True)
class WeightSet:
    """Decoding weight factors, G[i] is d x d with W_i = G_i G_i^H."""

    G: np.ndarray  # (K, d, d) complex

    def __post_init__(self):
        G = np.asarray(self.G, dtype=complex)
        if G.ndim != 3 or G.shape[1] != G.shape[2]:
            raise DimensionError("weight array must have shape (K, d, d)")
        for k in range(G.shape[0]):
            if abs(np.linalg.det(G[k])) == 0.0:
                raise DimensionError(f"weight factor {k} is singular")
        object.__setattr__(self, "G", _readonly(G))


@dataclass(frozen=True)
class ErrorTermPair:
    """Per-link affine error terms: the (i, j) share of tr(W_i MSE_i) is
    ||e[i][j] + E[i][j] vec(Delta_ij)||^2. Vectors have length d^2 off the
    diagonal and d^2 + N d on it (the noise rows); E has M N columns."""

    e: tuple  # K x K nested tuple of complex vectors
    E: tuple  # K x K nested tuple of complex matrices

    def __post_init__(self):
        K = len(self.e)
        if len(self.E) != K or any(len(r) != K for r in self.e) \
                or any(len(r) != K for r in self.E):
            raise DimensionError("error terms must form K x K tables")
        for i in range(K):
            for j in range(K):
                if self.e[i][j].shape[0] != self.E[i][j].shape[0]:
                    raise DimensionError(f"e/E row mismatch at pair ({i}, {j})")


@dataclass(frozen=True)
class RobustAuxiliaries:
    """Slack bounds lam[i, j] on the (i, j) MSE share, S-procedure
    multipliers mu[i, j], and the fixed lifts Btilde[i, j] = I_M kron
    B_ij^-1 mapping the unit-ball error parameter to vec(Delta_ij)."""

    lam: np.ndarray     # (K, K) float
    mu: np.ndarray      # (K, K) float
    Btilde: np.ndarray  # (K, K, MN, MN) complex

    def __post_init__(self):
        if np.min(self.lam) < -1e-6 or np.min(self.mu) < -1e-6:
            raise DimensionError("slack bounds and multipliers must be nonnegative")


@dataclass(frozen=True)
class WcOptions:
    """Alternation and ratio-search controls for the worst-case design.

    The two tolerances are kept equal: an alternation that stops coarser
    than the ratio search resolves can leave the search stuck at a fixed
    point whose residual never drops below its tolerance."""

    sweep_tol: float = 1e-4
    max_sweeps: int = 200
    dinkelbach_tol: float = 1e-4
    dinkelbach_max_iter: int = 50
    sdp: SdpOptions = field(default_factory=SdpOptions)


def _pair_terms(i, j, Hij, Vj, Ai, Gih, sigma):
    """e and E for one (receiver i, transmitter j) pair; Ai = G_i^H U_i^H."""
    core = Ai @ Hij @ Vj
    E = np.kron(Vj.T, Ai)
    if i == j:
        e = np.concatenate([vec(core - Gih), sigma * vec(Ai)])
        E = np.vstack([E, np.zeros((Ai.size, E.shape[1]), dtype=complex)])
    else:
        e = vec(core)
    return e, E


def assemble_error_terms(estimates: ChannelSet, precoders: PrecoderSet,
                         decoders: DecoderSet, weights: WeightSet,
                         cfg: SystemConfig) -> ErrorTermPair:
    """Error-affine split of every tr(W_i MSE_i): for all Delta,
    tr(W_i MSE_i(Hhat + Delta)) = sum_j ||e_ij + E_ij vec(Delta_ij)||^2."""
    sigma = np.sqrt(cfg.sigma2)
    e_rows, E_rows = [], []
    for i in range(cfg.K):
        Ai = herm(weights.G[i]) @ herm(decoders.U[i])
        Gih = herm(weights.G[i])
        e_row, E_row = [], []
        for j in range(cfg.K):
            e, E = _pair_terms(i, j, estimates.H[i, j], precoders.V[j], Ai,
                               Gih, sigma)
            e_row.append(e)
            E_row.append(E)
        e_rows.append(tuple(e_row))
        E_rows.append(tuple(E_row))
    return ErrorTermPair(e=tuple(e_rows), E=tuple(E_rows))


def shaping_lift(model: NormBoundedError, M: int) -> np.ndarray:
    """Btilde[i, j] = I_M kron B_ij^-1, so vec(Delta) = Btilde u with
    ||u|| <= eps sweeping the uncertainty set."""
    K, N = model.B.shape[0], model.B.shape[2]
    out = np.empty((K, K, M * N, M * N), dtype=complex)
    eyeM = np.eye(M)
    for i in range(K):
        for j in range(K):
            try:
                Binv = np.linalg.inv(model.B[i, j])
            except np.linalg.LinAlgError:
                raise ShapingMatrixError(f"shaping matrix ({i}, {j}) is singular")
            out[i, j] = np.kron(eyeM, Binv)
    return out


def build_power_lmi(V: np.ndarray, P_m: float) -> np.ndarray:
    """Side 1+Md block whose PSD-ness is ||vec(V)||^2 <= P_m."""
    x = vec(np.asarray(V, dtype=complex)).reshape(-1, 1)
    return np.block([[np.array([[P_m]], dtype=complex), herm(x)],
                     [x, np.eye(x.size, dtype=complex)]])


def _robust_block(e, E, Btilde, eps, lam, mu):
    l = e.shape[0]
    n = Btilde.shape[0]
    ec = e.reshape(l, 1)
    S = eps * (E @ Btilde)
    z1 = np.zeros((1, n), dtype=complex)
    return np.block([
        [np.array([[lam - mu]], dtype=complex), herm(ec), z1],
        [ec, np.eye(l, dtype=complex), -S],
        [herm(z1), -herm(S), mu * np.eye(n, dtype=complex)],
    ])


def build_robust_lmi(e: np.ndarray, E: np.ndarray, B: np.ndarray, eps: float,
                     lam: float, mu: float) -> np.ndarray:
    """Side 1+l+MN certificate block: PSD for some mu >= 0 exactly when
    ||e + E vec(Delta)||^2 <= lam for every ||B Delta||_F <= eps."""
    B = np.asarray(B, dtype=complex)
    n = E.shape[1]
    M = n // B.shape[0]
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        raise ShapingMatrixError("shaping matrix is singular")
    return _robust_block(np.asarray(e, dtype=complex),
                         np.asarray(E, dtype=complex),
                         np.kron(np.eye(M), Binv), eps, lam, mu)


def min_feasible_lambda(e, E, Btilde, eps, opts: SdpOptions = None) -> float:
    """Tightest certified bound for one pair; equals the true worst case
    because the S-procedure is lossless for a single ball."""
    if eps == 0.0:
        return float(np.real(np.vdot(e, e)))
    prob = SdpProblem("pair-bound")
    prob.add_real("lam")
    prob.add_real("mu")
    prob.add_lmi(lambda a: _robust_block(e, E, Btilde, eps, a["lam"], a["mu"]),
                 uses=["lam", "mu"], name="pair")
    prob.set_objective("minimize", {"lam": 1.0})
    sol = solve_sdp(prob, opts)
    if sol.status == "infeasible":
        raise SdpError("pair bound subproblem reported infeasible")
    return float(sol.values["lam"])


def _clip0(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def solve_v_step(estimates: ChannelSet, cfg: SystemConfig, decoders: DecoderSet,
                 weights: WeightSet, model: NormBoundedError, eta: float,
                 opts: SdpOptions = None):
    """Precoder update at fixed U, G: minimize sum_ij alpha_i lam_ij
    + eta rho sum_j ||V_j||^2 subject to the robust and power blocks.
    Separates across transmitters into K independent cone programs."""
    K, M, N, d = cfg.K, cfg.M, cfg.N, cfg.d
    sigma = np.sqrt(cfg.sigma2)
    Btilde = shaping_lift(model, M)
    A = [herm(weights.G[i]) @ herm(decoders.U[i]) for i in range(K)]
    Gh = [herm(weights.G[i]) for i in range(K)]
    V = np.empty((K, M, d), dtype=complex)
    lam = np.zeros((K, K))
    mu = np.zeros((K, K))
    for j in range(K):
        prob = SdpProblem(f"tx{j}")
        prob.add_complex("V", M, d)
        prob.add_real("s")
        lin = {"s": float(eta) * cfg.rho}
        for i in range(K):
            prob.add_real(f"lam{i}")
            prob.add_real(f"mu{i}")
            lin[f"lam{i}"] = cfg.alpha[i]

            def blk(a, i=i, j=j):
                e, E = _pair_terms(i, j, estimates.H[i, j], a["V"], A[i],
                                   Gh[i], sigma)
                return _robust_block(e, E, Btilde[i, j], model.eps[i, j],
                                     a[f"lam{i}"], a[f"mu{i}"])

            prob.add_lmi(blk, uses=["V", f"lam{i}", f"mu{i}"], name=f"pair{i}")
        prob.add_lmi(lambda a: np.block(
            [[np.array([[a["s"]]], dtype=complex), herm(vec(a["V"]).reshape(-1, 1))],
             [vec(a["V"]).reshape(-1, 1), np.eye(M * d, dtype=complex)]]),
            uses=["s", "V"], name="power-epigraph")
        prob.add_lmi(lambda a: np.array([[cfg.P_m - a["s"]]]), uses=["s"],
                     name="power-cap")
        prob.set_objective("minimize", lin)
        sol = solve_sdp(prob, opts)
        if sol.status == "infeasible":
            raise SdpError(f"precoder step for transmitter {j} reported infeasible")
        V[j] = sol.values["V"]
        for i in range(K):
            lam[i, j] = sol.values[f"lam{i}"]
            mu[i, j] = sol.values[f"mu{i}"]
    aux = RobustAuxiliaries(lam=_clip0(lam), mu=_clip0(mu), Btilde=Btilde)
    return PrecoderSet(V=V), aux


def solve_u_step(estimates: ChannelSet, cfg: SystemConfig, precoders: PrecoderSet,
                 weights: WeightSet, model: NormBoundedError,
                 opts: SdpOptions = None):
    """Receive-filter update at fixed V, G: minimize sum_ij alpha_i lam_ij
    subject to the robust blocks. Separates across receivers."""
    K, M, N, d = cfg.K, cfg.M, cfg.N, cfg.d
    sigma = np.sqrt(cfg.sigma2)
    Btilde = shaping_lift(model, M)
    U = np.empty((K, N, d), dtype=complex)
    lam = np.zeros((K, K))
    mu = np.zeros((K, K))
    for i in range(K):
        prob = SdpProblem(f"rx{i}")
        prob.add_complex("U", N, d)
        lin = {}
        Gh = herm(weights.G[i])
        for j in range(K):
            prob.add_real(f"lam{j}")
            prob.add_real(f"mu{j}")
            lin[f"lam{j}"] = cfg.alpha[i]

            def blk(a, i=i, j=j, Gh=Gh):
                Ai = Gh @ herm(a["U"])
                e, E = _pair_terms(i, j, estimates.H[i, j], precoders.V[j],
                                   Ai, Gh, sigma)
                return _robust_block(e, E, Btilde[i, j], model.eps[i, j],
                                     a[f"lam{j}"], a[f"mu{j}"])

            prob.add_lmi(blk, uses=["U", f"lam{j}", f"mu{j}"], name=f"pair{j}")
        prob.set_objective("minimize", lin)
        sol = solve_sdp(prob, opts)
        if sol.status == "infeasible":
            raise SdpError(f"filter step for receiver {i} reported infeasible")
        U[i] = sol.values["U"]
        for j in range(K):
            lam[i, j] = sol.values[f"lam{j}"]
            mu[i, j] = sol.values[f"mu{j}"]
    aux = RobustAuxiliaries(lam=_clip0(lam), mu=_clip0(mu), Btilde=Btilde)
    return DecoderSet(U=U), aux


def solve_g_step(estimates: ChannelSet, cfg: SystemConfig, precoders: PrecoderSet,
                 decoders: DecoderSet, weights: WeightSet,
                 model: NormBoundedError, opts: SdpOptions = None):
    """Weight update at fixed V, U: maximize sum_i 2 alpha_i log2|G_i|
    - alpha_i sum_j lam_ij over Hermitian PD G (a det-maximization per
    receiver). The current weights seed the interior-point start."""
    K, M, N, d = cfg.K, cfg.M, cfg.N, cfg.d
    sigma = np.sqrt(cfg.sigma2)
    Btilde = shaping_lift(model, M)
    G = np.empty((K, d, d), dtype=complex)
    lam = np.zeros((K, K))
    mu = np.zeros((K, K))
    for i in range(K):
        prob = SdpProblem(f"wt{i}")
        prob.add_hermitian("G", d)
        lin = {}
        start = {"G": _hermitian_part_pd(weights.G[i])}
        Ui = decoders.U[i]
        for j in range(K):
            prob.add_real(f"lam{j}")
            prob.add_real(f"mu{j}")
            lin[f"lam{j}"] = -cfg.alpha[i]

            def blk(a, i=i, j=j, Ui=Ui):
                Ai = herm(a["G"]) @ herm(Ui)
                e, E = _pair_terms(i, j, estimates.H[i, j], precoders.V[j],
                                   Ai, herm(a["G"]), sigma)
                return _robust_block(e, E, Btilde[i, j], model.eps[i, j],
                                     a[f"lam{j}"], a[f"mu{j}"])

            prob.add_lmi(blk, uses=["G", f"lam{j}", f"mu{j}"], name=f"pair{j}")
            e0, E0 = _pair_terms(i, j, estimates.H[i, j], precoders.V[j],
                                 herm(start["G"]) @ herm(Ui), herm(start["G"]),
                                 sigma)
            smax = np.linalg.norm(model.eps[i, j] * (E0 @ Btilde[i, j]), 2)
            start[f"mu{j}"] = 2.0 * smax * smax + 1.0
            start[f"lam{j}"] = start[f"mu{j}"] + 2.0 * float(np.real(np.vdot(e0, e0))) + 1.0
        prob.set_objective("maximize", lin)
        prob.add_logdet(2.0 * cfg.alpha[i], "G")
        sol = solve_maxdet(prob, opts, start=start)
        if sol.status == "infeasible":
            raise SdpError(f"weight step for receiver {i} reported infeasible")
        G[i] = hermitize(sol.values["G"])
        for j in range(K):
            lam[i, j] = sol.values[f"lam{j}"]
            mu[i, j] = sol.values[f"mu{j}"]
    aux = RobustAuxiliaries(lam=_clip0(lam), mu=_clip0(mu), Btilde=Btilde)
    return WeightSet(G=G), aux


def _hermitian_part_pd(G: np.ndarray, floor: float = 1e-9) -> np.ndarray:
    """Nearest-in-spirit Hermitian PD seed for an interior-point start."""
    w, Q = np.linalg.eigh(hermitize(G))
    return hermitize(Q @ np.diag(np.clip(w, floor, None).astype(complex)) @ herm(Q))


def _inv_sqrt_scaled(S: np.ndarray) -> np.ndarray:
    """(S ln 2)^(-1/2) for Hermitian PD S."""
    w, Q = np.linalg.eigh(hermitize(S) * LN2)
    w = np.clip(w, 1e-12, None)
    return hermitize(Q @ np.diag(1.0 / np.sqrt(w)).astype(complex) @ herm(Q))


def lower_bound_rates(weights: WeightSet, aux: RobustAuxiliaries,
                      cfg: SystemConfig) -> np.ndarray:
    """Per-user worst-case rate bounds in bits/s/Hz; exact at zero radius
    and optimal weights."""
    out = np.empty(cfg.K)
    for i in range(cfg.K):
        out[i] = (2.0 * logdet_hermitian(weights.G[i]) / LN2
                  + cfg.d * _LOG2_LN2 + cfg.d / LN2
                  - float(np.sum(aux.lam[i])))
    return out


def subtractive_lower_bound(weights: WeightSet, aux: RobustAuxiliaries,
                            precoders: PrecoderSet, cfg: SystemConfig,
                            eta: float) -> float:
    """Weighted rate bound minus eta times consumed power (the alternation's
    merit function; non-decreasing across V -> U -> G steps)."""
    rates = lower_bound_rates(weights, aux, cfg)
    return float(np.dot(cfg.alpha, rates)) - eta * total_power(precoders, cfg)


def run_worstcase(estimates: ChannelSet, cfg: SystemConfig,
                  model: NormBoundedError, opts: WcOptions = None):
    """Full worst-case design.

    Returns (PrecoderSet, DecoderSet, WeightSet, GeeReport); the report's
    rates and gee are worst-case lower bounds, and its trace holds one
    (eta, objective) pair per alternation sweep.
    """
    if model.B.shape != (cfg.K, cfg.K, cfg.N, cfg.N):
        raise DimensionError("error model does not match the config")
    opts = opts or WcOptions()

    V = initial_precoders(estimates, cfg)
    U = mmse_receiver(estimates, V, cfg)
    G = WeightSet(G=np.stack([
        _inv_sqrt_scaled(mse_matrix(estimates, V, U, cfg, i))
        for i in range(cfg.K)]))
    Btilde = shaping_lift(model, cfg.M)
    pair = assemble_error_terms(estimates, V, U, G, cfg)
    lam0 = np.array([[min_feasible_lambda(pair.e[i][j], pair.E[i][j],
                                          Btilde[i, j], model.eps[i, j], opts.sdp)
                      for j in range(cfg.K)] for i in range(cfg.K)])
    state = {"V": V, "U": U, "G": G,
             "aux": RobustAuxiliaries(lam=_clip0(lam0),
                                      mu=np.zeros((cfg.K, cfg.K)), Btilde=Btilde),
             "sweep_capped": False}
    trace = []

    def inner(eta_bits: float):
        J_prev = subtractive_lower_bound(state["G"], state["aux"], state["V"],
                                         cfg, eta_bits)
        hit_cap = True
        for _ in range(opts.max_sweeps):
            state["V"], state["aux"] = solve_v_step(
                estimates, cfg, state["U"], state["G"], model, eta_bits, opts.sdp)
            state["U"], state["aux"] = solve_u_step(
                estimates, cfg, state["V"], state["G"], model, opts.sdp)
            state["G"], state["aux"] = solve_g_step(
                estimates, cfg, state["V"], state["U"], state["G"], model, opts.sdp)
            J = subtractive_lower_bound(state["G"], state["aux"], state["V"],
                                        cfg, eta_bits)
            trace.append((float(eta_bits), float(J)))
            if abs(J - J_prev) <= opts.sweep_tol * (1.0 + abs(J_prev)):
                hit_cap = False
                break
            J_prev = J
        state["sweep_capped"] = state["sweep_capped"] or hit_cap
        rates = lower_bound_rates(state["G"], state["aux"], cfg)
        num = float(np.dot(cfg.alpha, rates))
        snapshot = (state["V"], state["U"], state["G"], state["aux"])
        return snapshot, num, total_power(state["V"], cfg)

    rates0 = lower_bound_rates(G, state["aux"], cfg)
    eta0 = float(np.dot(cfg.alpha, rates0)) / total_power(V, cfg)
    (V, U, G, aux), ftrace = solve_fractional(inner, eta0,
                                              tol=opts.dinkelbach_tol,
                                              max_iter=opts.dinkelbach_max_iter)

    rates = lower_bound_rates(G, aux, cfg)
    power = total_power(V, cfg)
    warning = ""
    if not ftrace.converged:
        warning = "ratio search hit its iteration cap"
    elif state["sweep_capped"]:
        warning = "an alternation loop hit its sweep cap"
    report = GeeReport(rates=tuple(float(r) for r in rates),
                       total_power=power,
                       gee=float(np.dot(cfg.alpha, rates)) / power,
                       trace=tuple(trace),
                       converged=ftrace.converged and not state["sweep_capped"],
                       warning=warning)
    return V, U, G, report
