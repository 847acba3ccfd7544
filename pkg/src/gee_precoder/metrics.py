"""Rates, MSE matrices, power accounting, and the energy-efficiency ratio.

User k transmits d streams through precoder V_k (M x d) and is decoded by
U_k (N x d). With C_k the interference-plus-noise covariance at receiver k,

    R_k = log2 det(I_d + V_k^H H_kk^H U_k (U_k^H C_k U_k)^-1 U_k^H H_kk V_k)

in bits/s/Hz, and the global energy efficiency is the weighted sum rate per
watt of consumed power, sum_k alpha_k R_k / sum_k (rho tr(V_k V_k^H) +
M P_cir).
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, SystemConfig, _readonly
from .exceptions import DecoderRankError, DegeneratePowerError, DimensionError
from .linalg import LN2, herm, hermitize


@dataclass(frozen=True)
class PrecoderSet:
    """Transmit filters, V[k] is M x d."""

    V: np.ndarray  # (K, M, d) complex

    def __post_init__(self):
        V = np.asarray(self.V, dtype=complex)
        if V.ndim != 3:
            raise DimensionError("precoder array must have shape (K, M, d)")
        object.__setattr__(self, "V", _readonly(V))

    def power(self, k: int) -> float:
        """Transmit power tr(V_k V_k^H) of user k."""
        return float(np.sum(np.abs(self.V[k]) ** 2))


@dataclass(frozen=True)
class DecoderSet:
    """Receive filters, U[k] is N x d."""

    U: np.ndarray  # (K, N, d) complex

    def __post_init__(self):
        U = np.asarray(self.U, dtype=complex)
        if U.ndim != 3:
            raise DimensionError("decoder array must have shape (K, N, d)")
        object.__setattr__(self, "U", _readonly(U))


@dataclass(frozen=True)
class GeeReport:
    """Outcome of a GEE evaluation or optimization run.

    rates are bits/s/Hz per user, total_power in watts, gee in bits/Hz/Joule.
    trace holds per-iteration (eta, subtractive objective) pairs for solver
    runs and is empty for plain evaluations. converged is False when an
    iteration cap was hit; warning then says which.
    """

    rates: tuple
    total_power: float
    gee: float
    trace: tuple = ()
    converged: bool = True
    warning: str = ""

    def to_dict(self) -> dict:
        return {
            "rates": list(self.rates),
            "total_power": self.total_power,
            "gee": self.gee,
            "trace": [list(t) for t in self.trace],
            "converged": self.converged,
            "warning": self.warning,
        }


def _check_dims(channels: ChannelSet, cfg: SystemConfig) -> None:
    if channels.H.shape != (cfg.K, cfg.K, cfg.N, cfg.M):
        raise DimensionError("channel set does not match the config")


def interference_covariance(channels: ChannelSet, precoders: PrecoderSet,
                            cfg: SystemConfig, k: int) -> np.ndarray:
    """C_k = sigma2 I_N + sum_{l != k} H_kl V_l V_l^H H_kl^H."""
    _check_dims(channels, cfg)
    C = cfg.sigma2 * np.eye(cfg.N, dtype=complex)
    for l in range(cfg.K):
        if l == k:
            continue
        T = channels.H[k, l] @ precoders.V[l]
        C = C + T @ herm(T)
    return hermitize(C)


def mmse_receiver(channels: ChannelSet, precoders: PrecoderSet,
                  cfg: SystemConfig) -> DecoderSet:
    """U_k = (C_k + H_kk V_k V_k^H H_kk^H)^-1 H_kk V_k for every user."""
    U = np.empty((cfg.K, cfg.N, cfg.d), dtype=complex)
    for k in range(cfg.K):
        Hd = channels.H[k, k] @ precoders.V[k]
        A = interference_covariance(channels, precoders, cfg, k) + Hd @ herm(Hd)
        U[k] = np.linalg.solve(A, Hd)
    return DecoderSet(U=U)


def user_rate(channels: ChannelSet, precoders: PrecoderSet,
              decoders: DecoderSet, cfg: SystemConfig, k: int) -> float:
    """Achievable rate of user k in bits/s/Hz for the given decoder."""
    A = herm(decoders.U[k]) @ channels.H[k, k] @ precoders.V[k]
    if not np.any(A):
        # no signal component reaches the decoder output
        return 0.0
    C = interference_covariance(channels, precoders, cfg, k)
    Gram = hermitize(herm(decoders.U[k]) @ C @ decoders.U[k])
    try:
        L = np.linalg.cholesky(Gram)
    except np.linalg.LinAlgError:
        raise DecoderRankError(f"decoder {k} has a singular output covariance")
    X = np.linalg.solve(L, A)  # Gram^-1 = L^-H L^-1
    Q = np.eye(cfg.d, dtype=complex) + herm(X) @ X
    sign, logdet = np.linalg.slogdet(hermitize(Q))
    return float(logdet / LN2)


def mse_matrix(channels: ChannelSet, precoders: PrecoderSet,
               decoders: DecoderSet, cfg: SystemConfig, k: int) -> np.ndarray:
    """d x d MSE matrix of user k under linear decoding."""
    Uk = decoders.U[k]
    D = herm(Uk) @ channels.H[k, k] @ precoders.V[k] - np.eye(cfg.d)
    E = D @ herm(D) + cfg.sigma2 * herm(Uk) @ Uk
    for j in range(cfg.K):
        if j == k:
            continue
        T = herm(Uk) @ channels.H[k, j] @ precoders.V[j]
        E = E + T @ herm(T)
    return hermitize(E)


def total_power(precoders: PrecoderSet, cfg: SystemConfig) -> float:
    """sum_k rho tr(V_k V_k^H) + K * M * P_cir, in watts."""
    tx = sum(precoders.power(k) for k in range(cfg.K))
    return float(cfg.rho * tx + cfg.K * cfg.M * cfg.P_cir)


def gee(channels: ChannelSet, precoders: PrecoderSet, decoders: DecoderSet,
        cfg: SystemConfig) -> GeeReport:
    """Weighted sum rate per watt for a fixed design (no optimization)."""
    rates = tuple(user_rate(channels, precoders, decoders, cfg, k)
                  for k in range(cfg.K))
    power = total_power(precoders, cfg)
    if power <= 0:
        raise DegeneratePowerError("total consumed power must be positive")
    value = sum(a * r for a, r in zip(cfg.alpha, rates)) / power
    return GeeReport(rates=rates, total_power=power, gee=float(value))


def simulate_transmission(channels: ChannelSet, precoders: PrecoderSet,
                          decoders: DecoderSet, symbols, noise,
                          cfg: SystemConfig):
    """Decoder outputs for given symbol blocks and noise draws.

    symbols[k] is d x T, noise[k] is N x T; returns a list of d x T arrays
    shat_k = U_k^H (sum_l H_kl V_l s_l + z_k). Pure function of its inputs.
    """
    if len(symbols) != cfg.K or len(noise) != cfg.K:
        raise DimensionError("need one symbol block and one noise block per user")
    out = []
    for k in range(cfg.K):
        y = np.asarray(noise[k], dtype=complex)
        if y.shape[0] != cfg.N:
            raise DimensionError(f"noise block {k} must have N rows")
        for l in range(cfg.K):
            s = np.asarray(symbols[l], dtype=complex)
            if s.shape[0] != cfg.d:
                raise DimensionError(f"symbol block {l} must have d rows")
            y = y + channels.H[k, l] @ (precoders.V[l] @ s)
        out.append(herm(decoders.U[k]) @ y)
    return out
