"""System configuration, channel generation, and CSI error models.

A K-user interference network: transmitter j has M antennas, receiver i has
N antennas, and H[i][j] is the N x M channel from transmitter j to receiver
i. Channels are Rayleigh flat fading with i.i.d. CN(0, sigma_h2) entries.

Imperfect CSI enters in one of two ways:

* StochasticError: the estimation error of every link has i.i.d.
  CN(0, sigma_delta2) entries.
* NormBoundedError: the error of link (i, j) is only known to satisfy
  ||B_ij Delta_ij||_F <= eps_ij for a Hermitian PD shaping matrix B_ij
  (eps is the radius of the shaped Frobenius ball).

Randomness is drawn from per-link PCG64 streams keyed by
SeedSequence((seed, i, j)), so the draw for a link does not depend on the
order in which links are visited.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DimensionError, ShapingMatrixError
from .linalg import complex_to_json, json_to_complex


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemConfig:
    """Static description of the network and the power model.

    Power is accounted as rho * tr(V_k V_k^H) + M * P_cir per user, where
    rho >= 1 is the inverse power-amplifier efficiency and P_cir is the
    per-antenna circuit power. All powers in watts, noise variance sigma2
    per receive antenna.
    """

    K: int
    M: int
    N: int
    d: int
    sigma2: float = 1.0
    P_m: float = 1.0
    P_cir: float = 0.0
    rho: float = 1.0
    alpha: tuple = None
    sigma_h2: float = 1.0

    def __post_init__(self):
        if self.K < 1 or self.M < 1 or self.N < 1:
            raise ConfigError("K, M, N must be positive")
        if not (1 <= self.d <= min(self.M, self.N)):
            raise ConfigError("d must satisfy 1 <= d <= min(M, N)")
        if self.sigma2 <= 0:
            raise ConfigError("sigma2 must be positive")
        if self.P_m <= 0:
            raise ConfigError("P_m must be positive")
        if self.P_cir < 0:
            raise ConfigError("P_cir must be nonnegative")
        if self.rho < 1:
            raise ConfigError("rho is an inverse PA efficiency, rho >= 1")
        if self.sigma_h2 <= 0:
            raise ConfigError("sigma_h2 must be positive")
        alpha = self.alpha
        if alpha is None:
            alpha = tuple(1.0 for _ in range(self.K))
        else:
            alpha = tuple(float(a) for a in alpha)
            if len(alpha) != self.K:
                raise ConfigError("alpha must have one weight per user")
            if any(a <= 0 for a in alpha):
                raise ConfigError("alpha weights must be positive")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class ChannelSet:
    """All K^2 links of one network realization; H[i][j] is N x M."""

    H: np.ndarray  # (K, K, N, M) complex

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 4 or H.shape[0] != H.shape[1]:
            raise DimensionError("channel array must have shape (K, K, N, M)")
        object.__setattr__(self, "H", _readonly(H))

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[2]

    @property
    def M(self) -> int:
        return self.H.shape[3]


@dataclass(frozen=True)
class StochasticError:
    """Estimation error with i.i.d. CN(0, sigma_delta2) entries on every link."""

    sigma_delta2: float

    def __post_init__(self):
        if self.sigma_delta2 < 0:
            raise ConfigError("sigma_delta2 must be nonnegative")


@dataclass(frozen=True)
class NormBoundedError:
    """Deterministic error set ||B[i][j] Delta[i][j]||_F <= eps[i][j]."""

    B: np.ndarray  # (K, K, N, N) complex, Hermitian PD per link
    eps: np.ndarray  # (K, K) nonnegative radii

    def __post_init__(self):
        B = np.asarray(self.B, dtype=complex)
        eps = np.asarray(self.eps, dtype=float)
        if B.ndim != 4 or B.shape[0] != B.shape[1] or B.shape[2] != B.shape[3]:
            raise DimensionError("B must have shape (K, K, N, N)")
        if eps.shape != B.shape[:2]:
            raise DimensionError("eps must have shape (K, K)")
        if np.any(eps < 0):
            raise ConfigError("eps radii must be nonnegative")
        object.__setattr__(self, "B", _readonly(B))
        object.__setattr__(self, "eps", _readonly(eps))

    @classmethod
    def identity(cls, K: int, N: int, eps: float) -> "NormBoundedError":
        """Unshaped balls of common radius eps on every link."""
        B = np.broadcast_to(np.eye(N, dtype=complex), (K, K, N, N))
        return cls(B=np.array(B), eps=np.full((K, K), float(eps)))


@dataclass(frozen=True)
class ErrorRealization:
    """One drawn error set; delta[i][j] is N x M."""

    delta: np.ndarray  # (K, K, N, M) complex

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=complex)
        if delta.ndim != 4 or delta.shape[0] != delta.shape[1]:
            raise DimensionError("delta array must have shape (K, K, N, M)")
        object.__setattr__(self, "delta", _readonly(delta))


def _link_rng(seed: int, i: int, j: int) -> np.random.Generator:
    """Independent, order-invariant stream for link (i, j)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, i, j))))


def _complex_gaussian(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_channels(cfg: SystemConfig, seed: int) -> ChannelSet:
    """Draw one network realization with CN(0, sigma_h2) entries per link."""
    H = np.empty((cfg.K, cfg.K, cfg.N, cfg.M), dtype=complex)
    for i in range(cfg.K):
        for j in range(cfg.K):
            rng = _link_rng(seed, i, j)
            H[i, j] = _complex_gaussian(rng, (cfg.N, cfg.M), cfg.sigma_h2)
    return ChannelSet(H=H)


def _check_shaping(Bij: np.ndarray, i: int, j: int) -> None:
    if np.abs(Bij - Bij.conj().T).max() > 1e-10 * max(1.0, np.abs(Bij).max()):
        raise ShapingMatrixError(f"B[{i}][{j}] is not Hermitian")
    w = np.linalg.eigvalsh(0.5 * (Bij + Bij.conj().T))
    if w[0] <= 1e-12 * max(1.0, w[-1]):
        raise ShapingMatrixError(f"B[{i}][{j}] is singular or indefinite")


def sample_error(model, cfg: SystemConfig, seed: int) -> ErrorRealization:
    """Draw one error realization consistent with the model.

    Stochastic links are i.i.d. complex Gaussian. Norm-bounded links are
    uniform on the shaped ball: draw a Gaussian direction Z, scale to
    u^(1/(2MN)) * eps / ||Z||_F with u uniform on (0, 1] (a complex N x M
    matrix has 2MN real degrees of freedom), and map through B^-1 so that
    ||B Delta||_F = u^(1/(2MN)) * eps <= eps.
    """
    K, N, M = cfg.K, cfg.N, cfg.M
    delta = np.zeros((K, K, N, M), dtype=complex)
    if isinstance(model, StochasticError):
        if model.sigma_delta2 > 0:
            for i in range(K):
                for j in range(K):
                    rng = _link_rng(seed, i, j)
                    delta[i, j] = _complex_gaussian(rng, (N, M), model.sigma_delta2)
        return ErrorRealization(delta=delta)
    if isinstance(model, NormBoundedError):
        if model.B.shape[:2] != (K, K) or model.B.shape[2] != N:
            raise DimensionError("shaping matrices do not match the config")
        for i in range(K):
            for j in range(K):
                eps = float(model.eps[i, j])
                Bij = model.B[i, j]
                _check_shaping(Bij, i, j)
                if eps == 0.0:
                    continue
                rng = _link_rng(seed, i, j)
                Z = _complex_gaussian(rng, (N, M), 1.0)
                u = rng.uniform()
                if u == 0.0:
                    u = 1.0
                radius = u ** (1.0 / (2 * M * N)) * eps / np.linalg.norm(Z)
                delta[i, j] = np.linalg.solve(Bij, radius * Z)
        return ErrorRealization(delta=delta)
    raise TypeError(f"unknown error model {type(model).__name__}")


def compose(estimates: ChannelSet, errors: ErrorRealization) -> ChannelSet:
    """True channels as estimate plus error, H = Hhat + Delta."""
    if estimates.H.shape != errors.delta.shape:
        raise DimensionError("estimates and errors have mismatched shapes")
    return ChannelSet(H=estimates.H + errors.delta)


def channelset_to_json(channels: ChannelSet) -> str:
    """Serialize to JSON. Schema: {"shape": [K, K, N, M], "H": nested lists
    with [re, im] leaf pairs, indexed H[i][j][n][m]}."""
    return json.dumps({
        "shape": list(channels.H.shape),
        "H": complex_to_json(channels.H),
    })


def channelset_from_json(text: str) -> ChannelSet:
    data = json.loads(text)
    H = json_to_complex(data["H"])
    if list(H.shape) != data["shape"]:
        raise DimensionError("JSON shape field does not match the payload")
    return ChannelSet(H=H)
