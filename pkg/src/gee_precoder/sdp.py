"""Dense SDP and determinant-maximization layer.

Problems are stated over named real scalars, complex matrices, and Hermitian
matrices; constraints are affine Hermitian-matrix-valued maps required PSD,
and the objective is a real linear functional plus optional
coeff * log2 det(block) terms over PD blocks.

Constraint maps are compiled by basis evaluation into Hermitian coefficient
matrices (one per real parameter), checked Hermitian and affine, lowered to
real symmetric blocks through the [[Re, -Im], [Im, Re]] embedding, and
handed to a dense primal-dual path-following cone solver with Nesterov-Todd
scaling (cvxopt's conelp; log-det objectives go through cvxopt's nonlinear
interior-point front end with an exact gradient/Hessian callback). Dense
factorizations only; problems are capped at a desk scale of total complex
block side <= 300. Identical problems with identical options solve to
identical bits.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as _cvxmat
from cvxopt import solvers as _cvxsolvers

from .exceptions import SdpError
from .linalg import LN2, complex_to_json, herm, hermitize, json_to_complex, real_embedding

_BLOCK_SIDE_CAP = 300  # desk-scale guard on the sum of complex block sides
_HERM_TOL = 1e-9
_AFFINE_TOL = 1e-7


@dataclass(frozen=True)
class SdpOptions:
    """Solver tolerances; defaults give feasibility ~1e-8 and gap ~1e-6."""

    feastol: float = 1e-8
    abstol: float = 1e-8
    reltol: float = 1e-6
    max_iter: int = 200
    verify: bool = True


@dataclass(frozen=True)
class SdpSolution:
    """status is 'optimal', 'infeasible' (including certified unboundedness),
    or 'max-iterations' (best iterate returned). objective is the maximize-
    sense value including log-det terms."""

    status: str
    objective: float
    values: dict
    kkt_residuals: dict


class _Var:
    __slots__ = ("name", "kind", "shape", "offset", "size")

    def __init__(self, name, kind, shape, offset, size):
        self.name, self.kind, self.shape = name, kind, shape
        self.offset, self.size = offset, size


def _nparams(kind: str, shape) -> int:
    if kind == "real":
        return 1
    if kind == "complex":
        return 2 * shape[0] * shape[1]
    if kind == "hermitian":
        return shape[0] * shape[0]
    raise SdpError(f"unknown variable kind {kind}")


def _decode(var: _Var, reals: np.ndarray):
    """Real parameter slice -> variable value."""
    if var.kind == "real":
        return float(reals[0])
    if var.kind == "complex":
        r, c = var.shape
        half = r * c
        return (reals[:half] + 1j * reals[half:]).reshape(r, c, order="F")
    n = var.shape[0]
    A = np.diag(reals[:n].astype(complex))
    idx = n
    for j in range(n):
        for i in range(j):
            A[i, j] = reals[idx] + 1j * reals[idx + 1]
            A[j, i] = reals[idx] - 1j * reals[idx + 1]
            idx += 2
    return A


def _encode(var: _Var, value) -> np.ndarray:
    """Variable value -> real parameter slice (inverse of _decode)."""
    if var.kind == "real":
        return np.array([float(value)])
    if var.kind == "complex":
        v = np.asarray(value, dtype=complex).reshape(-1, order="F")
        return np.concatenate([v.real, v.imag])
    A = np.asarray(value, dtype=complex)
    n = var.shape[0]
    out = [np.real(np.diag(A))]
    off = []
    for j in range(n):
        for i in range(j):
            off.extend([A[i, j].real, A[i, j].imag])
    return np.concatenate([out[0], np.array(off)]) if off else out[0]


class SdpProblem:
    """Container for variables, PSD constraints, and the objective."""

    def __init__(self, name: str = ""):
        self.name = name
        self._vars = {}
        self._order = []
        self._m = 0
        self._lmis = []      # (name, fn, uses) until compiled
        self._linear = {}    # var name -> coefficient array / scalar
        self._logdets = []   # (coeff_bits, fn, uses)
        self._sense = "maximize"
        self._compiled = None

    # -- variable declaration ------------------------------------------------

    def _add(self, name, kind, shape) -> None:
        if name in self._vars:
            raise SdpError(f"variable {name!r} declared twice")
        size = _nparams(kind, shape)
        self._vars[name] = _Var(name, kind, shape, self._m, size)
        self._order.append(name)
        self._m += size
        self._compiled = None

    def add_real(self, name: str) -> None:
        """Free real scalar."""
        self._add(name, "real", ())

    def add_complex(self, name: str, rows: int, cols: int) -> None:
        """Free complex rows x cols matrix."""
        self._add(name, "complex", (rows, cols))

    def add_hermitian(self, name: str, n: int) -> None:
        """Free Hermitian n x n matrix."""
        self._add(name, "hermitian", (n, n))

    # -- constraints and objective --------------------------------------------

    def add_lmi(self, fn, uses=None, name: str = "") -> None:
        """Require fn(assignment) >= 0 (PSD). fn must be real-affine in the
        declared variables and Hermitian-valued; uses optionally lists the
        variable names fn depends on (the rest get zero coefficients)."""
        self._lmis.append((name or f"lmi{len(self._lmis)}", fn, uses))
        self._compiled = None

    def set_objective(self, sense: str = "maximize", linear: dict = None) -> None:
        """Linear part: real scalars contribute coeff * x, matrix variables
        Re tr(L^H X) for a same-shape coefficient L."""
        if sense not in ("maximize", "minimize"):
            raise SdpError("sense must be 'maximize' or 'minimize'")
        self._sense = sense
        self._linear = dict(linear or {})
        self._compiled = None

    def add_logdet(self, coeff: float, block, uses=None) -> None:
        """Add coeff * log2 det(block) to the maximize-sense objective.
        block is a Hermitian variable name or an affine Hermitian map."""
        if isinstance(block, str):
            var = self._vars.get(block)
            if var is None or var.kind != "hermitian":
                raise SdpError("log-det over a name requires a Hermitian variable")
            fn = (lambda a, _n=block: a[_n])
            uses = [block]
        else:
            fn = block
        self._logdets.append((float(coeff), fn, uses))
        self._compiled = None

    # -- compilation -----------------------------------------------------------

    def zero_assignment(self) -> dict:
        out = {}
        for name in self._order:
            var = self._vars[name]
            out[name] = _decode(var, np.zeros(var.size))
        return out

    def assignment_from_vector(self, y: np.ndarray) -> dict:
        out = {}
        for name in self._order:
            var = self._vars[name]
            out[name] = _decode(var, np.asarray(y)[var.offset:var.offset + var.size])
        return out

    def vector_from_assignment(self, assignment: dict) -> np.ndarray:
        y = np.zeros(self._m)
        for name in self._order:
            var = self._vars[name]
            y[var.offset:var.offset + var.size] = _encode(var, assignment[name])
        return y

    def _param_indices(self, uses) -> list:
        names = self._order if uses is None else list(uses)
        idx = []
        for name in names:
            var = self._vars.get(name)
            if var is None:
                raise SdpError(f"unknown variable {name!r} in uses")
            idx.extend(range(var.offset, var.offset + var.size))
        return idx

    def _compile_map(self, fn, uses, what: str):
        """Basis-evaluate an affine Hermitian map into (F0, [(k, Fk), ...])."""
        zero = self.zero_assignment()
        F0 = np.asarray(fn(zero), dtype=complex)
        if F0.ndim != 2 or F0.shape[0] != F0.shape[1]:
            raise SdpError(f"{what} must produce a square matrix")
        scale = max(1.0, float(np.abs(F0).max()) if F0.size else 1.0)
        coeffs = []
        for k in self._param_indices(uses):
            y = np.zeros(self._m)
            y[k] = 1.0
            Fk = np.asarray(fn(self.assignment_from_vector(y)), dtype=complex) - F0
            fscale = max(scale, float(np.abs(Fk).max()) if Fk.size else 0.0)
            if np.abs(Fk - herm(Fk)).max() > _HERM_TOL * fscale:
                raise SdpError(f"{what} is not Hermitian-valued")
            if np.abs(Fk).max() > 0:
                coeffs.append((k, hermitize(Fk)))
        if np.abs(F0 - herm(F0)).max() > _HERM_TOL * scale:
            raise SdpError(f"{what} is not Hermitian-valued")
        F0 = hermitize(F0)
        # affinity check at a generic point
        probe = np.cos(np.arange(1.0, self._m + 1.0))
        test = np.asarray(fn(self.assignment_from_vector(probe)), dtype=complex)
        model = F0 + sum(probe[k] * Fk for k, Fk in coeffs)
        tscale = max(1.0, float(np.abs(test).max()) if test.size else 1.0)
        if np.abs(test - model).max() > _AFFINE_TOL * tscale:
            raise SdpError(f"{what} is not affine in the declared variables")
        return F0, coeffs

    def _objective_vector(self) -> np.ndarray:
        b = np.zeros(self._m)
        for name, coeff in self._linear.items():
            var = self._vars.get(name)
            if var is None:
                raise SdpError(f"objective references unknown variable {name!r}")
            if var.kind == "real":
                b[var.offset] = float(coeff)
            else:
                L = np.asarray(coeff, dtype=complex)
                if L.shape != var.shape:
                    raise SdpError(f"objective coefficient for {name!r} has wrong shape")
                # Re tr(L^H X) as a linear form in X's real parameters
                for k in range(var.size):
                    e = np.zeros(var.size)
                    e[k] = 1.0
                    Xk = _decode(var, e)
                    b[var.offset + k] = float(np.real(np.trace(herm(L) @ Xk)))
        if self._sense == "minimize":
            b = -b
        return b

    def compile(self):
        if self._compiled is not None:
            return self._compiled
        if self._m == 0:
            raise SdpError("problem has no variables")
        if self._logdets and self._sense == "minimize":
            raise SdpError("log-det terms require a maximize objective")
        lmis = [(nm, *self._compile_map(fn, uses, f"constraint {nm!r}"))
                for nm, fn, uses in self._lmis]
        total_side = sum(F0.shape[0] for _, F0, _ in lmis)
        if total_side > _BLOCK_SIDE_CAP:
            raise SdpError(f"total block side {total_side} exceeds the desk-scale "
                           f"cap of {_BLOCK_SIDE_CAP}")
        logdets = [(c, *self._compile_map(fn, uses, "log-det block"))
                   for c, fn, uses in self._logdets]
        self._compiled = (self._objective_vector(), lmis, logdets)
        return self._compiled


def _real_block(F0, coeffs):
    """Lower a complex Hermitian block to a real symmetric one (skip the
    doubling when every coefficient is already real)."""
    mats = [F0] + [Fk for _, Fk in coeffs]
    if all(np.abs(np.imag(Fm)).max() <= 1e-14 * max(1.0, np.abs(Fm).max()) for Fm in mats):
        return np.real(F0), [(k, np.real(Fk)) for k, Fk in coeffs], False
    return real_embedding(F0), [(k, real_embedding(Fk)) for k, Fk in coeffs], True


def _stuff_cones(m: int, lmis):
    """Build conelp's (G, h, dims) from compiled blocks. 1x1 blocks become
    linear-cone rows; everything else a dense 's' block."""
    lin_rows, lin_h = [], []
    sdp_sides, sdp_G, sdp_h = [], [], []
    for _, F0, coeffs in lmis:
        R0, rcoeffs, _ = _real_block(F0, coeffs)
        n = R0.shape[0]
        if n == 1:
            row = np.zeros(m)
            for k, Rk in rcoeffs:
                row[k] = -Rk[0, 0]
            lin_rows.append(row)
            lin_h.append(R0[0, 0])
        else:
            Gb = np.zeros((n * n, m))
            for k, Rk in rcoeffs:
                Gb[:, k] = -Rk.reshape(n * n, order="F")
            sdp_G.append(Gb)
            sdp_h.append(R0.reshape(n * n, order="F"))
            sdp_sides.append(n)
    parts_G = ([np.vstack(lin_rows)] if lin_rows else []) + sdp_G
    parts_h = ([np.array(lin_h)] if lin_h else []) + sdp_h
    G = np.vstack(parts_G) if parts_G else np.zeros((0, m))
    h = np.concatenate(parts_h) if parts_h else np.zeros(0)
    dims = {"l": len(lin_rows), "q": [], "s": sdp_sides}
    return G, h, dims


def _solver_options(opts: SdpOptions) -> dict:
    return {
        "show_progress": False,
        "maxiters": int(opts.max_iter),
        "abstol": float(opts.abstol),
        "reltol": float(opts.reltol),
        "feastol": float(opts.feastol),
        "refinement": 1,
    }


def _kkt_from(sol: dict) -> dict:
    def _f(key):
        v = sol.get(key)
        return float(v) if v is not None else float("nan")
    return {
        "gap": _f("gap"),
        "relative_gap": _f("relative gap"),
        "primal_infeasibility": _f("primal infeasibility"),
        "dual_infeasibility": _f("dual infeasibility"),
    }


def _feasibility_ok(problem: SdpProblem, assignment: dict, lmis) -> bool:
    y = problem.vector_from_assignment(assignment)
    for nm, F0, coeffs in lmis:
        F = F0 + sum(y[k] * Fk for k, Fk in coeffs)
        if np.linalg.eigvalsh(hermitize(F))[0] < -1e-7 * max(1.0, np.abs(F).max()):
            return False
    return True


def _objective_at(problem: SdpProblem, b: np.ndarray, logdets, y: np.ndarray) -> float:
    """User-sense objective value (b already carries the sense flip)."""
    val = float(b @ y)
    for c, F0, coeffs in logdets:
        D = F0 + sum(y[k] * Fk for k, Fk in coeffs)
        _, ld = np.linalg.slogdet(hermitize(D))
        val += c * ld / LN2
    return val if problem._sense == "maximize" else -val


def solve_sdp(problem: SdpProblem, opts: SdpOptions = None) -> SdpSolution:
    """Solve a linear-objective problem. Use solve_maxdet when log-det terms
    are present."""
    if problem._logdets:
        raise SdpError("problem has log-det terms, call solve_maxdet")
    opts = opts or SdpOptions()
    b, lmis, _ = problem.compile()
    G, h, dims = _stuff_cones(problem._m, lmis)
    sol = _cvxsolvers.conelp(_cvxmat(-b), _cvxmat(G), _cvxmat(h), dims=dims,
                             options=_solver_options(opts))
    return _finish(problem, b, [], lmis, sol, opts)


def _finish(problem, b, logdets, lmis, sol, opts) -> SdpSolution:
    raw = sol.get("status", "unknown")
    if raw == "optimal":
        status = "optimal"
    elif raw in ("primal infeasible", "dual infeasible"):
        status = "infeasible"
    else:
        status = "max-iterations"
    kkt = _kkt_from(sol)
    if status == "infeasible" or sol.get("x") is None:
        return SdpSolution(status="infeasible", objective=float("nan"),
                           values={}, kkt_residuals=kkt)
    y = np.array(sol["x"]).ravel()
    values = problem.assignment_from_vector(y)
    if status == "optimal" and opts.verify and not _feasibility_ok(problem, values, lmis):
        status = "max-iterations"
    objective = _objective_at(problem, b, logdets, y)
    return SdpSolution(status=status, objective=objective, values=values,
                       kkt_residuals=kkt)


def solve_maxdet(problem: SdpProblem, opts: SdpOptions = None,
                 start: dict = None) -> SdpSolution:
    """Solve with coeff * log2 det(block) objective terms.

    start optionally supplies an assignment whose log-det blocks are PD
    (Hermitian variables default to the identity, which covers the common
    case of log-det directly over a variable).
    """
    opts = opts or SdpOptions()
    b, lmis, logdets = problem.compile()
    if not logdets:
        return solve_sdp(problem, opts)
    m = problem._m

    if start is None:
        start = problem.zero_assignment()
        for name in problem._order:
            var = problem._vars[name]
            if var.kind == "hermitian":
                start[name] = np.eye(var.shape[0], dtype=complex)
    y0 = problem.vector_from_assignment(start)

    # natural-log coefficients of the minimized objective
    cnat = [(c / LN2, F0, coeffs) for c, F0, coeffs in logdets]

    def _blocks_at(y):
        out = []
        for c, F0, coeffs in cnat:
            D = hermitize(F0 + sum(y[k] * Fk for k, Fk in coeffs))
            try:
                L = np.linalg.cholesky(D)
            except np.linalg.LinAlgError:
                return None
            out.append((c, L, coeffs))
        return out

    if _blocks_at(y0) is None:
        raise SdpError("start point has a non-PD log-det block")

    def F(x=None, z=None):
        if x is None:
            return 0, _cvxmat(y0)
        y = np.array(x).ravel()
        blocks = _blocks_at(y)
        if blocks is None:
            return None
        f = -float(b @ y)
        Df = -b.copy()
        for c, L, coeffs in blocks:
            f -= c * 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
            Linv = np.linalg.inv(L)
            Dinv = herm(Linv) @ Linv
            for k, Fk in coeffs:
                Df[k] -= c * float(np.real(np.trace(Dinv @ Fk)))
        if z is None:
            return _cvxmat(f), _cvxmat(Df).T
        H = np.zeros((m, m))
        for c, L, coeffs in blocks:
            Linv = np.linalg.inv(L)
            S = [(k, Linv @ Fk @ herm(Linv)) for k, Fk in coeffs]
            for a, (k, Sk) in enumerate(S):
                for kl, Sl in S[a:]:
                    v = c * float(np.real(np.sum(Sk * Sl.T)))
                    H[k, kl] += v
                    if kl != k:
                        H[kl, k] += v
        return _cvxmat(f), _cvxmat(Df).T, _cvxmat(float(z[0]) * H)

    G, h, dims = _stuff_cones(m, lmis)
    kwargs = {"options": _solver_options(opts)}
    if G.shape[0] > 0:
        sol = _cvxsolvers.cp(F, G=_cvxmat(G), h=_cvxmat(h), dims=dims, **kwargs)
    else:
        sol = _cvxsolvers.cp(F, **kwargs)
    return _finish(problem, b, logdets, lmis, sol, opts)


# -- JSON interchange ----------------------------------------------------------

def _map_to_json(F0, coeffs):
    return {"F0": complex_to_json(F0),
            "coeffs": [[int(k), complex_to_json(Fk)] for k, Fk in coeffs]}


def problem_to_json(problem: SdpProblem) -> str:
    """Compiled problem as JSON for cross-checking against external solvers."""
    b, lmis, logdets = problem.compile()
    return json.dumps({
        "name": problem.name,
        "sense": problem._sense,
        "variables": [{"name": v, "kind": problem._vars[v].kind,
                       "shape": list(problem._vars[v].shape)}
                      for v in problem._order],
        "objective_vector": list(map(float, b)),
        "lmis": [{"name": nm, **_map_to_json(F0, coeffs)} for nm, F0, coeffs in lmis],
        "logdets": [{"coeff_log2": c, **_map_to_json(F0, coeffs)}
                    for c, F0, coeffs in logdets],
    })


def solution_to_json(solution: SdpSolution) -> str:
    values = {}
    for name, val in solution.values.items():
        values[name] = val if np.isscalar(val) else complex_to_json(np.asarray(val))
    return json.dumps({
        "status": solution.status,
        "objective": solution.objective,
        "values": values,
        "kkt_residuals": solution.kkt_residuals,
    })
