"""Dinkelbach ratio search for maximizing a fractional objective N(x)/D(x).

Each iteration solves (possibly approximately, but at least as well as the
previous iterate) the subtractive problem max_x N(x) - eta * D(x) and then
updates eta to the achieved ratio. As long as the inner solver never does
worse than the previous iterate, the residual N - eta * D stays nonnegative
and the eta sequence is non-decreasing.
"""

from dataclasses import dataclass

from .exceptions import DegeneratePowerError


@dataclass(frozen=True)
class FractionalTrace:
    """Iteration record of one ratio search.

    etas[t] is the ratio used in iteration t plus the final achieved ratio,
    residuals[t] = N_t - etas[t] * D_t. converged is False when the cap was
    hit before the residual dropped below tol.
    """

    etas: tuple
    residuals: tuple
    iterations: int
    converged: bool


def solve_fractional(inner, eta0: float, tol: float = 1e-6,
                     max_iter: int = 50):
    """Run the ratio search.

    inner(eta) must return (solution, N, D) with D > 0, where solution
    approximately maximizes N - eta * D starting from the incumbent. eta0
    should be the ratio achieved by the initial iterate (not zero), so the
    first residual is already nonnegative.

    Returns (solution, FractionalTrace); the trace's final eta equals the
    returned solution's ratio N/D.
    """
    etas = [float(eta0)]
    residuals = []
    solution = None
    converged = False
    iterations = 0
    for _ in range(max_iter):
        eta = etas[-1]
        solution, num, den = inner(eta)
        if den <= 0:
            raise DegeneratePowerError("fractional denominator must be positive")
        iterations += 1
        res = num - eta * den
        residuals.append(float(res))
        etas.append(float(num / den))
        if res <= tol:
            converged = True
            break
    trace = FractionalTrace(etas=tuple(etas), residuals=tuple(residuals),
                            iterations=iterations, converged=converged)
    return solution, trace
