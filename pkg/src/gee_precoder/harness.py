"""Seeded Monte-Carlo sweeps producing the GEE-vs-uncertainty trend CSVs.

A sweep runs one solver over a grid of (uncertainty level, antenna count,
trial). Channel draws depend only on the per-trial seed, so every sweep
value sees the same channels (common random numbers) and the GEE trend in
the uncertainty level is not masked by sampling noise. Output is a
deterministic CSV: rerunning a spec reproduces it byte for byte except for
the wallclock column.

JSON spec schema (keys with a _dbw suffix are converted to watts):

    {
      "base": {"K": 3, "N": 2, "d": 1, "sigma2": 1.0,
               "P_m_dbw": 0, "P_cir_dbw": -5, "rho": 2.631578947368421},
      "sweep": {"variable": "sigma_delta2", "values": [0, 0.05, 0.1]},
      "antennas": [4, 6],
      "trials": 20,
      "seed": 1234,
      "solver": "statistical",
      "output": "sweep.csv",
      "workers": 1
    }

"sweep.variable" must be sigma_delta2 for the statistical solver and eps
for the worstcase solver. "base.M" is optional; antenna counts come from
"antennas". CSV columns: sweep_variable, sweep_value, M, trial, status,
gee, rate_0..rate_{K-1}, gee_nominal, iterations, wallclock_ms. gee is the
solver's own objective (expected-rate GEE or worst-case lower bound),
gee_nominal re-evaluates the returned design at the estimated channels,
iterations counts inner solver steps. One mean row per (sweep value, M)
group is appended after the data rows with trial=mean, status=summary,
averaging the trials that succeeded.
"""

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import NormBoundedError, SystemConfig, generate_channels
from .exceptions import ConfigError
from .metrics import gee as evaluate_gee
from .stat_robust import run_statistical
from .worstcase import run_worstcase

_SCHEMA = "gee-sweep-v1"
_MASK64 = (1 << 64) - 1

_SOLVER_VARIABLES = {"statistical": "sigma_delta2", "worstcase": "eps"}


def dbw_to_watts(x: float) -> float:
    """Decibel-watts to watts: 10^(x/10)."""
    return float(10.0 ** (float(x) / 10.0))


def splitmix64(z: int) -> int:
    """One splitmix64 scramble step; used to spread trial indices into
    independent 64-bit seeds."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def trial_seed(master_seed: int, trial: int) -> int:
    """Per-trial seed: splitmix64(master xor trial), worker-count invariant."""
    return splitmix64((int(master_seed) ^ int(trial)) & _MASK64)


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: solver, uncertainty grid, antenna counts, and seeding."""

    base: SystemConfig
    sweep_variable: str
    sweep_values: tuple
    antennas: tuple
    trials: int
    seed: int
    solver: str
    output: str = "sweep.csv"
    workers: int = 1

    def __post_init__(self):
        if self.solver not in _SOLVER_VARIABLES:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.sweep_variable != _SOLVER_VARIABLES[self.solver]:
            raise ConfigError(f"solver {self.solver!r} sweeps "
                              f"{_SOLVER_VARIABLES[self.solver]!r}, "
                              f"not {self.sweep_variable!r}")
        values = tuple(float(v) for v in self.sweep_values)
        if not values or any(v < 0 for v in values) or list(values) != sorted(values):
            raise ConfigError("sweep values must be non-negative and sorted")
        antennas = tuple(int(m) for m in self.antennas)
        if not antennas or any(m < self.base.d for m in antennas):
            raise ConfigError("antenna counts must be >= d")
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "sweep_values", values)
        object.__setattr__(self, "antennas", antennas)
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "workers", int(self.workers))


def _config_from_json(data: dict) -> SystemConfig:
    fields = dict(data)
    for key in ("P_m", "P_cir"):
        dbw_key = key + "_dbw"
        if dbw_key in fields:
            if key in fields:
                raise ConfigError(f"give {key} either in watts or dBW, not both")
            fields[key] = dbw_to_watts(fields.pop(dbw_key))
    if "alpha" in fields and fields["alpha"] is not None:
        fields["alpha"] = tuple(float(a) for a in fields["alpha"])
    fields.setdefault("M", max(int(fields.get("d", 1)), 1))
    allowed = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = set(fields) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return SystemConfig(**fields)


_SPEC_KEYS = {"base", "sweep", "antennas", "trials", "seed", "solver",
              "output", "workers"}


def spec_from_json(text: str) -> ExperimentSpec:
    """Parse the documented JSON schema into an ExperimentSpec."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec is not valid JSON: {exc}")
    # a misspelled optional key would otherwise silently fall back to its
    # default, so reject anything outside the documented schema
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
    try:
        sweep = data["sweep"]
        unknown = set(sweep) - {"variable", "values"}
        if unknown:
            raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
        return ExperimentSpec(
            base=_config_from_json(data["base"]),
            sweep_variable=str(sweep["variable"]),
            sweep_values=tuple(sweep["values"]),
            antennas=tuple(data["antennas"]),
            trials=data["trials"],
            seed=data["seed"],
            solver=str(data["solver"]),
            output=str(data.get("output", "sweep.csv")),
            workers=data.get("workers", 1),
        )
    except KeyError as exc:
        raise ConfigError(f"spec is missing key {exc}")


def spec_to_json(spec: ExperimentSpec) -> str:
    base = dataclasses.asdict(spec.base)
    base["alpha"] = list(spec.base.alpha)
    return json.dumps({
        "base": base,
        "sweep": {"variable": spec.sweep_variable,
                  "values": list(spec.sweep_values)},
        "antennas": list(spec.antennas),
        "trials": spec.trials,
        "seed": spec.seed,
        "solver": spec.solver,
        "output": spec.output,
        "workers": spec.workers,
    }, indent=2)


def reference_experiment_spec(solver: str, output: str = "sweep.csv",
                          trials: int = 20, seed: int = 20260816) -> ExperimentSpec:
    """The K=3, d=1, M in {4, 6} trend-study setup (P_cir = -5 dBW,
    P_m = 0 dBW, rho = 1/0.38, unit noise and channel variance)."""
    base = SystemConfig(K=3, M=4, N=2, d=1, sigma2=1.0,
                        P_m=dbw_to_watts(0.0), P_cir=dbw_to_watts(-5.0),
                        rho=1.0 / 0.38)
    if solver == "statistical":
        values = (0.0, 0.05, 0.1, 0.15, 0.2)
    else:
        values = (0.0, 0.1, 0.2, 0.4)
    return ExperimentSpec(base=base, sweep_variable=_SOLVER_VARIABLES[solver],
                          sweep_values=values, antennas=(4, 6), trials=trials,
                          seed=seed, solver=solver, output=output)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    return "nan" if not np.isfinite(x) else f"{x:.12g}"


def _run_trial(spec: ExperimentSpec, value: float, m: int, trial: int) -> dict:
    cfg = dataclasses.replace(spec.base, M=m)
    estimates = generate_channels(cfg, trial_seed(spec.seed, trial))
    t0 = time.perf_counter()
    row = {"sweep_variable": spec.sweep_variable, "sweep_value": value,
           "M": m, "trial": trial, "status": "ok",
           "gee": float("nan"),
           "rates": [float("nan")] * cfg.K,
           "gee_nominal": float("nan"), "iterations": 0}
    try:
        if spec.solver == "statistical":
            precoders, decoders, report = run_statistical(estimates, cfg, value)
        else:
            model = NormBoundedError.identity(cfg.K, cfg.N, value)
            precoders, decoders, _, report = run_worstcase(estimates, cfg, model)
        nominal = evaluate_gee(estimates, precoders, decoders, cfg)
        row.update(gee=report.gee, rates=list(report.rates),
                   gee_nominal=nominal.gee, iterations=len(report.trace))
    except Exception:
        row["status"] = "failed"
    row["wallclock_ms"] = 1e3 * (time.perf_counter() - t0)
    return row


@dataclass(frozen=True)
class SweepResult:
    """All rows of one sweep plus the rendered CSV text."""

    rows: tuple
    csv_text: str
    failures: int

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0


def _render_csv(spec: ExperimentSpec, rows, means) -> str:
    K = spec.base.K
    header = (["sweep_variable", "sweep_value", "M", "trial", "status", "gee"]
              + [f"rate_{k}" for k in range(K)]
              + ["gee_nominal", "iterations", "wallclock_ms"])
    lines = [f"# schema={_SCHEMA}",
             f"# solver={spec.solver} seed={spec.seed} trials={spec.trials}",
             ",".join(header)]
    for row in rows + means:
        cells = [row["sweep_variable"], _fmt(row["sweep_value"]), str(row["M"]),
                 str(row["trial"]), row["status"], _fmt(row["gee"])]
        cells += [_fmt(r) for r in row["rates"]]
        cells += [_fmt(row["gee_nominal"]), _fmt(row["iterations"]),
                  f"{float(row['wallclock_ms']):.3f}"]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def run_sweep(spec: ExperimentSpec) -> SweepResult:
    """Run the whole grid; never raises on per-trial solver failures (they
    are recorded in the status column and reflected in the exit code)."""
    tasks = [(value, m, trial)
             for value in spec.sweep_values
             for m in spec.antennas
             for trial in range(spec.trials)]
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(lambda t: _run_trial(spec, *t), tasks))
    else:
        rows = [_run_trial(spec, *t) for t in tasks]

    means = []
    for value in spec.sweep_values:
        for m in spec.antennas:
            group = [r for r in rows
                     if r["sweep_value"] == value and r["M"] == m]
            ok = [r for r in group if r["status"] == "ok"]
            mean = {"sweep_variable": spec.sweep_variable, "sweep_value": value,
                    "M": m, "trial": "mean", "status": "summary",
                    "gee": float(np.mean([r["gee"] for r in ok])) if ok else float("nan"),
                    "rates": [float(np.mean([r["rates"][k] for r in ok])) if ok
                              else float("nan") for k in range(spec.base.K)],
                    "gee_nominal": float(np.mean([r["gee_nominal"] for r in ok]))
                    if ok else float("nan"),
                    "iterations": float(np.mean([r["iterations"] for r in ok]))
                    if ok else float("nan"),
                    "wallclock_ms": float(np.sum([r["wallclock_ms"] for r in group]))}
            means.append(mean)

    failures = sum(1 for r in rows if r["status"] != "ok")
    return SweepResult(rows=tuple(rows + means),
                       csv_text=_render_csv(spec, rows, means),
                       failures=failures)


def write_sweep(spec: ExperimentSpec, path: str = None) -> SweepResult:
    """Run the sweep and write its CSV to path (default: spec.output)."""
    result = run_sweep(spec)
    with open(path or spec.output, "w", encoding="utf-8") as fh:
        fh.write(result.csv_text)
    return result


def run_self_check(verbose: bool = True) -> int:
    """Fast invariant suite on tiny instances; returns a process exit code."""
    from . import selfcheck
    lines, ok = selfcheck.run_all()
    if verbose:
        for line in lines:
            print(line)
    return 0 if ok else 1
