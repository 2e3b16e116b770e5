"""Temperature/power curve fits, the relative-residual error metric,
group aggregation, and an exact paired sign test.

All three fit families minimize the same objective, the sum of squared
relative residuals sum(((model_i - y_i)/y_i)**2), so the reported error
sqrt(objective) is exactly the minimized quantity.  Linear and quadratic
fits solve it in closed form as weighted least squares with weights
1/y_i**2; the exponential fit uses damped Gauss-Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    AllTies,
    DegenerateInput,
    EmptyGroup,
    InitFailure,
    LengthMismatch,
    NoConvergence,
    ZeroMeasurement,
)
from .trace import Trace

MAX_ITER = 200
REL_OBJECTIVE_TOL = 1e-12
REL_STEP_TOL = 1e-10
GIVE_UP_STEP = 1e-6


class FitKind(Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class FitResult:
    """A fitted curve.

    coeffs ordering: Linear (a1, a0); Quadratic (a2, a1, a0);
    Exponential (a0, a1, a2).  iterations is 0 for closed-form fits.
    """

    kind: FitKind
    coeffs: tuple[float, ...]
    error: float
    iterations: int
    converged: bool

    def predict(self, temp: float) -> float:
        if self.kind is FitKind.LINEAR:
            a1, a0 = self.coeffs
            return a1 * temp + a0
        if self.kind is FitKind.QUADRATIC:
            a2, a1, a0 = self.coeffs
            return a2 * temp * temp + a1 * temp + a0
        a0, a1, a2 = self.coeffs
        return math.exp((temp - a1) / a2) + a0


FitInput = "Trace | tuple[Sequence[float], Sequence[float]]"


def _as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    """Accept a Trace or a (temps, powers) pair; return float arrays."""
    if isinstance(data, Trace):
        return np.array(data.temps(), float), np.array(data.powers(), float)
    temps, powers = data
    t = np.asarray(temps, float)
    y = np.asarray(powers, float)
    if t.ndim != 1 or y.ndim != 1 or t.shape != y.shape:
        raise LengthMismatch(f"temps ({t.shape}) and powers ({y.shape}) differ")
    return t, y


def fit_error(measured: Sequence[float], model: Sequence[float]) -> float:
    """sqrt(sum(((model_i - measured_i)/measured_i)**2))."""
    y = np.asarray(measured, float)
    m = np.asarray(model, float)
    if y.shape != m.shape or y.ndim != 1:
        raise LengthMismatch(f"measured ({y.shape}) and model ({m.shape}) differ")
    if y.size == 0:
        raise LengthMismatch("need at least one sample")
    if np.any(y == 0):
        raise ZeroMeasurement("relative residuals undefined for measured power 0")
    return float(np.sqrt(np.sum(((m - y) / y) ** 2)))


def _weighted_poly_fit(t, y, degree: int, kind: FitKind) -> FitResult:
    if np.any(y == 0):
        raise ZeroMeasurement("relative residuals undefined for measured power 0")
    if len(np.unique(t)) < degree + 1:
        raise DegenerateInput(
            f"{kind.value} fit needs >= {degree + 1} distinct temperatures"
        )
    # minimize sum((p(t_i)/y_i - 1)^2): rows [t^d/y ... 1/y], target 1
    cols = [t**k / y for k in range(degree, -1, -1)]
    design = np.column_stack(cols)
    coeffs, _, rank, _ = np.linalg.lstsq(design, np.ones_like(y), rcond=None)
    if rank < degree + 1:
        raise DegenerateInput(f"{kind.value} fit design matrix is rank-deficient")
    model = np.polyval(coeffs, t)
    return FitResult(kind, tuple(map(float, coeffs)), fit_error(y, model), 0, True)


def fit_linear(data) -> FitResult:
    """Best P = a1*T + a0 in the relative-residual sense; coeffs (a1, a0)."""
    t, y = _as_xy(data)
    return _weighted_poly_fit(t, y, 1, FitKind.LINEAR)


def fit_quadratic(data) -> FitResult:
    """Best P = a2*T^2 + a1*T + a0; coeffs (a2, a1, a0)."""
    t, y = _as_xy(data)
    return _weighted_poly_fit(t, y, 2, FitKind.QUADRATIC)


def _exp_objective(t, y, a0, a1, a2):
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp((t - a1) / a2)
        r = (e + a0 - y) / y
        s = float(np.sum(r * r)) if np.all(np.isfinite(r)) else math.inf
    return e, r, s


def fit_exponential(data) -> FitResult:
    """Best P = exp((T - a1)/a2) + a0; coeffs (a0, a1, a2).

    Damped iterative least squares on the relative-residual objective.
    Starts from a log-linearization with a0 floored at 0.95*min(power).
    """
    t, y = _as_xy(data)
    if np.any(y == 0):
        raise ZeroMeasurement("relative residuals undefined for measured power 0")
    if len(np.unique(t)) < 3:
        raise DegenerateInput("exponential fit needs >= 3 distinct temperatures")
    if y.size < 3:
        raise DegenerateInput("exponential fit needs >= 3 samples")

    # log-linearized initialization
    a0 = 0.95 * float(np.min(y))
    shifted = y - a0
    if np.any(shifted <= 0):
        raise InitFailure("power - a0 floor is non-positive; cannot take logs")
    z = np.log(shifted)
    if float(np.max(z) - np.min(z)) < 1e-13:
        raise DegenerateInput("flat power data; a2 is unidentifiable")
    slope, intercept = np.polyfit(t, z, 1)
    if slope == 0 or not math.isfinite(slope):
        raise DegenerateInput("flat power data; a2 is unidentifiable")
    a2 = 1.0 / float(slope)
    a1 = -float(intercept) * a2

    _, r, s = _exp_objective(t, y, a0, a1, a2)
    if not math.isfinite(s):
        raise InitFailure("initialization evaluates to a non-finite objective")

    lam = 1e-3
    rel_step = math.inf
    converged = False
    iterations = 0
    while iterations < MAX_ITER:
        iterations += 1
        e, r, _ = _exp_objective(t, y, a0, a1, a2)
        jac = np.column_stack(
            [1.0 / y, -e / (a2 * y), -e * (t - a1) / (a2 * a2 * y)]
        )
        jtj = jac.T @ jac
        jtr = jac.T @ r
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)), -jtr)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = (a0 + step[0], a1 + step[1], a2 + step[2])
        theta = math.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
        rel_step = float(np.linalg.norm(step)) / (theta + 1e-300)
        # a2 must keep its sign; a sign flip jumps between disjoint branches
        if trial[2] == 0 or (trial[2] > 0) != (a2 > 0):
            lam *= 10.0
            continue
        _, _, s_trial = _exp_objective(t, y, *trial)
        if s_trial < s:
            a0, a1, a2 = trial
            drop = (s - s_trial) / max(s, 1e-300)
            s = s_trial
            lam /= 10.0
            if drop < REL_OBJECTIVE_TOL or rel_step < REL_STEP_TOL:
                converged = True
                break
        else:
            lam *= 10.0
    else:
        if rel_step > GIVE_UP_STEP:
            raise NoConvergence(
                f"no fixed point after {MAX_ITER} iterations (step {rel_step:.2e})"
            )

    return FitResult(
        FitKind.EXPONENTIAL,
        (float(a0), float(a1), float(a2)),
        math.sqrt(s),
        iterations,
        converged,
    )


_FITTERS = {
    FitKind.LINEAR: fit_linear,
    FitKind.QUADRATIC: fit_quadratic,
    FitKind.EXPONENTIAL: fit_exponential,
}


def fit(data, kind: FitKind) -> FitResult:
    return _FITTERS[kind](data)


def aggregate_error(fits: Sequence[tuple[Trace, FitResult]]) -> float:
    """Pool every per-sample relative residual in the group, then take the norm.

    Pooling means the squared sums add: two traces with residual-square
    sums s1 and s2 aggregate to sqrt(s1 + s2).
    """
    if len(fits) == 0:
        raise EmptyGroup("cannot aggregate an empty group")
    total = 0.0
    for trace, result in fits:
        for sample in trace.samples:
            rel = (result.predict(sample.temp_c) - sample.power_w) / sample.power_w
            total += rel * rel
    return math.sqrt(total)


def sign_test(errors_a: Sequence[float], errors_b: Sequence[float]) -> float:
    """Exact two-sided paired sign test.

    Counts k = #{i : a_i < b_i} over the n non-tied pairs and returns
    2*min(CDF(k), 1 - CDF(k-1)) under Binomial(n, 1/2), clamped to <= 1.
    Computed in exact rational arithmetic, so sign_test(a, b) equals
    sign_test(b, a) bit for bit.
    """
    if len(errors_a) != len(errors_b):
        raise LengthMismatch(
            f"paired lists differ in length ({len(errors_a)} vs {len(errors_b)})"
        )
    if len(errors_a) == 0:
        raise LengthMismatch("need at least one pair")
    wins = sum(1 for a, b in zip(errors_a, errors_b) if a < b)
    losses = sum(1 for a, b in zip(errors_a, errors_b) if a > b)
    n = wins + losses
    if n == 0:
        raise AllTies("all pairs are tied; the sign test is uninformative")
    denom = Fraction(1, 2**n)
    cdf_k = sum(math.comb(n, j) for j in range(wins + 1)) * denom
    cdf_km1 = cdf_k - math.comb(n, wins) * denom
    p = 2 * min(cdf_k, 1 - cdf_km1)
    return float(min(p, Fraction(1)))


_PAIRS = (
    (FitKind.EXPONENTIAL, FitKind.QUADRATIC),
    (FitKind.QUADRATIC, FitKind.LINEAR),
    (FitKind.EXPONENTIAL, FitKind.LINEAR),
)


@dataclass
class ModelComparison:
    """Per-trace fits for all three families plus group-level statistics.

    results[i][kind] is the FitResult or None when that fit failed;
    failures records (trace index, kind, message) for every None;
    aggregated[kind] pools residuals over the traces where kind succeeded
    (None if it succeeded nowhere); p_values[(a, b)] is the sign test over
    traces where both families succeeded (None if that set is empty or
    fully tied).
    """

    results: list[dict[FitKind, FitResult | None]]
    failures: list[tuple[int, FitKind, str]]
    aggregated: dict[FitKind, float | None]
    p_values: dict[tuple[FitKind, FitKind], float | None]


def compare_models(traces: Sequence[Trace]) -> ModelComparison:
    """Fit all three families to every trace and test them pairwise."""
    if len(traces) == 0:
        raise EmptyGroup("need at least one trace to compare")
    results: list[dict[FitKind, FitResult | None]] = []
    failures: list[tuple[int, FitKind, str]] = []
    for i, trace in enumerate(traces):
        row: dict[FitKind, FitResult | None] = {}
        for kind, fitter in _FITTERS.items():
            try:
                row[kind] = fitter(trace)
            except Exception as exc:  # record and exclude, never abort the batch
                row[kind] = None
                failures.append((i, kind, f"{type(exc).__name__}: {exc}"))
        results.append(row)

    aggregated: dict[FitKind, float | None] = {}
    for kind in _FITTERS:
        group = [
            (trace, row[kind])
            for trace, row in zip(traces, results)
            if row[kind] is not None
        ]
        aggregated[kind] = aggregate_error(group) if group else None

    p_values: dict[tuple[FitKind, FitKind], float | None] = {}
    for ka, kb in _PAIRS:
        pairs = [
            (row[ka].error, row[kb].error)
            for row in results
            if row[ka] is not None and row[kb] is not None
        ]
        if not pairs:
            p_values[(ka, kb)] = None
            continue
        try:
            p_values[(ka, kb)] = sign_test([a for a, _ in pairs], [b for _, b in pairs])
        except AllTies:
            p_values[(ka, kb)] = None
    return ModelComparison(results, failures, aggregated, p_values)
