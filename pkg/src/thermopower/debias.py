"""Temperature-bias cancellation: transform measured power to a reference
temperature and score the result.

The transforms shift each measured power P_m at temperature T_m to the
power P_r the device would have drawn at the reference temperature T_r:

    linear       P_r = P_m + eta1*(T_r - T_m)
    quadratic    P_r = P_m + eta2*(T_r^2 - T_m^2) + eta1*(T_r - T_m)
    exponential  P_r = P_m + exp((T_r - a1)/a2) - exp((T_m - a1)/a2)

The constant curve term cancels in every case, so it is never needed.
Quality metrics: AFL is the measured power spread as a percent of the
median; FL compares the transformed spread/median ratio to the measured
one (small is good); RAT measures departure of the mean from the median
(asymmetry) of the transformed series.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from statistics import fmean, median
from typing import Sequence

from .errors import InvalidParams, LengthMismatch, ZeroSpread
from .fitting import FitKind, fit_exponential, fit_linear, fit_quadratic
from .trace import Trace, _fmt

_ETA_ARITY = {FitKind.LINEAR: 1, FitKind.QUADRATIC: 2, FitKind.EXPONENTIAL: 2}


@dataclass(frozen=True)
class DebiasSpec:
    """Transform coefficients.

    eta by kind: linear (eta1,); quadratic (eta2, eta1);
    exponential (a1, a2) of the fitted curve.
    """

    kind: FitKind
    eta: tuple[float, ...]
    ref_temp: float

    def __post_init__(self):
        object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        if len(self.eta) != _ETA_ARITY[self.kind]:
            raise InvalidParams(
                f"{self.kind.value} debias takes {_ETA_ARITY[self.kind]} eta "
                f"coefficients, got {len(self.eta)}"
            )
        if not all(math.isfinite(e) for e in self.eta):
            raise InvalidParams("eta coefficients must be finite")
        if not math.isfinite(self.ref_temp):
            raise InvalidParams("ref_temp must be finite")
        if self.kind is FitKind.EXPONENTIAL and self.eta[1] == 0:
            raise InvalidParams("exponential debias needs a nonzero a2")

    def shift(self, temp: float) -> float:
        """Power increment moving a sample from temp to ref_temp."""
        if self.kind is FitKind.LINEAR:
            (eta1,) = self.eta
            return eta1 * (self.ref_temp - temp)
        if self.kind is FitKind.QUADRATIC:
            eta2, eta1 = self.eta
            return eta2 * (self.ref_temp**2 - temp**2) + eta1 * (self.ref_temp - temp)
        a1, a2 = self.eta
        return math.exp((self.ref_temp - a1) / a2) - math.exp((temp - a1) / a2)


@dataclass(frozen=True)
class DebiasMetrics:
    afl: float
    fl: float
    rat: float


@dataclass(frozen=True)
class DebiasedTrace:
    source: Trace
    spec: DebiasSpec
    ref_power: tuple[float, ...]
    metrics: DebiasMetrics

    def __post_init__(self):
        object.__setattr__(self, "ref_power", tuple(self.ref_power))
        if len(self.ref_power) != len(self.source.samples):
            raise LengthMismatch(
                f"{len(self.ref_power)} transformed powers for "
                f"{len(self.source.samples)} samples"
            )


def metric_afl(trace: Trace) -> float:
    """Measured power spread as a percent of the median."""
    powers = trace.powers()
    return 100.0 * (max(powers) - min(powers)) / median(powers)


def metric_fl(measured: Sequence[float], transformed: Sequence[float]) -> float:
    """Transformed fluctuation over measured fluctuation (1 = no change)."""
    if len(measured) != len(transformed):
        raise LengthMismatch(
            f"measured ({len(measured)}) and transformed ({len(transformed)}) differ"
        )
    if len(measured) == 0:
        raise LengthMismatch("need at least one sample")
    spread_m = max(measured) - min(measured)
    if spread_m == 0:
        raise ZeroSpread("measured powers are constant; FL is undefined")
    spread_t = max(transformed) - min(transformed)
    return (spread_t / median(transformed)) / (spread_m / median(measured))


def metric_rat(transformed: Sequence[float]) -> float:
    """(mean - median)/median of the transformed powers."""
    if len(transformed) == 0:
        raise LengthMismatch("need at least one sample")
    med = median(transformed)
    return (fmean(transformed) - med) / med


def debias(trace: Trace, spec: DebiasSpec) -> DebiasedTrace:
    """Transform every sample to spec.ref_temp and attach quality metrics.

    Warns (UserWarning) when ref_temp lies outside the measured temperature
    range; picking an interior reference keeps the transform interpolative.
    FL is NaN for a constant-power input, where it is undefined.
    """
    temps = trace.temps()
    lo, hi = min(temps), max(temps)
    if not lo <= spec.ref_temp <= hi:
        warnings.warn(
            f"reference temperature {spec.ref_temp} is outside the measured "
            f"range [{lo}, {hi}]; the transform extrapolates",
            stacklevel=2,
        )
    measured = trace.powers()
    ref_power = tuple(p + spec.shift(t) for t, p in zip(temps, measured))
    try:
        fl = metric_fl(measured, ref_power)
    except ZeroSpread:
        fl = math.nan
    metrics = DebiasMetrics(afl=metric_afl(trace), fl=fl, rat=metric_rat(ref_power))
    return DebiasedTrace(trace, spec, ref_power, metrics)


def fit_eta(trace: Trace, kind: FitKind, ref_temp: float) -> DebiasSpec:
    """Regress the trace with the requested family and keep the slope terms.

    Linear keeps (eta1,); quadratic keeps (eta2, eta1); exponential keeps
    (a1, a2).  The constant term never matters for the transform.
    """
    if kind is FitKind.LINEAR:
        a1, _ = fit_linear(trace).coeffs
        eta = (a1,)
    elif kind is FitKind.QUADRATIC:
        a2, a1, _ = fit_quadratic(trace).coeffs
        eta = (a2, a1)
    else:
        _, a1, a2 = fit_exponential(trace).coeffs
        eta = (a1, a2)
    return DebiasSpec(kind, eta, float(ref_temp))


def write_debiased(debiased: DebiasedTrace) -> str:
    """Trace CSV with the transformed series as an extra power_ref_w column."""
    meta = debiased.source.meta
    lines = [
        f"#processor={meta.processor}",
        f"#freq_ghz={_fmt(meta.freq_ghz)}",
        f"#cores={meta.cores}",
        f"#ref_temp_c={_fmt(debiased.spec.ref_temp)}",
        f"#debias_kind={debiased.spec.kind.value}",
        "time_s,temp_c,power_w,power_ref_w",
    ]
    for sample, ref in zip(debiased.source.samples, debiased.ref_power):
        lines.append(
            f"{_fmt(sample.time_s)},{_fmt(sample.temp_c)},"
            f"{_fmt(sample.power_w)},{_fmt(ref)}"
        )
    return "\n".join(lines) + "\n"
