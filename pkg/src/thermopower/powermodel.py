"""Generalized temperature/frequency/core-count power model.

A CoefficientSet holds seven structural scalars (m1..m7) plus the shared
exponential slope a2.  At a given frequency f and active core count c the
exponential-curve parameters are

    g_s = m1 + m2*f + m3*f^2        per-core scale (watts)
    g_o = g_s / m4                  shared offset (watts)
    a0  = g_s*c + g_o
    a1  = m5*f + m6 + (5 - c)*m7    (degrees Celsius)

and power at temperature T is exp((T - a1)/a2) + a0.  Two built-in sets
(labels "A7" and "A15") are provided; calibrate() estimates a new set from
observed (f, c, a0, a1, a2) triples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InsufficientSpan,
    InvalidCores,
    InvalidFreq,
    InvalidParams,
    SingularFit,
)


@dataclass(frozen=True)
class ModelParams:
    """Exponential-curve parameters: power = exp((T - a1)/a2) + a0."""

    a0: float
    a1: float
    a2: float

    def __post_init__(self):
        for name in ("a0", "a1", "a2"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParams(f"{name} must be finite")
        if self.a2 == 0:
            raise InvalidParams("a2 must be nonzero")

    def power(self, temp: float) -> float:
        return math.exp((temp - self.a1) / self.a2) + self.a0


@dataclass(frozen=True)
class CoefficientSet:
    label: str
    m1: float
    m2: float
    m3: float
    m4: float
    m5: float
    m6: float
    m7: float
    a2: float

    def __post_init__(self):
        for name in ("m1", "m2", "m3", "m4", "m5", "m6", "m7", "a2"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParams(f"{name} must be finite")
        if self.m4 == 0:
            raise InvalidParams("m4 must be nonzero")
        if self.a2 == 0:
            raise InvalidParams("a2 must be nonzero")

    @property
    def m(self) -> tuple[float, ...]:
        return (self.m1, self.m2, self.m3, self.m4, self.m5, self.m6, self.m7)

    def to_dict(self) -> dict:
        return {"label": self.label, "m": list(self.m), "a2": self.a2}

    @classmethod
    def from_dict(cls, data: dict) -> "CoefficientSet":
        m = data["m"]
        if len(m) != 7:
            raise InvalidParams(f"expected 7 m-coefficients, got {len(m)}")
        return cls(str(data["label"]), *map(float, m), float(data["a2"]))


def _check_operating_point(freq: float, cores: int) -> None:
    if not (isinstance(freq, (int, float)) and math.isfinite(freq) and freq > 0):
        raise InvalidFreq(f"freq must be a positive number of GHz, got {freq!r}")
    if not isinstance(cores, int) or not 1 <= cores <= 4:
        raise InvalidCores(f"cores must be an integer in 1..4, got {cores!r}")


def derive_params(coeffs: CoefficientSet, freq: float, cores: int) -> ModelParams:
    """Instantiate the exponential-curve parameters at (freq, cores)."""
    _check_operating_point(freq, cores)
    g_s = coeffs.m1 + coeffs.m2 * freq + coeffs.m3 * freq * freq
    g_o = g_s / coeffs.m4
    a0 = g_s * cores + g_o
    a1 = coeffs.m5 * freq + coeffs.m6 + (5 - cores) * coeffs.m7
    return ModelParams(a0, a1, coeffs.a2)


def evaluate_power(coeffs: CoefficientSet, temp: float, freq: float, cores: int) -> float:
    """Model power in watts at (temp, freq, cores)."""
    return derive_params(coeffs, freq, cores).power(temp)


def builtin_sets() -> list[CoefficientSet]:
    """The two built-in processor calibrations."""
    return [
        CoefficientSet("A7", 0.028, -0.093, 0.371, 2.202, -38.242, 187.668, 8.430, 33.105),
        CoefficientSet("A15", 0.220, -0.315, 0.467, 2.202, -56.652, 165.896, 8.430, 33.105),
    ]


def builtin_set(label: str) -> CoefficientSet:
    for cs in builtin_sets():
        if cs.label.lower() == label.lower():
            return cs
    known = ", ".join(cs.label for cs in builtin_sets())
    raise KeyError(f"no built-in set {label!r} (known: {known})")


@dataclass(frozen=True)
class CalibrationDiagnostics:
    """Residual summary for a calibration run.

    a1_rms / a0_rms are root-mean-square residuals of the observed values
    against the calibrated structure; a2_spread is max - min of the
    observed a2 values; used_freqs lists the frequencies that contributed
    a per-frequency affine fit of a0 versus core count.
    """

    n_observations: int
    a1_rms: float
    a0_rms: float
    a2_spread: float
    used_freqs: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "n_observations": self.n_observations,
            "a1_rms": self.a1_rms,
            "a0_rms": self.a0_rms,
            "a2_spread": self.a2_spread,
            "used_freqs": list(self.used_freqs),
        }


Observation = "tuple[float, int, ModelParams]"


def calibrate(
    observations: Sequence[tuple[float, int, ModelParams]],
    label: str = "calibrated",
) -> tuple[CoefficientSet, CalibrationDiagnostics]:
    """Estimate a CoefficientSet from observed per-(freq, cores) curve params.

    a2 is the mean observed a2.  (m5, m6, m7) come from ordinary least
    squares of a1 on (f, 1, 5-c).  The a0 structure is recovered in two
    stages: an affine regression of a0 on c within each frequency yields
    g_s(f) (slope) and g_o(f) (intercept); g_s is then fitted quadratically
    in f for (m1, m2, m3), and m4 is the mean of g_s/g_o over the usable
    frequencies.
    """
    obs = [(float(f), int(c), p) for f, c, p in observations]
    freqs = sorted({f for f, _, _ in obs})
    cores_seen = {c for _, c, _ in obs}
    if len(obs) < 8 or len(freqs) < 3 or len(cores_seen) < 2:
        raise InsufficientSpan(
            f"need >= 8 observations over >= 3 frequencies and >= 2 core counts "
            f"(got {len(obs)} observations, {len(freqs)} frequencies, "
            f"{len(cores_seen)} core counts)"
        )
    for f, c, _ in obs:
        _check_operating_point(f, c)

    a2 = float(np.mean([p.a2 for _, _, p in obs]))
    if a2 == 0:
        raise SingularFit("observed a2 values average to zero")

    f_arr = np.array([f for f, _, _ in obs])
    c_arr = np.array([c for _, c, _ in obs], float)
    a1_arr = np.array([p.a1 for _, _, p in obs])
    design = np.column_stack([f_arr, np.ones_like(f_arr), 5.0 - c_arr])
    sol, _, rank, _ = np.linalg.lstsq(design, a1_arr, rcond=None)
    if rank < 3:
        raise SingularFit("a1 regression design is rank-deficient")
    m5, m6, m7 = map(float, sol)

    # per-frequency affine structure of a0 in c
    gs_list, go_list, used = [], [], []
    for f in freqs:
        rows = [(c, p.a0) for ff, c, p in obs if ff == f]
        if len({c for c, _ in rows}) < 2:
            continue
        cs = np.array([c for c, _ in rows], float)
        a0s = np.array([a0 for _, a0 in rows])
        slope, intercept = np.polyfit(cs, a0s, 1)
        gs_list.append(float(slope))
        go_list.append(float(intercept))
        used.append(f)
    if len(used) < 3:
        raise SingularFit(
            f"need >= 3 frequencies with >= 2 core counts each to shape g_s(f); "
            f"got {len(used)}"
        )
    m3, m2, m1 = map(float, np.polyfit(np.array(used), np.array(gs_list), 2))
    ratios = np.array(gs_list) / np.array(go_list)
    if not np.all(np.isfinite(ratios)):
        raise SingularFit("a0 intercept g_o is zero at some frequency")
    m4 = float(np.mean(ratios))
    if m4 == 0 or not math.isfinite(m4):
        raise SingularFit("degenerate g_s/g_o ratio")

    result = CoefficientSet(label, m1, m2, m3, m4, m5, m6, m7, a2)
    a1_res, a0_res = [], []
    for f, c, p in obs:
        derived = derive_params(result, f, c)
        a1_res.append(derived.a1 - p.a1)
        a0_res.append(derived.a0 - p.a0)
    diag = CalibrationDiagnostics(
        n_observations=len(obs),
        a1_rms=float(np.sqrt(np.mean(np.square(a1_res)))),
        a0_rms=float(np.sqrt(np.mean(np.square(a0_res)))),
        a2_spread=float(max(p.a2 for _, _, p in obs) - min(p.a2 for _, _, p in obs)),
        used_freqs=tuple(used),
    )
    return result, diag
