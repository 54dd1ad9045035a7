"""Fits for localization length, participation ratio, diffusion and its exponent."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from qsaw.classical import EnsembleMoments
from qsaw.errors import (
    InsufficientData,
    InsufficientSupport,
    NonDecaying,
    NonPositiveK,
    NonPositiveVariance,
)
from qsaw.measurement import MeasurementHistogram
from qsaw.params import MapParams

EXACT_FLOOR = 1e-12
SAMPLED_FLOOR_COUNTS = 5
SLOPE_TOL = 1e-12

QUANTITIES = ("localization_length", "ipr_length", "diffusion_coefficient",
              "anomalous_exponent", "fidelity")


@dataclass
class FitReport:
    quantity: str
    value: float
    std_error: float
    window: tuple
    n_points: int
    residual_rms: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite {self.quantity}: {self.value}")
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)


def _linear_fit(x, y, w=None):
    """Weighted least squares ``y = a + b x``; returns (a, b, var_b, residual_rms)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.ones_like(x) if w is None else np.asarray(w, float)
    X = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ coef
    dof = max(len(x) - 2, 1)
    sigma2 = float(np.sum(w * resid**2) / dof)
    cov = sigma2 * np.linalg.inv((X * w[:, None]).T @ X)
    return coef[0], coef[1], float(cov[1, 1]), float(np.sqrt(np.mean(resid**2)))


def _localization_data(distribution, m0: float, floor: float | None):
    """Folded distance, per-level log probability and weights of usable bins."""
    if isinstance(distribution, MeasurementHistogram):
        h = distribution
        floor = SAMPLED_FLOOR_COUNTS / h.n_runs if floor is None else floor
        p = h.empirical_probabilities()
        keep = (p >= floor) & (h.counts > 0)
        x = np.abs(h.bin_centers_m() - m0)[keep]
        y = np.log(p[keep] / h.bin_width)
        w = h.counts[keep].astype(float)
        signed = (h.bin_centers_m() - m0)[keep]
        return x, y, w, signed, floor
    W = np.asarray(distribution, dtype=float)
    N = len(W)
    floor = EXACT_FLOOR if floor is None else floor
    m = np.arange(N) - N // 2
    keep = W > floor
    return np.abs(m - m0)[keep], np.log(W[keep]), None, (m - m0)[keep], floor


def fit_localization_length(distribution, m0: float = 0, floor: float | None = None,
                            max_distance: float | None = None) -> FitReport:
    """Fit ``W_m ~ exp(-2|m - m0|/l)`` by least squares on ``ln W``.

    ``distribution`` is either a storage-order probability array (exact data,
    unweighted fit, floor ``1e-12``) or a :class:`MeasurementHistogram`
    (bin density ``count/(N_M*width)`` at bin centres, weighted by counts,
    bins below ``5/N_M`` dropped).  Left and right slopes are also fitted
    separately and reported in ``diagnostics``.
    """
    x, y, w, signed, floor = _localization_data(distribution, m0, floor)
    if max_distance is not None:
        sel = x <= max_distance
        x, y, signed = x[sel], y[sel], signed[sel]
        w = None if w is None else w[sel]
    if len(x) < 4 or len(np.unique(x)) < 2:
        raise InsufficientSupport(f"only {len(x)} usable points above floor {floor:g}")
    _, slope, var_slope, rms = _linear_fit(x, y, w)
    # roundoff on flat data leaves slopes of order 1e-17
    if slope >= -SLOPE_TOL:
        raise NonDecaying(f"fitted slope {slope:.4g} is not negative")
    ell = -2.0 / slope
    diagnostics = {"slope": slope, "floor": floor}
    sides = {}
    for name, sel in (("left", signed <= 0), ("right", signed >= 0)):
        if np.count_nonzero(sel) >= 3 and len(np.unique(x[sel])) >= 2:
            _, s, vs, _ = _linear_fit(x[sel], y[sel], None if w is None else w[sel])
            sides[name] = (s, math.sqrt(vs))
    if len(sides) == 2:
        (sl, el), (sr, er) = sides["left"], sides["right"]
        diagnostics.update(slope_left=sl, slope_right=sr,
                           asymmetric=bool(abs(sl - sr) > max(2 * math.hypot(el, er),
                                                              1e-9 * abs(sl + sr))))
    return FitReport("localization_length", ell, 2 * math.sqrt(var_slope) / slope**2,
                     (float(x.min()), float(x.max())), len(x), rms, diagnostics)


def participation_number(distribution) -> float:
    """``xi = 1/sum W_m**2`` in units of momentum levels.

    For a histogram the probability is spread evenly over each bin, giving
    ``xi = bin_width / sum P_b**2``.
    """
    if isinstance(distribution, MeasurementHistogram):
        p = distribution.empirical_probabilities()
        return distribution.bin_width / float(np.sum(p**2))
    W = np.asarray(distribution, dtype=float)
    return 1.0 / float(np.sum(W**2))


def inverse_participation_ratio(distribution) -> FitReport:
    """``xi`` and the length estimate ``2*xi`` (the report's value)."""
    xi = participation_number(distribution)
    err = 0.0
    if isinstance(distribution, MeasurementHistogram):
        p = distribution.empirical_probabilities()
        s2 = float(np.sum(p**2))
        var_s2 = max(0.0, 4 * (float(np.sum(p**3)) - s2**2) / distribution.n_runs)
        err = 2 * distribution.bin_width * math.sqrt(var_s2) / s2**2
        n_points = distribution.n_bins
    else:
        n_points = len(distribution)
    return FitReport("ipr_length", 2 * xi, err, (0, n_points), n_points, 0.0, {"xi": xi})


def theoretical_localization(params: MapParams) -> float:
    """``l ~ D_m ~ (pi**2/3) k**2``; the break time ``t*`` has the same estimate."""
    if abs(params.k) <= 1:
        warnings.warn(f"k={params.k:.3g}: localization estimate assumes k > 1", stacklevel=2)
    return math.pi**2 / 3 * params.k**2


def break_time_estimate(params: MapParams) -> float:
    return theoretical_localization(params)


class DiffusionTheory(NamedTuple):
    value: float
    regime: str
    random_phase: float
    cantori: float


def rpa_diffusion(K: float) -> DiffusionTheory:
    """Theory value for ``D(K)``: ``pi**2 K**2/3`` for K > 1, ``3.3 K**2.5`` below.

    Both branches are always returned; at ``K = 1`` they disagree slightly
    (3.29 vs 3.3) and the random-phase value is used.
    """
    if not K > 0:
        raise NonPositiveK(f"K must be positive, got {K}")
    rp = math.pi**2 * K**2 / 3
    ca = 3.3 * K**2.5
    if K > 1:
        return DiffusionTheory(rp, "random_phase", rp, ca)
    if K < 1:
        return DiffusionTheory(ca, "cantori", rp, ca)
    return DiffusionTheory(rp, "boundary", rp, ca)


def _series(data, variances=None):
    if variances is None:
        rows = list(data)
        if rows and isinstance(rows[0], EnsembleMoments):
            return (np.array([r.t for r in rows], float),
                    np.array([r.var_J for r in rows], float))
        arr = np.asarray(rows, float)
        return arr[:, 0], arr[:, 1]
    return np.asarray(data, float), np.asarray(variances, float)


def fit_diffusion_coefficient(data, variances: Sequence[float] | None = None, *,
                              initial_variance: float | None = None,
                              units: str = "J") -> FitReport:
    """Slope of ``var(t) - var(0)`` against ``t`` through the origin.

    Weights ``1/t**2`` (the spread of a variance estimate grows like the
    variance), which makes the estimate the mean of ``(var - var0)/t``.
    ``var0`` comes from a ``t = 0`` point when present, else
    ``initial_variance`` (default 0).  ``units`` labels the result: ``"J"``
    for ``D`` or ``"levels"`` for ``D_m``.
    """
    t, v = _series(data, variances)
    if len(t) < 3 or np.any(np.diff(t) <= 0):
        raise InsufficientData("need >= 3 strictly increasing time points")
    if t[0] == 0:
        var0 = v[0] if initial_variance is None else initial_variance
        t, v = t[1:], v[1:]
    else:
        var0 = 0.0 if initial_variance is None else initial_variance
    if len(t) < 2:
        raise InsufficientData("need at least two points with t > 0")
    rates = (v - var0) / t
    D = float(np.mean(rates))
    err = float(np.std(rates, ddof=1) / math.sqrt(len(rates)))
    resid = v - var0 - D * t
    return FitReport("diffusion_coefficient", D, err, (float(t[0]), float(t[-1])), len(t),
                     float(np.sqrt(np.mean(resid**2))), {"units": units, "initial_variance": var0})


def fit_anomalous_exponent(data, variances: Sequence[float] | None = None, *,
                           window: tuple[float, float] | None = None) -> FitReport:
    """``alpha`` from a least-squares line through ``log var`` against ``log t``."""
    t, v = _series(data, variances)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, v = t[sel], v[sel]
    if len(t) < 5:
        raise InsufficientData(f"need >= 5 points, got {len(t)}")
    if np.any(t <= 0):
        raise InsufficientData("times must be positive for a log-log fit")
    if math.log10(t.max() / t.min()) < 1.5:
        raise InsufficientData("time window must span at least 1.5 decades")
    if np.any(v <= 0):
        raise NonPositiveVariance("all variances must be positive")
    _, alpha, var_alpha, rms = _linear_fit(np.log(t), np.log(v))
    return FitReport("anomalous_exponent", float(alpha), math.sqrt(var_alpha),
                     (float(t.min()), float(t.max())), len(t), rms)


class GaussianCheck(NamedTuple):
    statistic: float
    p_value: float
    passed: bool
    variance_ratio: float
    n_samples: int


def gaussian_profile_check(samples, t: float, D: float, J0: float = 0.0,
                           level: float = 0.01) -> GaussianCheck:
    """Kolmogorov-Smirnov test of ``J`` samples against ``N(J0, D*t)``.

    ``passed`` means the Gaussian is not rejected at ``level``;
    ``variance_ratio`` is the sample variance over ``D*t``.
    """
    x = np.asarray(samples, float)
    if t < 1 or len(x) < 1000:
        raise InsufficientData("need t >= 1 and at least 1000 samples")
    if not D > 0:
        raise ValueError("D must be positive")
    sd = math.sqrt(D * t)
    res = stats.kstest(x, "norm", args=(J0, sd))
    return GaussianCheck(float(res.statistic), float(res.pvalue), bool(res.pvalue >= level),
                         float(np.var(x) / (D * t)), len(x))
