"""Angle geometry and von Mises distribution mathematics.

All angles are radians. Data angles live in the half-open interval
(-pi, pi]; the mean link maps onto the open interval (-pi, pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateStepError, InsufficientPathError, InvalidArgumentError

TWO_PI = 2.0 * math.pi
LOG_TWO_PI = math.log(TWO_PI)

#: Displacements shorter than this (yards) have no usable bearing.
MIN_STEP = 1e-6

#: Power series below this concentration, asymptotic expansion above.
BESSEL_SWITCH = 20.0
_N_SERIES = 46
_N_ASYMPTOTIC = 20


def _series_coefficients():
    # I0(k) = sum t^m / (m!)^2,  I1(k) = (k/2) sum t^m / (m! (m+1)!),  t = (k/2)^2
    c0 = np.empty(_N_SERIES)
    c1 = np.empty(_N_SERIES)
    for m in range(_N_SERIES):
        fm = math.factorial(m)
        c0[m] = 1.0 / (fm * fm)
        c1[m] = 1.0 / (fm * fm * (m + 1))
    return c0, c1


def _asymptotic_coefficients():
    # I_nu(k) ~ e^k / sqrt(2 pi k) * sum_k a_k(nu) k^-n
    a0 = np.empty(_N_ASYMPTOTIC + 1)
    a1 = np.empty(_N_ASYMPTOTIC + 1)
    a0[0] = a1[0] = 1.0
    for n in range(1, _N_ASYMPTOTIC + 1):
        odd = (2 * n - 1) ** 2
        a0[n] = a0[n - 1] * odd / (8.0 * n)
        a1[n] = -a1[n - 1] * (4.0 - odd) / (8.0 * n)
    return a0, a1


_SERIES_I0, _SERIES_I1 = _series_coefficients()
_ASYM_I0, _ASYM_I1 = _asymptotic_coefficients()


# Concentration bands: (upper bound, uses series?, number of terms). Term counts
# give ~1e-17 relative truncation error at each band's worst point.
_BANDS = np.array([
    (2.0, 1.0, 13),
    (5.0, 1.0, 19),
    (10.0, 1.0, 26),
    (BESSEL_SWITCH, 1.0, 38),
    (30.0, 0.0, _N_ASYMPTOTIC + 1),
    (60.0, 0.0, 16),
    (200.0, 0.0, 12),
    (np.inf, 0.0, 9),
])


_BAND_EDGES = np.ascontiguousarray(_BANDS[:-1, 0])


@njit(cache=True)
def _bessel_parts(kappa):
    """Polynomial part of the Bessel evaluation.

    Returns ``(offset, y, ratio)`` with ``log I0 = offset + log1p(y)``:
    ``y`` is the series tail ``I0 - 1`` below the switch point and
    ``sqrt(2 pi k) e^-k I0 - 1`` above it, where ``offset`` is ``k``.
    Elements are bucketed by band so each Horner pass runs over a contiguous
    buffer; a per-element dependency chain would be latency-bound.
    """
    n = kappa.shape[0]
    nb = _BANDS.shape[0]
    edges = _BAND_EDGES
    band = np.zeros(n, dtype=np.int64)
    for i in range(n):
        kk = kappa[i]
        b = 0
        for e in range(edges.shape[0]):
            b += kk > edges[e]
        band[i] = b
    counts = np.zeros(nb + 1, dtype=np.int64)
    for i in range(n):
        counts[band[i] + 1] += 1
    for b in range(nb):
        counts[b + 1] += counts[b]
    order = np.empty(n, dtype=np.int64)
    fill = counts[:nb].copy()
    for i in range(n):
        order[fill[band[i]]] = i
        fill[band[i]] += 1

    offset = np.empty(n)
    y = np.empty(n)
    ratio = np.empty(n)
    k = np.empty(n)
    x = np.empty(n)
    p0 = np.empty(n)
    p1 = np.empty(n)
    for b in range(nb):
        lo, hi = counts[b], counts[b + 1]
        m = hi - lo
        if m == 0:
            continue
        terms = int(_BANDS[b, 2])
        is_series = _BANDS[b, 1] > 0
        for i in range(m):
            kk = kappa[order[lo + i]]
            k[i] = kk
            x[i] = 0.25 * kk * kk if is_series else 1.0 / kk
        if is_series:
            # p0 sums coefficients 1.. so that the tail keeps full relative precision
            c0, c1, n0 = _SERIES_I0[1:], _SERIES_I1, terms - 1
        else:
            c0, c1, n0 = _ASYM_I0, _ASYM_I1, terms
        a0 = c0[n0 - 1]
        a1 = c1[terms - 1]
        for i in range(m):
            p0[i] = a0
            p1[i] = a1
        for c in range(terms - 2, -1, -1):
            a1 = c1[c]
            for i in range(m):
                p1[i] = p1[i] * x[i] + a1
        for c in range(n0 - 2, -1, -1):
            a0 = c0[c]
            for i in range(m):
                p0[i] = p0[i] * x[i] + a0
        if is_series:
            for i in range(m):
                j = order[lo + i]
                tail = x[i] * p0[i]
                offset[j] = 0.0
                y[j] = tail
                ratio[j] = 0.5 * k[i] * p1[i] / (1.0 + tail)
        else:
            for i in range(m):
                j = order[lo + i]
                offset[j] = k[i]
                y[j] = p0[i] / math.sqrt(TWO_PI * k[i]) - 1.0
                ratio[j] = p1[i] / p0[i]
    return offset, y, ratio


def _log_i0_and_ratio(kappa):
    """Unchecked vectorized kernel: (log I0, I1/I0) for a 1-d array of kappa >= 0."""
    offset, y, ratio = _bessel_parts(kappa)
    return offset + np.log1p(y), ratio


def _checked_kappa(kappa):
    arr = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidArgumentError(f"concentration must be finite and >= 0, got {kappa!r}")
    return arr


def log_bessel_i0(kappa):
    """Natural log of the modified Bessel function I0, evaluated in log space.

    Accepts a scalar or an array; scalars come back as ``float``.
    """
    arr = _checked_kappa(kappa)
    out, _ = _log_i0_and_ratio(np.ravel(arr).astype(float))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def bessel_ratio(kappa):
    """I1(kappa) / I0(kappa), the mean resultant length of a von Mises law."""
    arr = _checked_kappa(kappa)
    _, out = _log_i0_and_ratio(np.ravel(arr).astype(float))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def wrap_angle(a):
    """Map any real angle onto its representative in (-pi, pi]."""
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("angle must be finite")
    out = math.pi - np.mod(math.pi - arr, TWO_PI)
    # np.mod may round up to exactly 2*pi for tiny negative arguments
    out = np.where(out <= -math.pi, math.pi, out)
    return float(out) if arr.ndim == 0 else out


def bearing(p0, p1):
    """Direction of the displacement p0 -> p1, in (-pi, pi]."""
    dx = float(p1[0]) - float(p0[0])
    dy = float(p1[1]) - float(p0[1])
    if not (math.isfinite(dx) and math.isfinite(dy)):
        raise InvalidArgumentError("coordinates must be finite")
    if math.hypot(dx, dy) < MIN_STEP:
        raise DegenerateStepError(f"zero-length step from {tuple(p0)} to {tuple(p1)}")
    return wrap_angle(math.atan2(dy, dx))


def bearings(path, degenerate="raise"):
    """Bearings of every consecutive step of ``path`` (an (n, 2) array-like).

    ``degenerate`` controls zero-length steps: ``"raise"`` raises
    :class:`DegenerateStepError`, ``"drop"`` removes the repeated point.
    """
    pts = np.asarray(path, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidArgumentError("path must be a sequence of (x, y) points")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("coordinates must be finite")
    if degenerate not in ("raise", "drop"):
        raise InvalidArgumentError(f"unknown degenerate-step policy {degenerate!r}")
    if degenerate == "drop" and len(pts) > 1:
        pts = pts[_keep_moving(pts)]
    d = np.diff(pts, axis=0)
    step = np.hypot(d[:, 0], d[:, 1])
    if np.any(step < MIN_STEP):
        i = int(np.argmax(step < MIN_STEP))
        raise DegenerateStepError(f"zero-length step between points {i} and {i + 1}")
    return wrap_angle(np.arctan2(d[:, 1], d[:, 0]))


def _keep_moving(pts):
    """Mask keeping each point that moved at least MIN_STEP from the last kept one."""
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = True
    last = pts[0]
    for i in range(1, len(pts)):
        if math.hypot(pts[i, 0] - last[0], pts[i, 1] - last[1]) >= MIN_STEP:
            keep[i] = True
            last = pts[i]
    return keep


def turn_angle_series(path, degenerate="raise"):
    """Turn angles between successive displacement vectors.

    Element ``t-1`` is ``wrap_angle(b_t - b_{t-1})`` where ``b_t`` is the
    bearing of step ``t``. A path of ``T + 1`` points yields ``T - 1`` angles.
    """
    pts = np.asarray(path, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise InsufficientPathError("a turn angle needs at least 3 points")
    b = bearings(pts, degenerate=degenerate)
    if len(b) < 2:
        raise InsufficientPathError("fewer than 2 usable steps after dropping degenerate ones")
    return wrap_angle(np.diff(b))


def vm_log_density(x, mu, kappa):
    """Log density of the von Mises distribution on the circle."""
    k = _checked_kappa(kappa)
    lk = log_bessel_i0(k)
    out = k * np.cos(np.asarray(x, dtype=float) - mu) - LOG_TWO_PI - lk
    return float(out) if np.ndim(out) == 0 else out


def mean_link_inverse(eta):
    """Inverse tan-half link: mu = 2 * atan(eta), always inside (-pi, pi)."""
    arr = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("linear predictor must be finite")
    out = 2.0 * np.arctan(arr)
    return float(out) if arr.ndim == 0 else out


@dataclass(frozen=True)
class VonMisesParams:
    mu: float
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise InvalidArgumentError(f"kappa must be finite and >= 0, got {self.kappa}")
        if not math.isfinite(self.mu):
            raise InvalidArgumentError("mu must be finite")
        object.__setattr__(self, "mu", wrap_angle(self.mu))

    def logpdf(self, x):
        return vm_log_density(x, self.mu, self.kappa)

    @property
    def mean_resultant_length(self):
        return bessel_ratio(self.kappa)
