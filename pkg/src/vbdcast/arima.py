"""ARIMA(p, d, q) baseline fitted by conditional sum of squares.

The series is differenced ``d`` times and an ARMA(p, q) with intercept is
fitted to the result by minimizing the conditional sum of squared
innovations::

    e_t = z_t - c - sum_i phi_i z_{t-i} - sum_j theta_j e_{t-j},   t >= p

with innovations before ``p`` set to zero. Nelder-Mead starts from a
Hannan-Rissanen estimate; candidates outside the stationary / invertible
region are penalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .rng import make_rng, normal

UNIT_MARGIN = 1e-4
PENALTY = 1e6


class ArimaError(ValueError):
    pass


@dataclass(frozen=True)
class ArimaOrder:
    p: int = 2
    d: int = 1
    q: int = 1

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0 or self.p + self.q < 1:
            raise ArimaError(f"invalid ARIMA order {tuple(self)}: need p, d, q >= 0 and p + q >= 1")

    def __iter__(self):
        return iter((self.p, self.d, self.q))


@dataclass(frozen=True)
class ArimaModel:
    order: ArimaOrder
    c: float
    phi: np.ndarray
    theta: np.ndarray
    sigma2: float
    css: float
    start_css: float
    last_obs: np.ndarray  # trailing raw observations of the fitting series
    last_resid: np.ndarray  # trailing innovations of the fitting series

    def to_text(self) -> str:
        p, d, q = self.order
        lines = [
            f"order {p} {d} {q}",
            f"intercept {self.c!r}",
            "phi " + " ".join(repr(float(x)) for x in self.phi),
            "theta " + " ".join(repr(float(x)) for x in self.theta),
            f"sigma2 {self.sigma2!r}",
            f"css {self.css!r}",
        ]
        return "\n".join(line.rstrip() for line in lines) + "\n"


def max_inverse_root(coefs, sign: float) -> float:
    """Largest modulus among the inverse roots of ``1 + sign * sum_k coefs[k] z^(k+1)``.

    ``sign = -1`` for an AR polynomial, ``+1`` for an MA polynomial; the
    polynomial's roots lie outside the unit circle iff the result is < 1.
    """
    coefs = np.asarray(coefs, dtype=np.float64)
    if coefs.size == 0 or not np.any(coefs):
        return 0.0
    return float(np.max(np.abs(np.roots(np.concatenate([[1.0], sign * coefs])))))


def is_stationary(phi) -> bool:
    return max_inverse_root(phi, -1.0) < 1.0


def is_invertible(theta) -> bool:
    return max_inverse_root(theta, 1.0) < 1.0


def difference_n(y, d: int) -> np.ndarray:
    z = np.asarray(y, dtype=np.float64)
    for _ in range(d):
        z = np.diff(z)
    return z


def innovations(z, c: float, phi, theta) -> np.ndarray:
    """Conditional innovations of ``z`` (zeros before index p)."""
    z = np.asarray(z, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    p = phi.size
    n = z.size
    e = np.zeros(n)
    if n <= p:
        return e
    u = z[p:] - c
    for i in range(p):
        u = u - phi[i] * z[p - 1 - i:n - 1 - i]
    e[p:] = lfilter([1.0], np.concatenate([[1.0], theta]), u) if theta.size else u
    return e


def css(z, c: float, phi, theta) -> float:
    e = innovations(z, c, phi, theta)[len(phi):]
    return float(e @ e)


def _lagmat(x: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Columns x_{t-1}, ..., x_{t-lags} for t = start .. len(x) - 1."""
    n = x.size
    return np.column_stack([x[start - k:n - k] for k in range(1, lags + 1)]) if lags else np.empty((n - start, 0))


def hannan_rissanen(z, p: int, q: int) -> np.ndarray:
    """Two-stage start ``[c, phi..., theta...]``: long AR residuals, then OLS on lags and lagged residuals."""
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    if q == 0:
        X = np.column_stack([np.ones(n - p), _lagmat(z, p, p)])
        return np.linalg.lstsq(X, z[p:], rcond=None)[0]
    m = max(p + q, min(int(np.floor(np.log(n) ** 2)), n // 3))
    X = np.column_stack([np.ones(n - m), _lagmat(z, m, m)])
    coef = np.linalg.lstsq(X, z[m:], rcond=None)[0]
    resid = np.zeros(n)
    resid[m:] = z[m:] - X @ coef
    start = m + q
    X2 = np.column_stack([np.ones(n - start), _lagmat(z, p, start), _lagmat(resid, q, start)])
    return np.linalg.lstsq(X2, z[start:], rcond=None)[0]


def _violation(phi, theta) -> float:
    v = 0.0
    for r in (max_inverse_root(phi, -1.0), max_inverse_root(theta, 1.0)):
        v += max(0.0, r - (1.0 - UNIT_MARGIN))
    return v


def _project(x: np.ndarray, p: int) -> np.ndarray:
    """Shrink AR/MA coefficients toward zero until strictly admissible."""
    x = x.copy()
    while _violation(x[1:1 + p], x[1 + p:]) > 0:
        x[1:] *= 0.9
    return x


def fit(series, order: ArimaOrder = ArimaOrder(), seed: int = 0, restarts: int = 5) -> ArimaModel:
    """Fit by conditional sum of squares; deterministic given ``seed``."""
    y = np.asarray(series, dtype=np.float64)
    p, d, q = order
    z = difference_n(y, d) if y.size > d else np.empty(0)
    if z.size < 10 * (p + q) or z.size <= p + q + 1:
        raise ArimaError(
            f"series too short for ARIMA{tuple(order)}: {z.size} values after differencing, need >= {max(10 * (p + q), p + q + 2)}"
        )

    x0 = _project(hannan_rissanen(z, p, q), p)
    start_css = css(z, x0[0], x0[1:1 + p], x0[1 + p:])
    scale = max(start_css, 1.0)

    def objective(x):
        phi, theta = x[1:1 + p], x[1 + p:]
        v = _violation(phi, theta)
        if v > 0:
            return PENALTY * scale * (1.0 + v)
        return css(z, x[0], phi, theta)

    rng = make_rng(seed)
    opts = {"xatol": 1e-8, "fatol": 1e-10 * scale, "maxiter": 4000 * x0.size, "maxfev": 4000 * x0.size}
    best = minimize(objective, x0, method="Nelder-Mead", options=opts)
    for _ in range(restarts):
        jitter = 0.05 * normal(rng, x0.size) * np.maximum(np.abs(best.x), 0.1)
        trial = minimize(objective, _project(best.x + jitter, p), method="Nelder-Mead", options=opts)
        if trial.fun < best.fun - 1e-12 * scale:
            best = trial
        elif best.success:
            break

    x = best.x
    phi, theta = x[1:1 + p], x[1 + p:]
    if _violation(phi, theta) > 0 or not np.isfinite(best.fun):
        raise ArimaError(f"optimizer failed to find an admissible ARIMA{tuple(order)} fit after {restarts} restarts")
    fit_css = css(z, x[0], phi, theta)
    if fit_css > start_css:  # cannot happen with Nelder-Mead keeping its best vertex; guard anyway
        x, fit_css = x0, start_css
        phi, theta = x[1:1 + p], x[1 + p:]
    e = innovations(z, x[0], phi, theta)
    k = max(p + d, 1)
    return ArimaModel(
        order=order,
        c=float(x[0]),
        phi=np.array(phi, dtype=np.float64),
        theta=np.array(theta, dtype=np.float64),
        sigma2=fit_css / (z.size - p),
        css=fit_css,
        start_css=start_css,
        last_obs=y[-k:].copy(),
        last_resid=e[-q:].copy() if q else np.empty(0),
    )


def forecast_one(m: ArimaModel, history) -> float:
    """One-step-ahead mean forecast of the next raw value given the full observed history.

    Innovations are recomputed from ``history`` so they always reflect the
    observed values up to the forecast origin.
    """
    y = np.asarray(history, dtype=np.float64)
    p, d, q = m.order
    if y.size < p + d or y.size < d + 1:
        raise ArimaError(f"need at least {max(p + d, d + 1)} observations of history, got {y.size}")
    z = difference_n(y, d)
    e = innovations(z, m.c, m.phi, m.theta)
    n = z.size
    z_next = m.c
    for i in range(p):
        z_next += m.phi[i] * z[n - 1 - i]
    for j in range(q):
        if n - 1 - j >= 0:
            z_next += m.theta[j] * e[n - 1 - j]
    # invert Delta^d: y_t = z_t - sum_{k=1}^{d} C(d, k) (-1)^k y_{t-k}
    y_next = z_next
    for k in range(1, d + 1):
        y_next -= comb(d, k) * (-1) ** k * y[-k]
    return float(y_next)


def rolling_forecast(m: ArimaModel, series, start: int) -> np.ndarray:
    """Forecasts of ``series[start:]``, each from the observations before it."""
    y = np.asarray(series, dtype=np.float64)
    return np.array([forecast_one(m, y[:t]) for t in range(start, y.size)])
