"""Joint fit of squeezed and anti-squeezed variances for efficiency and phase noise.

The model is the phase-noise-averaged OPO spectrum

    V-+ = 1 + eta_j (A+ m - A- k),  V+ = 1 + eta_j (A+ k - A- m)

with ``k = (1 + exp(-2 sigma^2)) / 2``, ``m = 1 - k``,
``A-+ = 4 F / ((1 +- F)^2 + (f/f_sqz)^2)`` and ``eta_j = eta`` or, when an
attenuation is supplied, ``eta * 10^(-alpha L_j / 10)``.  The optimizer is a
Levenberg-Marquardt iteration with Marquardt's diagonal scaling: a trial
step is accepted only if it lowers the objective, after which the damping
is divided by ten; a rejected step multiplies it by ten.

The free parameters are ``(eta, sigma^2)`` with ``sigma^2 >= 0``.  The model
depends on sigma only through ``sigma^2``, whose Jacobian column stays
finite at zero, so fits whose optimum sits on the boundary converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class FitError(RuntimeError):
    """Fit failed; carries the best iterate reached."""

    def __init__(self, message, best=None, residual_norm=None):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class VariancePoint:
    """Measured variances at one pump power and fiber length.

    ``statistical_uncertainty`` applies to both quadratures unless
    ``uncertainty_plus`` is given for V+.  Zero means "unknown" and selects
    equal weighting.
    """

    pump_power: float
    v_minus: float
    v_plus: float
    fiber_length: float = 0.0
    statistical_uncertainty: float = 0.0
    uncertainty_plus: float | None = None

    def __post_init__(self):
        if not (self.v_plus >= self.v_minus > 0):
            raise ValueError(f"need v_plus >= v_minus > 0, got ({self.v_minus}, {self.v_plus})")
        if self.pump_power < 0 or self.fiber_length < 0:
            raise ValueError("pump_power and fiber_length must be >= 0")
        if self.statistical_uncertainty < 0 or (self.uncertainty_plus or 0) < 0:
            raise ValueError("uncertainties must be >= 0")

    @property
    def sigma_minus(self) -> float:
        return self.statistical_uncertainty

    @property
    def sigma_plus(self) -> float:
        return self.statistical_uncertainty if self.uncertainty_plus is None else self.uncertainty_plus


@dataclass(frozen=True)
class FixedParameters:
    threshold_power: float = 5.12
    measurement_frequency: float = 12.2e6
    hwhm_bandwidth: float = 66e6
    attenuation_db_per_km: float | None = None


@dataclass
class FitResult:
    efficiency: float
    phase_noise_std: float
    residual_norm: float
    parameter_covariance: np.ndarray
    iterations: int = 0
    converged: bool = True
    weighting: str = "equal"
    n_points: int = 0
    history: list = field(default_factory=list)

    @property
    def standard_errors(self) -> tuple[float, float]:
        """``(se_eta, se_sigma)``.

        ``parameter_covariance`` is over ``(eta, sigma^2)``; the sigma error is
        the width of ``sqrt`` mapped over one standard error of ``sigma^2``,
        which tends to the delta-method value away from zero and stays
        finite at zero.
        """
        d = np.sqrt(np.clip(np.diag(self.parameter_covariance), 0, np.inf))
        s = self.phase_noise_std
        return float(d[0]), float(math.sqrt(s * s + d[1]) - s)

    def sigma_interval(self, k: float = 1.0) -> tuple[float, float]:
        """``sigma`` range covered by ``sigma^2 +- k`` standard errors, floored at zero."""
        u = self.phase_noise_std ** 2
        se_u = math.sqrt(max(float(self.parameter_covariance[1, 1]), 0.0))
        return math.sqrt(max(u - k * se_u, 0.0)), math.sqrt(u + k * se_u)

    def to_dict(self) -> dict:
        se = self.standard_errors
        return {"efficiency": self.efficiency, "phase_noise_std_rad": self.phase_noise_std,
                "efficiency_stderr": se[0], "phase_noise_std_stderr_rad": se[1],
                "residual_norm": self.residual_norm,
                "parameter_covariance": self.parameter_covariance.tolist(),
                "iterations": self.iterations, "converged": self.converged,
                "weighting": self.weighting, "n_points": self.n_points}


def gain_terms(pump, fixed: FixedParameters):
    """``(A-, A+)`` for each pump power."""
    fg = np.sqrt(np.asarray(pump, dtype=float) / fixed.threshold_power)
    if np.any(fg >= 1):
        raise ValueError("pump power at or above threshold")
    d = (fixed.measurement_frequency / fixed.hwhm_bandwidth) ** 2
    return 4 * fg / ((1 + fg) ** 2 + d), 4 * fg / ((1 - fg) ** 2 + d)


def _transmission(lengths, fixed: FixedParameters):
    lengths = np.asarray(lengths, dtype=float)
    if fixed.attenuation_db_per_km is None:
        return np.ones_like(lengths)
    return 10.0 ** (-fixed.attenuation_db_per_km * lengths / 10.0)


def model_variances(eta, sigma, pump, fixed: FixedParameters = FixedParameters(), lengths=None):
    """Model ``(V-, V+)`` arrays for the given pump powers."""
    a_m, a_p = gain_terms(pump, fixed)
    t = _transmission(np.zeros_like(a_m) if lengths is None else lengths, fixed)
    k = 0.5 * (1 + math.exp(-2 * sigma * sigma))
    m = 1 - k
    return 1 + eta * t * (a_p * m - a_m * k), 1 + eta * t * (a_p * k - a_m * m)


def _residuals_and_jacobian(x, a_m, a_p, t, v_m, v_p, w_m, w_p):
    eta, u = x
    e = math.exp(-2 * u)
    k = 0.5 * (1 + e)
    m = 1 - k
    r = np.concatenate([(1 + eta * t * (a_p * m - a_m * k) - v_m) * w_m,
                        (1 + eta * t * (a_p * k - a_m * m) - v_p) * w_p])
    jac = np.empty((r.shape[0], 2))
    n = a_m.shape[0]
    jac[:n, 0] = t * (a_p * m - a_m * k) * w_m
    jac[n:, 0] = t * (a_p * k - a_m * m) * w_p
    jac[:n, 1] = eta * t * e * (a_p + a_m) * w_m
    jac[n:, 1] = -eta * t * e * (a_p + a_m) * w_p
    return r, jac


def initial_guess(points, fixed: FixedParameters) -> tuple[float, float]:
    """eta from the strongest anti-squeezing point with sigma neglected; sigma = 0.05 rad."""
    best = max(points, key=lambda p: p.v_plus)
    _, a_p = gain_terms(best.pump_power, fixed)
    t = float(_transmission(best.fiber_length, fixed))
    eta = (best.v_plus - 1.0) / (float(a_p) * t) if a_p > 0 else 0.5
    return float(min(max(eta, 1e-3), 1.0)), 0.05


def levenberg_marquardt(fun, x0, max_iter: int = 200, ftol: float = 1e-14, xtol: float = 1e-12,
                        gtol: float = 1e-14, lambda0: float = 1e-3, cost_floor: float = 1e-28,
                        lower=None):
    """Minimize ``0.5 |r(x)|^2`` given ``fun(x) -> (r, J)``.

    ``lower`` optionally bounds each parameter from below (``-inf`` for
    none); a parameter held at its bound by the gradient is frozen for that
    step.  Returns ``(x, cost, J, iterations, converged, history)``;
    ``history`` lists the objective after every accepted step and is
    therefore strictly decreasing.
    """
    x = np.asarray(x0, dtype=float)
    lo = np.full(x.shape, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    x = np.maximum(x, lo)
    r, jac = fun(x)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = lambda0
    for it in range(1, max_iter + 1):
        a = jac.T @ jac
        g = jac.T @ r
        free = ~((x <= lo) & (g > 0))
        g_free = np.where(free, g, 0.0)
        if np.max(np.abs(g_free)) <= gtol or cost <= cost_floor:
            return x, cost, jac, it - 1, True, history
        diag = np.diag(a).copy()
        diag[diag <= 0] = 1e-30
        af = a[np.ix_(free, free)]
        while True:
            step = np.zeros_like(x)
            lhs = af + lam * np.diag(diag[free])
            try:
                step[free] = np.linalg.solve(lhs, -g[free])
            except np.linalg.LinAlgError:
                step[free] = -np.linalg.pinv(lhs) @ g[free]
            x_new = np.maximum(x + step, lo)
            r_new, jac_new = fun(x_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                lam = max(lam / 10.0, 1e-15)
                break
            lam *= 10.0
            if lam > 1e16:
                # no descent direction left: accept if stationary to working precision
                cosine = np.abs(g_free) / np.sqrt(diag * max(2.0 * cost, 1e-300))
                return x, cost, jac, it, bool(np.max(cosine) <= 1e-6), history
        dcost = cost - cost_new
        step = x_new - x
        x, r, jac, cost = x_new, r_new, jac_new, cost_new
        history.append(cost)
        if dcost <= ftol * max(cost, 1e-300) or np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol):
            return x, cost, jac, it, True, history
    return x, cost, jac, max_iter, False, history


def _covariance(jac, scale):
    a = jac.T @ jac
    try:
        cov = np.linalg.inv(a)
        if not np.all(np.isfinite(cov)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(a)
    return cov * scale


def fit_squeezing_model(points, fixed: FixedParameters | None = None,
                        initial: tuple[float, float] | None = None,
                        max_iter: int = 200) -> FitResult:
    """Weighted least squares for ``(eta, sigma)`` over V- and V+ jointly.

    Weights are 1/uncertainty when every point carries a positive
    uncertainty (covariance then in absolute units); otherwise all residuals
    weigh equally and the covariance is scaled by the residual variance.
    """
    fixed = FixedParameters() if fixed is None else fixed
    points = list(points)
    pumps = {p.pump_power for p in points}
    if len(pumps) < 3:
        raise ValueError("need at least three distinct pump powers")
    pump = np.array([p.pump_power for p in points])
    a_m, a_p = gain_terms(pump, fixed)
    t = _transmission([p.fiber_length for p in points], fixed)
    v_m = np.array([p.v_minus for p in points])
    v_p = np.array([p.v_plus for p in points])
    s_m = np.array([p.sigma_minus for p in points])
    s_p = np.array([p.sigma_plus for p in points])
    weighted = bool(np.all(s_m > 0) and np.all(s_p > 0))
    w_m = 1.0 / s_m if weighted else np.ones_like(v_m)
    w_p = 1.0 / s_p if weighted else np.ones_like(v_p)

    def fun(x):
        return _residuals_and_jacobian(x, a_m, a_p, t, v_m, v_p, w_m, w_p)

    eta0, sigma0 = initial_guess(points, fixed) if initial is None else initial
    x, cost, jac, iters, ok, history = levenberg_marquardt(
        fun, [eta0, sigma0 * sigma0], max_iter=max_iter, lower=[-np.inf, 0.0])
    norm = math.sqrt(2 * cost)
    eta, sigma = float(x[0]), math.sqrt(float(x[1]))
    if not ok:
        raise FitError(f"no convergence after {iters} iterations", best=(eta, sigma),
                       residual_norm=norm)
    if not 0 < eta <= 1:
        raise FitError(f"fitted efficiency {eta:.4f} outside (0, 1]", best=(eta, sigma),
                       residual_norm=norm)
    dof = 2 * len(points) - 2
    scale = 1.0 if weighted else (2 * cost / dof if dof > 0 else 1.0)
    result = FitResult(efficiency=eta, phase_noise_std=sigma, residual_norm=norm,
                       parameter_covariance=_covariance(jac, scale), iterations=iters,
                       converged=True, weighting="uncertainty" if weighted else "equal",
                       n_points=len(points), history=history)
    return result


def efficiency_from_sum_rule(point: VariancePoint, fixed: FixedParameters | None = None) -> float:
    """Efficiency from ``V- + V+``, which phase noise leaves unchanged."""
    fixed = FixedParameters() if fixed is None else fixed
    a_m, a_p = gain_terms(point.pump_power, fixed)
    t = float(_transmission(point.fiber_length, fixed))
    return float((point.v_minus + point.v_plus - 2.0) / (t * (a_p - a_m)))


def invert_single_point(point: VariancePoint, fixed: FixedParameters | None = None) -> tuple[float, float]:
    """Exact ``(eta, sigma)`` from one point: two equations, two unknowns.

    ``sigma`` is 0 when the measured variances lie beyond the phase-noise-free
    curve (statistical scatter) and nan when the point carries no squeezing.
    """
    fixed = FixedParameters() if fixed is None else fixed
    a_m, a_p = (float(v) for v in gain_terms(point.pump_power, fixed))
    if a_p - a_m <= 0:
        return math.nan, math.nan
    eta = efficiency_from_sum_rule(point, fixed)
    t = float(_transmission(point.fiber_length, fixed))
    if eta <= 0:
        return eta, math.nan
    k = (a_p - (point.v_minus - 1.0) / (eta * t)) / (a_p + a_m)
    c = 2 * k - 1
    if c >= 1:
        return eta, 0.0
    if c <= 0:
        return eta, math.nan
    return eta, math.sqrt(-0.5 * math.log(c))


def synthetic_points(eta, sigma, pumps, relative_noise: float = 0.0, rng=None,
                     fixed: FixedParameters | None = None, fiber_length: float = 0.0):
    """Model points with optional multiplicative Gaussian noise."""
    fixed = FixedParameters() if fixed is None else fixed
    v_m, v_p = model_variances(eta, sigma, pumps, fixed,
                               lengths=np.full(len(pumps), fiber_length))
    if relative_noise > 0:
        rng = np.random.default_rng() if rng is None else rng
        v_m = v_m * (1 + relative_noise * rng.standard_normal(len(pumps)))
        v_p = v_p * (1 + relative_noise * rng.standard_normal(len(pumps)))
    return [VariancePoint(float(p), float(a), float(b), fiber_length,
                          float(relative_noise * a), float(relative_noise * b))
            for p, a, b in zip(pumps, v_m, v_p)]
