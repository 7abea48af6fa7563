"""Shearing diagnostics.

A short segment in the shear-partner direction W, carried by the perturbed
flow for a long time t, drifts along the central direction at a rate given
by the backward orbit average ell_t of lambda*(c + W beta).  This module
samples those carried curves, checks the predicted tangent vector
(1/t) W + (ell_t/lambda) Z at s = 0, bounds the derivatives of ell_t along
Z and W, measures how the carried time-changed central field relaxes, and
compares the curves against the candidate limiting central flow.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .fields import PerturbationData
from .flow_engine import (
    DEFAULT_CONFIG,
    FlowSpec,
    IntegratorConfig,
    flow_perturbed,
    flow_timechange,
    orbit_average,
)
from .lie_core import GroupElement, exp_map, matrix_to_coords
from .pushforward import growth_exponent


def perturbed_spec(P: PerturbationData, config: IntegratorConfig = DEFAULT_CONFIG,
                   samples=None) -> FlowSpec:
    return FlowSpec.perturbed(P, config, samples=samples)


def ell_value(P: PerturbationData, t: float, p: GroupElement,
              config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """Backward orbit average of lambda*(c + W beta) over [-t, 0]."""
    spec = FlowSpec(kind="perturbed", integrator=config, perturbation=P)
    return orbit_average(P.shear_integrand, spec, t, p, direction="backward")


def forward_ell_value(P: PerturbationData, t: float, p: GroupElement,
                      config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """Forward counterpart of :func:`ell_value` (average over [0, t])."""
    spec = FlowSpec(kind="perturbed", integrator=config, perturbation=P)
    return orbit_average(P.shear_integrand, spec, t, p, direction="forward")


@dataclasses.dataclass
class ShearCurve:
    t: float
    sigma: float
    base_point: GroupElement
    s_values: np.ndarray
    points: list


def shear_curve(P: PerturbationData, t: float, sigma: float, p: GroupElement,
                n_samples: int = 64,
                config: IntegratorConfig = DEFAULT_CONFIG) -> ShearCurve:
    """Sample s -> flow_t( flow_{-t}(p) exp((s/t) W) ) on [0, sigma].

    The s = 0 sample is the base point itself (the composition is the
    identity there).
    """
    if t < 1.0:
        raise ValueError("shear curves are defined for t >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    spec = FlowSpec(kind="perturbed", integrator=config, perturbation=P)
    q0 = flow_perturbed(spec, -t, p)
    s_values = np.linspace(0.0, sigma, n_samples)
    points = []
    for s in s_values:
        if s == 0.0:
            points.append(p)
            continue
        start = GroupElement(q0.matrix @ exp_map(P.W, s / t).matrix)
        points.append(flow_perturbed(spec, t, start))
    return ShearCurve(t, sigma, p, s_values, points)


def _curve_point(P: PerturbationData, spec: FlowSpec, q0: GroupElement, t: float,
                 s: float) -> GroupElement:
    start = GroupElement(q0.matrix @ exp_map(P.W, s / t).matrix)
    return flow_perturbed(spec, t, start)


def tangent_residual(P: PerturbationData, t: float, p: GroupElement,
                     config: IntegratorConfig = DEFAULT_CONFIG,
                     fd_step: float = 0.05) -> float:
    """Compare the s = 0 tangent of the carried curve with its prediction.

    The tangent is measured by a fourth-order central difference in s and
    left-trivialized at p; the prediction is (1/t) W + (ell_t(p)/lambda(p)) Z.
    Returns the Euclidean norm of the frame-coordinate difference.
    """
    if t < 1.0:
        raise ValueError("the shear regime needs t >= 1")
    spec = FlowSpec(kind="perturbed", integrator=config, perturbation=P)
    q0 = flow_perturbed(spec, -t, p)
    h = fd_step
    pts = {s: _curve_point(P, spec, q0, t, s) for s in (-2 * h, -h, h, 2 * h)}
    deriv = (
        pts[-2 * h].matrix - 8.0 * pts[-h].matrix + 8.0 * pts[h].matrix - pts[2 * h].matrix
    ) / (12.0 * h)
    tangent = matrix_to_coords(np.linalg.solve(p.matrix, deriv))
    ell = ell_value(P, t, p, config)
    predicted = (1.0 / t) * P.W.coords + (ell / P.lam(p)) * P.Z.coords
    return float(np.linalg.norm(tangent - predicted))


class ShearBoundError(RuntimeError):
    """A measured derivative of ell_t exceeded its sampled bound."""


@dataclasses.dataclass
class EllBounds:
    """Measured derivatives of ell_t with their sampled reference constants."""

    t: float
    z_ell: float
    w_ell: float
    c1: float  # sup |lambda (c + W beta)|
    c2: float  # sup |Z(lambda (c + W beta))|
    cw: float  # sup |W(...)| + c1*c2 / (2 min lambda)
    lam_min: float
    lam_max: float

    @property
    def z_bound(self) -> float:
        return (self.lam_max / self.lam_min) * self.c2

    @property
    def w_bound(self) -> float:
        return self.cw * self.t

    def within(self, slack: float = 0.05) -> bool:
        return (abs(self.z_ell) <= (1.0 + slack) * self.z_bound + 1e-12
                and abs(self.w_ell) <= (1.0 + slack) * self.w_bound + 1e-12)


def ell_bounds(P: PerturbationData, t: float, p: GroupElement, samples,
               config: IntegratorConfig = DEFAULT_CONFIG, fd_step: float = 1e-3,
               slack: float = 0.05, check: bool = True) -> EllBounds:
    """Differentiate ell_t along Z and W by central differences of displaced
    base points, and compare with the sampled sup-norm constants."""
    def ell(q):
        return ell_value(P, t, q, config)

    def displaced(direction, s):
        return GroupElement(p.matrix @ exp_map(direction, s).matrix)

    h = fd_step
    z_ell = (ell(displaced(P.Z, h)) - ell(displaced(P.Z, -h))) / (2 * h)
    w_ell = (ell(displaced(P.W, h)) - ell(displaced(P.W, -h))) / (2 * h)

    integrand = P.shear_integrand
    z_int = integrand.derivative(P.Z)
    w_int = integrand.derivative(P.W)
    samples = list(samples)
    c1 = max(abs(integrand(q)) for q in samples)
    c2 = max(abs(z_int(q)) for q in samples)
    wsup = max(abs(w_int(q)) for q in samples)
    lam_vals = [P.lam(q) for q in samples]
    lam_min, lam_max = min(lam_vals), max(lam_vals)
    cw = wsup + c1 * c2 / (2.0 * lam_min)
    result = EllBounds(t, z_ell, w_ell, c1, c2, cw, lam_min, lam_max)
    if check and not result.within(slack):
        raise ShearBoundError(
            f"|Z ell|={abs(z_ell):.4g} vs bound {result.z_bound:.4g}, "
            f"|W ell|={abs(w_ell):.4g} vs bound {result.w_bound:.4g} at t={t}"
        )
    return result


@dataclasses.dataclass
class ZtildeFactor:
    """Scalar factor acquired by the time-changed central field under the
    short W-flow, by quadrature and by the coefficient ODE."""

    factor: float
    ode_factor: float

    @property
    def residual(self) -> float:
        return abs(self.factor - self.ode_factor)


def w_pushforward_of_ztilde(P: PerturbationData, t: float, s: float, g: GroupElement,
                            n: int = 256) -> ZtildeFactor:
    """exp of (1/t) * integral over [0, s] of (W lambda / lambda) along the
    exact W-flow from g, cross-checked by integrating the single coefficient
    equation with RK4 on the same grid."""
    if t < 1.0:
        raise ValueError("the shear regime needs t >= 1")
    wl = P.lam.derivative(P.W) / P.lam

    def point(tau):
        return g.matrix @ exp_map(P.W, tau / t).matrix

    if s == 0.0:
        return ZtildeFactor(1.0, 1.0)
    # Simpson quadrature for the exponent
    m = n if n % 2 == 0 else n + 1
    taus = np.linspace(0.0, s, m + 1)
    vals = np.array([wl.eval_matrix(point(tau)) for tau in taus])
    weights = np.ones(m + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    integral = (s / m) / 3.0 * float(weights @ vals)
    factor = float(np.exp(integral / t))
    # independent route: y' = y * (W lambda / lambda)(gamma(s)) / t
    h = s / m
    y = 1.0
    for i in range(m):
        tau = i * h

        def rate(offset, yy):
            return yy * wl.eval_matrix(point(tau + offset)) / t

        k1 = rate(0.0, y)
        k2 = rate(0.5 * h, y + 0.5 * h * k1)
        k3 = rate(0.5 * h, y + 0.5 * h * k2)
        k4 = rate(h, y + h * k3)
        y += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return ZtildeFactor(factor, float(y))


def ztilde_relaxation_rate(P: PerturbationData, t_values, sigma: float,
                           g: GroupElement, n: int = 128) -> float:
    """Fitted log-log slope of |factor - 1| against t (expected near -1)."""
    devs = []
    ts = []
    for t in t_values:
        f = w_pushforward_of_ztilde(P, t, sigma, g, n).factor
        if abs(f - 1.0) > 0:
            ts.append(t)
            devs.append(abs(f - 1.0))
    return growth_exponent(np.array(ts), np.array(devs))


@dataclasses.dataclass
class LimitDistance:
    t: float
    ell_estimate: float
    s_values: np.ndarray
    distances: np.ndarray

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distances))


def limit_comparison(P: PerturbationData, t_list, sigma: float, p: GroupElement,
                     n_samples: int = 17,
                     config: IntegratorConfig = DEFAULT_CONFIG) -> list[LimitDistance]:
    """Distance between the carried curves and the central candidate limit.

    For each t the carried curve is compared pointwise with the time-changed
    central flow run at the current rate estimate ell_t(p).  Purely
    diagnostic: the estimate is per base point.
    """
    out = []
    for t in t_list:
        curve = shear_curve(P, t, sigma, p, n_samples, config)
        ell = ell_value(P, t, p, config)
        rate_field = ell * P.ztilde
        dists = []
        for s, pt in zip(curve.s_values, curve.points):
            if s == 0.0:
                dists.append(0.0)
                continue
            target = flow_timechange(rate_field, P.Z, s, p, config)
            dists.append(pt.distance(target))
        out.append(LimitDistance(t, ell, curve.s_values, np.array(dists)))
    return out


def curve_speeds(curve: ShearCurve) -> np.ndarray:
    """Frame-coordinate norms of centered-difference tangents along the curve."""
    pts = curve.points
    s = curve.s_values
    speeds = []
    for i in range(1, len(pts) - 1):
        deriv = (pts[i + 1].matrix - pts[i - 1].matrix) / (s[i + 1] - s[i - 1])
        v = matrix_to_coords(np.linalg.solve(pts[i].matrix, deriv))
        speeds.append(np.linalg.norm(v))
    return np.array(speeds)


@dataclasses.dataclass
class ShearDiagnostics:
    """Aggregated per-experiment shearing diagnostics."""

    t_values: tuple
    ell_values: tuple
    tangent_residuals: tuple
    z_ell_values: tuple
    w_ell_values: tuple
    z_bound: float
    w_bound_rate: float
    limit_distances: tuple
    ell_lower_bound: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def shear_diagnostics(P: PerturbationData, t_values, sigma: float, p: GroupElement,
                      samples, config: IntegratorConfig = DEFAULT_CONFIG,
                      n_samples: int = 17) -> ShearDiagnostics:
    ells, tangents, zells, wells, limits = [], [], [], [], []
    bounds = None
    for t in t_values:
        ells.append(ell_value(P, t, p, config))
        tangents.append(tangent_residual(P, t, p, config))
        bounds = ell_bounds(P, t, p, samples, config, check=False)
        zells.append(bounds.z_ell)
        wells.append(bounds.w_ell)
    for item in limit_comparison(P, t_values, sigma, p, n_samples, config):
        limits.append(item.max_distance)
    report = condition_lower_bound(P, samples)
    return ShearDiagnostics(
        t_values=tuple(float(t) for t in t_values),
        ell_values=tuple(ells),
        tangent_residuals=tuple(tangents),
        z_ell_values=tuple(zells),
        w_ell_values=tuple(wells),
        z_bound=bounds.z_bound if bounds else 0.0,
        w_bound_rate=bounds.cw if bounds else 0.0,
        limit_distances=tuple(limits),
        ell_lower_bound=report,
    )


def condition_lower_bound(P: PerturbationData, samples) -> float:
    """min(lambda) * (|c| - sup|W beta|): the guaranteed size of ell_t."""
    samples = list(samples)
    lam_min = min(P.lam(q) for q in samples)
    wb = max(abs(P.w_beta(q)) for q in samples)
    return lam_min * (abs(P.c) - wb)
