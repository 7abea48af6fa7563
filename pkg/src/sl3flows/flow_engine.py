"""Trajectory integration on SL(3,R).

Three flow kinds are supported: constant fields (exact exponentials),
perturbed fields U + beta(g) Z (fixed-step Lie-group RK4: the increment is
assembled in the algebra and mapped through the exact nilpotent
exponential each step, so det = 1 is preserved structurally), and
time-changed central flows f(g) Z (reduced to a scalar problem along the
Z-subgroup, which removes drift entirely).

Orbit averages and the variational systems in the downstream modules ride
on the same integration stages, so quadrature grids are always aligned
with the flow grid.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import sampling
from .fields import PerturbationData, ScalarField, condition_check
from .lie_core import AlgebraElement, GroupElement, exp_map


class DeterminantDriftError(RuntimeError):
    """Integration aborted: the determinant left its tolerance band."""

    def __init__(self, t: float, drift: float, tolerance: float):
        super().__init__(
            f"determinant drift {drift:.3e} at t = {t:.6g} exceeds tolerance {tolerance:.1e}"
        )
        self.t = t
        self.drift = drift
        self.tolerance = tolerance


class TimeChangeSignError(RuntimeError):
    """The time-change factor changed sign (or vanished) along the orbit."""


class PerturbationConditionError(ValueError):
    """The perturbation fails the sampled dominance condition |W beta| < |c|."""


@dataclasses.dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator settings.

    method: "lie-rk4" (exponential update, structurally det-preserving) or
        "rk4-monitor" (classical RK4 on matrix entries with a per-step
        determinant monitor).
    step: target step size; segments are subdivided uniformly so that
        requested times are hit exactly.
    tolerance: allowed |det - 1| per 10 time units.
    """

    method: str = "lie-rk4"
    step: float = 1e-3
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.method not in ("lie-rk4", "rk4-monitor"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


DEFAULT_CONFIG = IntegratorConfig()


@dataclasses.dataclass(frozen=True)
class FlowSpec:
    """A flow to integrate: kind + data + integrator configuration."""

    kind: str  # "constant" | "perturbed" | "timechange"
    integrator: IntegratorConfig = DEFAULT_CONFIG
    V: AlgebraElement | None = None
    perturbation: PerturbationData | None = None
    f: ScalarField | None = None
    Zdir: AlgebraElement | None = None

    @classmethod
    def constant(cls, V: AlgebraElement, integrator: IntegratorConfig = DEFAULT_CONFIG):
        return cls(kind="constant", integrator=integrator, V=V)

    @classmethod
    def perturbed(cls, P: PerturbationData, integrator: IntegratorConfig = DEFAULT_CONFIG,
                  samples=None):
        """A perturbed flow; the sampled condition |W beta| < |c| must hold."""
        report = condition_check(P, sampling.default_samples() if samples is None else samples)
        if not report.passed:
            raise PerturbationConditionError(
                f"perturbation fails the sampled condition: max|W beta| = "
                f"{report.max_w_beta:.4g} vs |c| = {abs(report.c):.4g}, "
                f"min lambda = {report.lam_min:.4g}"
            )
        return cls(kind="perturbed", integrator=integrator, perturbation=P)

    @classmethod
    def timechange(cls, f: ScalarField, Zdir: AlgebraElement,
                   integrator: IntegratorConfig = DEFAULT_CONFIG):
        return cls(kind="timechange", integrator=integrator, f=f, Zdir=Zdir)


@dataclasses.dataclass
class Trajectory:
    times: np.ndarray
    points: list
    metadata: dict

    def det_drift(self) -> float:
        return max(p.det_drift() for p in self.points)

    def to_csv(self, fileobj):
        for key in sorted(self.metadata):
            fileobj.write(f"# {key} = {self.metadata[key]}\n")
        fileobj.write("t," + ",".join(f"m{r}{c}" for r in (1, 2, 3) for c in (1, 2, 3)) + "\n")
        for t, p in zip(self.times, self.points):
            row = [f"{t:.17g}"] + [f"{x:.17g}" for x in p.matrix.ravel()]
            fileobj.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def _exp_nilp(m: np.ndarray) -> np.ndarray:
    # exact for strictly upper (or lower) triangular arguments
    return np.eye(3) + m + 0.5 * (m @ m)


def _segments(total: float, step: float, record_times) -> list[float]:
    times = sorted(set(float(t) for t in record_times))
    if any(t < 0 or t > total + 1e-12 for t in times):
        raise ValueError("record times must lie in [0, T]")
    if not times or times[-1] < total:
        times.append(total)
    return times


def _det_check(gm: np.ndarray, t: float, tolerance: float):
    drift = abs(float(np.linalg.det(gm)) - 1.0)
    budget = tolerance * max(1.0, abs(t) / 10.0)
    if drift > budget:
        raise DeterminantDriftError(t, drift, budget)


def _drive_group(stage_fn, g0: np.ndarray, total: float, config: IntegratorConfig,
                 y0s=(), rhss=(), record_times=()):
    """Fixed-step RK4 on the group with extra states on the same stages.

    stage_fn(gm) -> (k, aux): k is the 3x3 algebra value of the field at gm;
    aux is passed to every extra right-hand side rhss[i](aux, y_i) -> dy_i.
    Returns a list of (t, gm, ys) snapshots at the requested record times
    (the final time is always included).
    """
    lie = config.method == "lie-rk4"
    g = np.array(g0, dtype=float)
    ys = list(y0s)
    out = []
    t = 0.0
    for target in _segments(total, config.step, record_times):
        seg = target - t
        if seg > 0:
            n = max(1, int(math.ceil(seg / config.step - 1e-12)))
            h = seg / n
            for _ in range(n):
                k1, aux1 = stage_fn(g)
                d1 = [r(aux1, y) for r, y in zip(rhss, ys)]
                if lie:
                    g2 = g @ _exp_nilp(0.5 * h * k1)
                else:
                    g2 = g + 0.5 * h * (g @ k1)
                k2, aux2 = stage_fn(g2)
                d2 = [r(aux2, y + 0.5 * h * d) for r, y, d in zip(rhss, ys, d1)]
                if lie:
                    g3 = g @ _exp_nilp(0.5 * h * k2)
                else:
                    g3 = g + 0.5 * h * (g2 @ k2)
                k3, aux3 = stage_fn(g3)
                d3 = [r(aux3, y + 0.5 * h * d) for r, y, d in zip(rhss, ys, d2)]
                if lie:
                    g4 = g @ _exp_nilp(h * k3)
                else:
                    g4 = g + h * (g3 @ k3)
                k4, aux4 = stage_fn(g4)
                d4 = [r(aux4, y + h * d) for r, y, d in zip(rhss, ys, d3)]
                if lie:
                    g = g @ _exp_nilp((h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
                else:
                    g = g + (h / 6.0) * (g @ k1 + 2.0 * (g2 @ k2) + 2.0 * (g3 @ k3) + g4 @ k4)
                ys = [y + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
                      for y, a, b, c, d in zip(ys, d1, d2, d3, d4)]
                t += h
                if not lie:
                    _det_check(g, t, config.tolerance)
            t = target
        _det_check(g, t, config.tolerance)
        out.append((t, g.copy(), tuple(np.copy(y) if isinstance(y, np.ndarray) else y
                                       for y in ys)))
    return out


def _drive_scalar(stage_fn, total: float, config: IntegratorConfig,
                  y0s=(), rhss=(), record_times=()):
    """Same stepping scheme for a scalar coordinate (time-changed central flow)."""
    rho = 0.0
    ys = list(y0s)
    out = []
    t = 0.0
    for target in _segments(total, config.step, record_times):
        seg = target - t
        if seg > 0:
            n = max(1, int(math.ceil(seg / config.step - 1e-12)))
            h = seg / n
            for _ in range(n):
                k1, aux1 = stage_fn(rho)
                d1 = [r(aux1, y) for r, y in zip(rhss, ys)]
                k2, aux2 = stage_fn(rho + 0.5 * h * k1)
                d2 = [r(aux2, y + 0.5 * h * d) for r, y, d in zip(rhss, ys, d1)]
                k3, aux3 = stage_fn(rho + 0.5 * h * k2)
                d3 = [r(aux3, y + 0.5 * h * d) for r, y, d in zip(rhss, ys, d2)]
                k4, aux4 = stage_fn(rho + h * k3)
                d4 = [r(aux4, y + h * d) for r, y, d in zip(rhss, ys, d3)]
                rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                ys = [y + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
                      for y, a, b, c, d in zip(ys, d1, d2, d3, d4)]
                t += h
            t = target
        out.append((t, rho, tuple(np.copy(y) if isinstance(y, np.ndarray) else y
                                  for y in ys)))
    return out


def _perturbed_stage(P: PerturbationData, reverse: bool, with_gradient: bool = False):
    Um = P.U.matrix
    Zm = P.Z.matrix
    beta = P.beta
    sign = -1.0 if reverse else 1.0
    if with_gradient:
        def stage(gm):
            b, grad = beta.value_and_frame_gradient(gm)
            return sign * (Um + b * Zm), (gm, b, grad)
    else:
        def stage(gm):
            b = beta.eval_matrix(gm)
            return sign * (Um + b * Zm), (gm, b, None)
    return stage


def _constant_stage(V: AlgebraElement, reverse: bool):
    k = (-1.0 if reverse else 1.0) * V.matrix
    def stage(gm):
        return k, (gm, None, None)
    return stage


def _spec_stage(spec: FlowSpec, reverse: bool, with_gradient: bool = False):
    if spec.kind == "perturbed":
        return _perturbed_stage(spec.perturbation, reverse, with_gradient)
    if spec.kind == "constant":
        return _constant_stage(spec.V, reverse)
    raise ValueError(f"no group stage for flow kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# public flow maps
# ---------------------------------------------------------------------------


def flow_constant(V: AlgebraElement, t: float, g: GroupElement) -> GroupElement:
    """g exp(tV), exact."""
    return GroupElement(g.matrix @ exp_map(V, t).matrix)


def flow_perturbed(spec: FlowSpec, t: float, g: GroupElement) -> GroupElement:
    """Endpoint of the perturbed flow after time t (negative t reverses the field)."""
    if spec.kind != "perturbed":
        raise ValueError("flow_perturbed requires a perturbed FlowSpec")
    if t == 0.0:
        return g
    stage = _perturbed_stage(spec.perturbation, reverse=t < 0)
    snaps = _drive_group(stage, g.matrix, abs(t), spec.integrator)
    return GroupElement(snaps[-1][1])


def flow_trajectory(spec: FlowSpec, t: float, g: GroupElement, n_records: int = 64,
                    metadata: dict | None = None) -> Trajectory:
    """Integrate and record n_records+1 evenly spaced points (including both ends)."""
    if spec.kind == "constant":
        grid = np.linspace(0.0, t, n_records + 1)
        pts = [flow_constant(spec.V, tau, g) for tau in grid]
        return Trajectory(grid, pts, dict(metadata or {}, kind="constant"))
    if spec.kind == "timechange":
        grid = np.linspace(0.0, t, n_records + 1)
        pts = [flow_timechange(spec.f, spec.Zdir, tau, g, spec.integrator) for tau in grid]
        return Trajectory(grid, pts, dict(metadata or {}, kind="timechange"))
    if t == 0.0:
        return Trajectory(np.zeros(1), [g], dict(metadata or {}, kind="perturbed"))
    records = np.linspace(0.0, abs(t), n_records + 1)
    stage = _perturbed_stage(spec.perturbation, reverse=t < 0)
    snaps = _drive_group(stage, g.matrix, abs(t), spec.integrator, record_times=records)
    times = np.array([s[0] for s in snaps]) * (1.0 if t > 0 else -1.0)
    points = [GroupElement(s[1]) for s in snaps]
    return Trajectory(times, points, dict(metadata or {}, kind="perturbed"))


def flow_timechange(f: ScalarField, Zdir: AlgebraElement, t: float, g: GroupElement,
                    config: IntegratorConfig = DEFAULT_CONFIG) -> GroupElement:
    """Flow of the field f(g) Zdir; the orbit stays on the Zdir subgroup direction.

    Solved as the scalar problem rho' = f(g exp(rho Z)).  Raises
    TimeChangeSignError if f changes sign (or vanishes) at a stage point.
    """
    if t == 0.0:
        return g
    gm = g.matrix
    Zm = Zdir.matrix
    if np.max(np.abs(np.linalg.matrix_power(Zm, 3))) > 1e-12:
        raise ValueError("time-change direction must be nilpotent")
    sgn = 1.0 if t > 0 else -1.0
    f0 = f.eval_matrix(gm)
    if f0 == 0.0:
        raise TimeChangeSignError("time-change factor vanishes at the base point")
    s0 = 1.0 if f0 > 0 else -1.0

    def stage(rho):
        x = gm @ _exp_nilp(rho * Zm)
        v = f.eval_matrix(x)
        if v * s0 <= 0.0:
            raise TimeChangeSignError(f"time-change factor reached {v:.3e} along the orbit")
        return sgn * v, (x, v, None)

    snaps = _drive_scalar(stage, abs(t), config)
    rho = snaps[-1][1]
    return GroupElement(gm @ _exp_nilp(rho * Zm))


def orbit_average(q: ScalarField, spec: FlowSpec, t: float, g: GroupElement,
                  direction: str = "forward") -> float:
    """Time average of q along the orbit of g.

    direction "forward" averages over [0, t], "backward" over [-t, 0]
    (both normalized by t).  Quadrature rides on the integration stages.
    """
    if t == 0.0:
        raise ValueError("orbit_average requires t != 0")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    reverse = (t < 0) != (direction == "backward")
    stage = _spec_stage(spec, reverse)

    def quad(aux, _):
        return q.eval_matrix(aux[0])

    snaps = _drive_group(stage, g.matrix, abs(t), spec.integrator, (0.0,), (quad,))
    return snaps[-1][2][0] / abs(t)
