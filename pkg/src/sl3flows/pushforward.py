"""Frame-coefficient variational equations along flows.

Writing the image of an initial frame field X under the time-t flow as a
combination sum_V a_V(t) V of frame fields, the coefficients along one
orbit satisfy a linear, lower-triangular ODE system whose coupling matrix
at the point x is

    A(x) = ad_U + beta(x) ad_Z - e_Z (grad_frame beta)(x)^T

for the perturbed flow (and f(x) ad_Z - e_Z grad f for a time-changed
central flow).  This module integrates that system - for a single initial
field, or for all eight at once (the flow differential in frame
coordinates) - and provides the independent closed-form routes used to
cross-check it.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .fields import PerturbationData, ScalarField
from .flow_engine import (
    DEFAULT_CONFIG,
    FlowSpec,
    IntegratorConfig,
    _drive_group,
    _drive_scalar,
    _exp_nilp,
    _perturbed_stage,
)
from .lie_core import DIM, AlgebraElement, GroupElement, ad_matrix


def _strictly_lower(m: np.ndarray) -> bool:
    return bool(np.all(np.abs(np.triu(m)) == 0.0))


def coupling_matrices(P: PerturbationData) -> tuple[np.ndarray, np.ndarray]:
    """(ad_U, ad_Z) for the perturbed coupling, checked strictly lower-triangular.

    With the frame in its canonical order the point-independent parts of
    A(x) must be strictly lower triangular (the system is then solvable by
    substitution); only the beta-gradient feeds the last (E13) row.
    """
    ad_u = ad_matrix(P.U)
    ad_z = ad_matrix(P.Z)
    if not (_strictly_lower(ad_u) and _strictly_lower(ad_z)):
        raise RuntimeError("coupling matrices are not strictly lower triangular in frame order")
    return ad_u, ad_z


def _variational_rhs(P: PerturbationData, reverse: bool):
    ad_u, ad_z = coupling_matrices(P)
    sign = -1.0 if reverse else 1.0

    def rhs(aux, y):
        _, b, grad = aux
        dy = -((ad_u + b * ad_z) @ y)
        dy[7] += grad @ y
        return sign * dy

    return rhs


@dataclasses.dataclass
class FrameCoefficients:
    """Push-forward coefficients of one initial field along one orbit.

    coeffs[k] are the frame coordinates of the transported field at the
    moving point points[k] = flow(times[k], base_point).
    """

    base_point: GroupElement
    times: np.ndarray
    coeffs: np.ndarray  # (n, 8)
    points: list

    def to_csv(self, fileobj, metadata: dict | None = None):
        from .lie_core import BASIS_NAMES

        meta = dict(metadata or {})
        norms = np.linalg.norm(self.coeffs, axis=1)
        for key in sorted(meta):
            fileobj.write(f"# {key} = {meta[key]}\n")
        fileobj.write("t," + ",".join(f"a_{n}" for n in BASIS_NAMES) + ",norm\n")
        for t, row, nn in zip(self.times, self.coeffs, norms):
            cells = [f"{t:.17g}"] + [f"{x:.17g}" for x in row] + [f"{nn:.17g}"]
            fileobj.write(",".join(cells) + "\n")
        mask = (self.times > 0) & (norms > 0)
        if np.count_nonzero(mask) >= 2:
            fileobj.write(f"# fitted_exponent = {growth_exponent(self.times[mask], norms[mask]):.17g}\n")


def integrate_pushforward(spec: FlowSpec, X0: AlgebraElement, T: float, g: GroupElement,
                          n_records: int = 32) -> FrameCoefficients:
    """Solve the coefficient system for the initial field X0 up to time T."""
    if spec.kind != "perturbed":
        raise ValueError("integrate_pushforward expects a perturbed FlowSpec")
    y0 = X0.coords
    if T == 0.0:
        return FrameCoefficients(g, np.zeros(1), y0[None, :], [g])
    reverse = T < 0
    stage = _perturbed_stage(spec.perturbation, reverse, with_gradient=True)
    rhs = _variational_rhs(spec.perturbation, reverse)
    records = np.linspace(0.0, abs(T), n_records + 1)
    snaps = _drive_group(stage, g.matrix, abs(T), spec.integrator, (y0,), (rhs,), records)
    times = np.array([s[0] for s in snaps]) * (1.0 if T > 0 else -1.0)
    coeffs = np.stack([s[2][0] for s in snaps])
    points = [GroupElement(s[1]) for s in snaps]
    return FrameCoefficients(g, times, coeffs, points)


def closed_form_W(P: PerturbationData, t: float, g: GroupElement,
                  config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """The E13-coefficient of the transported shear partner, by quadrature.

    Evaluates (1/lambda at the endpoint) * integral over [0, t] of
    lambda*(c + W beta) along the orbit - a route through orbit quadrature
    only, independent of the variational integration.
    """
    if t == 0.0:
        return 0.0
    stage = _perturbed_stage(P, reverse=t < 0)
    integrand = P.shear_integrand

    def quad(aux, _):
        return integrand.eval_matrix(aux[0])

    snaps = _drive_group(stage, g.matrix, abs(t), config, (0.0,), (quad,))
    total = snaps[-1][2][0] * (1.0 if t > 0 else -1.0)
    return total / P.lam.eval_matrix(snaps[-1][1])


def closed_form_W_series(P: PerturbationData, times, g: GroupElement,
                         config: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """:func:`closed_form_W` at several times along one quadrature drive."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("closed_form_W_series expects times >= 0")
    stage = _perturbed_stage(P, reverse=False)
    integrand = P.shear_integrand

    def quad(aux, _):
        return integrand.eval_matrix(aux[0])

    snaps = _drive_group(stage, g.matrix, float(times.max(initial=0.0)), config,
                         (0.0,), (quad,), times)
    by_time = {s[0]: s[2][0] / P.lam.eval_matrix(s[1]) for s in snaps}
    return np.array([0.0 if t == 0.0 else by_time[t] for t in times])


def closed_form_Z(P: PerturbationData, t: float, g: GroupElement,
                  config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """The central coefficient of the transported central field: the density
    ratio between the base point and the endpoint of the orbit."""
    if t == 0.0:
        return 1.0
    stage = _perturbed_stage(P, reverse=t < 0)
    snaps = _drive_group(stage, g.matrix, abs(t), config)
    return P.lam(g) / P.lam.eval_matrix(snaps[-1][1])


def closed_form_Z_series(P: PerturbationData, times, g: GroupElement,
                         config: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """:func:`closed_form_Z` at several times along one drive."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("closed_form_Z_series expects times >= 0")
    stage = _perturbed_stage(P, reverse=False)
    snaps = _drive_group(stage, g.matrix, float(times.max(initial=0.0)), config,
                         record_times=times)
    lam0 = P.lam(g)
    by_time = {s[0]: lam0 / P.lam.eval_matrix(s[1]) for s in snaps}
    return np.array([1.0 if t == 0.0 else by_time[t] for t in times])


@dataclasses.dataclass
class DifferentialSeries:
    """The full 8x8 frame-coordinate differential along one orbit."""

    base_point: GroupElement
    times: np.ndarray
    matrices: np.ndarray  # (n, 8, 8)
    points: list
    divergence_integrals: np.ndarray | None = None  # integral of Z beta along the orbit

    def norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(m, 2) for m in self.matrices])

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.matrices, axis=2)  # (n, 8)

    def dets(self) -> np.ndarray:
        return np.array([np.linalg.det(m) for m in self.matrices])

    def det_predictions(self) -> np.ndarray | None:
        # det of the coefficient matrix evolves by the trace of the coupling,
        # which is minus (Z beta) along the orbit
        if self.divergence_integrals is None:
            return None
        return np.exp(self.divergence_integrals)

    def fit_exponent(self) -> float:
        mask = self.times > 0
        return growth_exponent(self.times[mask], self.norms()[mask])

    def fit_row_exponents(self) -> np.ndarray:
        mask = self.times > 0
        rn = self.row_norms()[mask]
        return np.array(
            [growth_exponent(self.times[mask], rn[:, i]) for i in range(DIM)]
        )


def differential_matrix(spec: FlowSpec, T: float, g: GroupElement,
                        record_times=None) -> DifferentialSeries:
    """Transport all eight frame fields at once: Y(0) = identity."""
    if spec.kind != "perturbed":
        raise ValueError("differential_matrix expects a perturbed FlowSpec")
    if record_times is None:
        record_times = np.linspace(0.0, abs(T), 33)
    if T == 0.0:
        return DifferentialSeries(g, np.zeros(1), np.eye(DIM)[None], [g], np.zeros(1))
    reverse = T < 0
    P = spec.perturbation
    stage = _perturbed_stage(P, reverse, with_gradient=True)
    rhs = _variational_rhs(P, reverse)
    zbeta = P.z_beta
    sign = -1.0 if reverse else 1.0

    def div_quad(aux, _):
        return sign * zbeta.eval_matrix(aux[0])

    snaps = _drive_group(stage, g.matrix, abs(T), spec.integrator,
                         (np.eye(DIM), 0.0), (rhs, div_quad), record_times)
    times = np.array([s[0] for s in snaps]) * (1.0 if T > 0 else -1.0)
    mats = np.stack([s[2][0] for s in snaps])
    divs = np.array([s[2][1] for s in snaps])
    points = [GroupElement(s[1]) for s in snaps]
    return DifferentialSeries(g, times, mats, points, divs)


def growth_exponent(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(values) against log(times)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(t <= 0) or np.any(v <= 0):
        raise ValueError("growth_exponent needs positive times and values")
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])


def dyadic_times(t_max: float) -> np.ndarray:
    """1, 2, 4, ... up to t_max (inclusive)."""
    ts = []
    t = 1.0
    while t <= t_max * (1 + 1e-12):
        ts.append(t)
        t *= 2.0
    return np.array(ts)


def ztilde_transport_residual(P: PerturbationData, t: float, g: GroupElement,
                              config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """Transport the commuting time-changed central field and compare with itself.

    The field (1/lambda) Z is invariant under the perturbed flow exactly when
    the measure-invariance identity holds; the residual is the frame-norm
    mismatch at the endpoint.
    """
    y0 = (1.0 / P.lam(g)) * np.eye(DIM)[7]
    stage = _perturbed_stage(P, reverse=t < 0, with_gradient=True)
    rhs = _variational_rhs(P, reverse=t < 0)
    snaps = _drive_group(stage, g.matrix, abs(t), config, (y0,), (rhs,))
    expected = (1.0 / P.lam.eval_matrix(snaps[-1][1])) * np.eye(DIM)[7]
    return float(np.linalg.norm(snaps[-1][2][0] - expected))


# ---------------------------------------------------------------------------
# time-changed central flow differential
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class TimechangeDifferential:
    """Differential of the time-changed central flow, with the accumulated
    time-change integral recorded alongside."""

    base_point: GroupElement
    times: np.ndarray
    matrices: np.ndarray  # (n, 8, 8)
    lambdas: np.ndarray  # accumulated integral of the factor (n,)
    points: list

    def structure_residual(self) -> float:
        """Deviation from the predicted shape outside the free last row.

        The predicted matrix is the identity plus entries proportional to
        the accumulated integral L: (3,0) = (4,0) = -2L, (5,2) = -L,
        (6,1) = +L.  Only the E13 row is unconstrained.
        """
        worst = 0.0
        for m, lam in zip(self.matrices, self.lambdas):
            e = np.eye(DIM)
            e[3, 0] = -2.0 * lam
            e[4, 0] = -2.0 * lam
            e[5, 2] = -lam
            e[6, 1] = lam
            worst = max(worst, float(np.max(np.abs((m - e)[:7, :]))))
        return worst

    def entry(self, row: int, col: int) -> np.ndarray:
        return self.matrices[:, row, col]


def timechange_differential(lam: ScalarField, T: float, g: GroupElement,
                            config: IntegratorConfig = DEFAULT_CONFIG,
                            n_records: int = 16,
                            Zdir: AlgebraElement | None = None) -> TimechangeDifferential:
    """Integrate the eight-equation coefficient system along the flow of (1/lambda) Z."""
    from .lie_core import Z as _Z

    Zdir = Zdir or _Z
    if T < 0:
        raise ValueError("timechange_differential expects T >= 0")
    ad_z = ad_matrix(Zdir)
    if not _strictly_lower(ad_z):
        raise RuntimeError("central coupling matrix must be strictly lower triangular")
    f = 1.0 / lam
    gm = g.matrix
    Zm = Zdir.matrix

    def stage(rho):
        x = gm @ _exp_nilp(rho * Zm)
        val, grad = f.value_and_frame_gradient(x)
        return val, (x, val, grad)

    def rhs_matrix(aux, y):
        _, val, grad = aux
        dy = -val * (ad_z @ y)
        dy[7] += grad @ y
        return dy

    def rhs_accum(aux, _):
        return aux[1]

    records = np.linspace(0.0, T, n_records + 1)
    if T == 0.0:
        return TimechangeDifferential(g, np.zeros(1), np.eye(DIM)[None], np.zeros(1), [g])
    snaps = _drive_scalar(stage, T, config, (np.eye(DIM), 0.0), (rhs_matrix, rhs_accum), records)
    times = np.array([s[0] for s in snaps])
    mats = np.stack([s[2][0] for s in snaps])
    lams = np.array([s[2][1] for s in snaps])
    points = [GroupElement(gm @ _exp_nilp(s[1] * Zm)) for s in snaps]
    return TimechangeDifferential(g, times, mats, lams, points)
