"""Conjugacy constructions and equivalence diagnostics.

A perturbation generated by a transfer function w is straightened by the
map F(g) = g exp(w(g) E13): composing F with the perturbed flow equals the
unperturbed flow composed with F.  This module measures that residual, the
corresponding identity on differentials, an exact bracket-expansion
identity in rational arithmetic, the scalar invariant that pins the
central direction among candidate conjugate fields, and the boundedness of
the accumulated time-change integral.
"""

from __future__ import annotations

import dataclasses
from fractions import Fraction
from typing import Callable

import numpy as np

from .fields import PerturbationData, ScalarField
from .flow_engine import (
    DEFAULT_CONFIG,
    FlowSpec,
    IntegratorConfig,
    _drive_scalar,
    _exp_nilp,
    flow_constant,
    flow_perturbed,
)
from .lie_core import (
    DIM,
    AlgebraElement,
    GroupElement,
    Z,
    ad_matrix,
    exact_bracket_coords,
    exp_map,
    jordan_blocks,
    matrix_to_coords,
)


@dataclasses.dataclass(frozen=True)
class ConjugacyMap:
    """g -> g exp(w(g) Z): slides each point along the central direction by w."""

    w: ScalarField
    Zdir: AlgebraElement = Z

    def __call__(self, g: GroupElement) -> GroupElement:
        return GroupElement(g.matrix @ exp_map(self.Zdir, self.w(g)).matrix)


def conjugacy_residual(w: ScalarField, P: PerturbationData, t: float, g: GroupElement,
                       config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """Distance between F(perturbed flow of g) and (constant flow of F(g)).

    For P built from the same transfer function w the two paths coincide,
    so the residual is pure integrator error.
    """
    F = ConjugacyMap(w, P.Z)
    spec = FlowSpec(kind="perturbed", integrator=config, perturbation=P)
    left = F(flow_perturbed(spec, t, g))
    right = flow_constant(P.U, t, F(g))
    return left.distance(right)


def pushforward_identity_check(w: ScalarField, P: PerturbationData, g: GroupElement,
                               config: IntegratorConfig = DEFAULT_CONFIG,
                               fd_step: float = 0.02) -> float:
    """Frame-norm of (image of the perturbed generator under F at g) minus
    the unperturbed generator at F(g), with the image measured by finite
    differences along the perturbed orbit."""
    F = ConjugacyMap(w, P.Z)
    spec = FlowSpec(kind="perturbed", integrator=config, perturbation=P)
    h = fd_step
    pts = {tau: F(flow_perturbed(spec, tau, g)).matrix for tau in (-2 * h, -h, h, 2 * h)}
    deriv = (pts[-2 * h] - 8.0 * pts[-h] + 8.0 * pts[h] - pts[2 * h]) / (12.0 * h)
    image = matrix_to_coords(np.linalg.solve(F(g).matrix, deriv))
    return float(np.linalg.norm(image - P.U.coords))


def chain_rule_residuals(w: ScalarField, P: PerturbationData, g: GroupElement,
                         test_fields, config: IntegratorConfig = DEFAULT_CONFIG,
                         fd_step: float = 0.02) -> list[float]:
    """Check the chain-rule split of d/dt f(F(perturbed flow)) at t = 0.

    The derivative decomposes as (Zf at F(g)) * (Uw + beta Zw)(g) plus
    (Uf + beta(g) Zf) at F(g).  The left side is measured by finite
    differences; the right side is exact.  One residual per test field.
    """
    F = ConjugacyMap(w, P.Z)
    spec = FlowSpec(kind="perturbed", integrator=config, perturbation=P)
    h = fd_step
    pts = {tau: F(flow_perturbed(spec, tau, g)) for tau in (-2 * h, -h, h, 2 * h)}
    fg = F(g)
    utilde_w = w.derivative(P.U)(g) + P.beta(g) * w.derivative(P.Z)(g)
    out = []
    for f in test_fields:
        lhs = (f(pts[-2 * h]) - 8.0 * f(pts[-h]) + 8.0 * f(pts[h]) - f(pts[2 * h])) / (12.0 * h)
        rhs = (f.derivative(P.Z)(fg) * utilde_w
               + f.derivative(P.U)(fg) + P.beta(g) * f.derivative(P.Z)(fg))
        out.append(abs(lhs - rhs))
    return out


# ---------------------------------------------------------------------------
# bracket expansion in exact arithmetic
# ---------------------------------------------------------------------------


def bracket_expansion_check(a, u_coeffs) -> tuple:
    """Residuals of the hand-expanded commutator [sum a_E E, U] per component.

    `a` holds constant frame coefficients (index order as in lie_core) and
    `u_coeffs` = (c12, c23, c13).  The expansion is computed once from the
    structure-constant table and once from the expanded per-component
    formulas; both in rational arithmetic, so the residual must be exactly
    zero.  The two diagonal components are expanded against the
    unnormalized differences E11-E22 and E22-E33 and rescaled by 2 to the
    frame normalization.
    """
    a = [Fraction(x) if not isinstance(x, Fraction) else x for x in a]
    c12, c23, c13 = (Fraction(x) if not isinstance(x, Fraction) else x for x in u_coeffs)

    # route 1: structure-constant table, [sum_i a_i B_i, U] with U in frame slots 5..7
    u = {5: c12, 6: c23, 7: c13}
    lhs = [Fraction(0)] * DIM
    for i in range(DIM):
        if a[i] == 0:
            continue
        for j, cu in u.items():
            if cu == 0:
                continue
            coords = exact_bracket_coords(i, j)
            for k in range(DIM):
                lhs[k] += a[i] * cu * coords[k]

    # route 2: expanded component formulas (constant coefficients)
    half = Fraction(1, 2)
    rhs = [
        Fraction(0),
        -c23 * a[0],
        c12 * a[0],
        2 * (-c12 * a[1] - c13 * a[0]),
        2 * (-c23 * a[2] - c13 * a[0]),
        -c13 * a[2] + c12 * (2 * (a[3] * half) - a[4] * half),
        c13 * a[1] + c23 * (2 * (a[4] * half) - a[3] * half),
        -c12 * a[6] + c23 * a[5] + c13 * (a[3] * half + a[4] * half),
    ]
    return tuple(l - r for l, r in zip(lhs, rhs))


# ---------------------------------------------------------------------------
# equivalence invariant
# ---------------------------------------------------------------------------

UNVERIFIED_NOTE = "per cited theorem, unverified here"

#: growth-rate values trusted only at the anchored key (the central direction)
_GR_TABLE = {(3, 2, 2, 1): 5.0}


def anchored_growth_rate(blocks) -> float:
    """Growth rate from Jordan-block data: an anchored table with a
    max-block fallback (2*max - 1) for unanchored inputs."""
    key = tuple(int(b) for b in blocks)
    if key in _GR_TABLE:
        return _GR_TABLE[key]
    return 2.0 * max(key) - 1.0


@dataclasses.dataclass(frozen=True)
class KakutaniSpec:
    """Pluggable definition of the equivalence invariant: a map from
    Jordan-block data to a growth rate, plus a constant offset."""

    gr_definition: Callable = anchored_growth_rate
    offset: float = -3.0


@dataclasses.dataclass(frozen=True)
class KakutaniResult:
    value: float
    blocks: tuple
    flag: str | None

    def as_dict(self) -> dict:
        return {"value": self.value, "blocks": list(self.blocks), "flag": self.flag}


def kakutani_invariant(V: AlgebraElement, spec: KakutaniSpec = KakutaniSpec()) -> KakutaniResult:
    """Equivalence invariant of the flow generated by V, from the Jordan
    structure of its adjoint.

    The value is anchored (and unflagged) only for multiples of the central
    direction, where it equals 2; every other input carries the
    "unverified" flag since the defining formula is pluggable, not shipped.
    Block sizes, hence the value, are invariant under nonzero scaling of V.
    """
    blocks = tuple(jordan_blocks(ad_matrix(V)))
    value = float(spec.gr_definition(blocks)) + spec.offset
    co = V.coords
    central = np.linalg.norm(co - co[7] * np.eye(DIM)[7]) <= 1e-12 * max(1.0, abs(co[7]))
    flag = None if central and blocks in _GR_TABLE else UNVERIFIED_NOTE
    return KakutaniResult(value, blocks, flag)


# ---------------------------------------------------------------------------
# accumulated time-change integral
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class LambdaTransferSeries:
    """The running integral of 1/lambda along the time-changed central flow,
    recorded against t."""

    times: np.ndarray
    lambdas: np.ndarray  # accumulated integral values
    points: list  # orbit points at the record times

    @property
    def deviation(self) -> np.ndarray:
        return self.lambdas - self.times

    @property
    def sup_deviation(self) -> float:
        return float(np.max(np.abs(self.deviation)))

    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.lambdas) > 0))


def lambda_transfer_diagnostic(lam: ScalarField, T: float, g: GroupElement,
                               config: IntegratorConfig = DEFAULT_CONFIG,
                               n_records: int = 64,
                               Zdir: AlgebraElement = Z) -> LambdaTransferSeries:
    """Integrate the time-changed central flow of (1/lambda) Z up to T and
    record the accumulated integral; its deviation from t stays bounded
    exactly when 1/lambda - 1 telescopes along the flow."""
    if T <= 0:
        raise ValueError("lambda_transfer_diagnostic expects T > 0")
    f = 1.0 / lam
    gm = g.matrix
    Zm = Zdir.matrix

    def stage(rho):
        x = gm @ _exp_nilp(rho * Zm)
        v = f.eval_matrix(x)
        return v, (x, v, None)

    def accum(aux, _):
        return aux[1]

    records = np.linspace(0.0, T, n_records + 1)
    snaps = _drive_scalar(stage, T, config, (0.0,), (accum,), records)
    times = np.array([s[0] for s in snaps])
    lams = np.array([s[2][0] for s in snaps])
    points = [GroupElement(gm @ _exp_nilp(s[1] * Zm)) for s in snaps]
    return LambdaTransferSeries(times, lams, points)


def telescoping_residual(series: LambdaTransferSeries, w: ScalarField,
                         g: GroupElement) -> float:
    """Max over the record grid of |(accumulated - t) + (w at orbit point - w at g)|.

    For lambda = 1 + Zw the accumulated integral minus t equals
    w(g) - w(orbit point) identically, so the residual is quadrature error.
    """
    w0 = w(g)
    worst = 0.0
    for dev, pt in zip(series.deviation, series.points):
        worst = max(worst, abs(dev + (w(pt) - w0)))
    return worst
