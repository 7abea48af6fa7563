import numpy as np
import pytest

import sl3flows as sf
from sl3flows import sampling
from sl3flows.fields import finite_difference_derivative
from sl3flows.lie_core import DIM


I = sf.GroupElement.identity()


# --- parsing ---------------------------------------------------------------


def test_parse_basic_value():
    f = sf.parse_field("0.1*sin(m13)")
    g = sf.exp_map(sf.Z, 0.4)
    assert f(g) == pytest.approx(0.1 * np.sin(0.4), abs=1e-15)


def test_parse_zero_field():
    f = sf.parse_field("0")
    assert f(I) == 0.0


def test_parse_error_position():
    with pytest.raises(sf.FieldSyntaxError) as err:
        sf.parse_field("m11*")
    assert err.value.column == 5
    assert err.value.line == 1


def test_parse_unknown_identifier():
    with pytest.raises(sf.FieldSyntaxError, match="unknown identifier"):
        sf.parse_field("m11 + bogus")


def test_parse_unknown_function():
    with pytest.raises(sf.FieldSyntaxError, match="unknown function"):
        sf.parse_field("sqrt(m11)")


def test_parse_arity_mismatch():
    with pytest.raises(sf.FieldSyntaxError, match="arity"):
        sf.parse_field("sin(m11, m12)")
    with pytest.raises(sf.FieldSyntaxError, match="arity"):
        sf.parse_field("sin + 1")


def test_parse_entry_is_not_a_function():
    with pytest.raises(sf.FieldSyntaxError, match="not a function"):
        sf.parse_field("m11(m12)")


_CORPUS = (
    ["m11", "m23^2", "-m12", "1.5", "pi*m13", "sin(m11)", "cos(m12+m13)",
     "exp(-m11)", "tanh(0.5*m22)", "m11*m22*m33", "m11/(1+m22^2)",
     "(m11+m12)*(m21-m22)", "m11-m12-m13", "m11/m22/m33", "2^m11",
     "-(m11+m12)", "m13^3-0.25*m12", "sin(cos(m13))", "1/(2+sin(m21))",
     "m11^2^2"]
    + [f"{a}*sin(m1{k}+{b}*m2{k})" for k in (1, 2, 3)
       for a, b in [(0.1, 1.0), (2.0, 0.5), (0.25, 3.0), (1.5, 0.75)]]
    + [f"tanh(m3{k})-exp(m1{k}/4)" for k in (1, 2, 3)]
    + [f"cos(m2{k})^{n}" for k in (1, 2, 3) for n in (2, 3)]
    + [f"m{r}{c}+m{c}{r}^2" for r in (1, 2, 3) for c in (1, 2, 3)]
    + ["m12*m23-m13*m22", "exp(m11)*cos(m22)", "tanh(m13)^2/(1+m11^2)",
       "0.05*sin(m12+m13)", "-m31/(2-m33)"]
)


def test_parser_roundtrip_corpus():
    assert len(_CORPUS) >= 50
    for src in _CORPUS:
        first = sf.parse_field(src)
        second = sf.parse_field(first.pretty())
        assert first.tree == second.tree, src


# --- derivatives -----------------------------------------------------------


def test_directional_derivative_entry_example():
    f = sf.parse_field("m13")
    assert sf.directional_derivative(f, sf.Z, I) == 1.0


def test_directional_derivative_constant_is_zero():
    f = sf.parse_field("4.25")
    for v in (sf.Z, sf.frame_element("E21"), sf.frame_element("D1")):
        assert sf.directional_derivative(f, v, I) == 0.0


def test_directional_derivative_linearity():
    rng = np.random.default_rng(11)
    f = sf.parse_field("sin(m11*m23)+m12^2")
    g = sampling.sample_points(1, seed=8)[0]
    for _ in range(5):
        a, b = rng.uniform(-2, 2, 2)
        v1 = sf.AlgebraElement.from_coords(rng.uniform(-1, 1, DIM))
        v2 = sf.AlgebraElement.from_coords(rng.uniform(-1, 1, DIM))
        combo = sf.directional_derivative(f, a * v1 + b * v2, g)
        split = a * sf.directional_derivative(f, v1, g) + b * sf.directional_derivative(f, v2, g)
        assert combo == pytest.approx(split, abs=1e-12)


def test_derivative_vs_finite_difference_first_order():
    rng = np.random.default_rng(12)
    fields = [sf.parse_field(s) for s in
              ("sin(m11*m23)", "m12^3-m21", "exp(0.3*m13)*cos(m22)", "m11/(2+m33)")]
    pts = sampling.sample_points(5, seed=13)
    for f in fields:
        for g in pts:
            v = sf.AlgebraElement.from_coords(rng.uniform(-1, 1, DIM))
            exact = sf.directional_derivative(f, v, g)
            fd = finite_difference_derivative(f, v, g, step=1e-5)
            assert abs(exact - fd) <= 1e-7 * (1.0 + abs(exact))


def test_second_derivative_vs_finite_difference():
    rng = np.random.default_rng(14)
    f = sf.parse_field("sin(m11*m23)+exp(0.2*m12)")
    pts = sampling.sample_points(4, seed=15)
    for g in pts:
        v1 = sf.AlgebraElement.from_coords(rng.uniform(-1, 1, DIM))
        v2 = sf.AlgebraElement.from_coords(rng.uniform(-1, 1, DIM))
        exact = sf.directional_derivative(f, v1, g, second_direction=v2)
        inner = f.derivative(v2)
        fd = finite_difference_derivative(inner, v1, g, step=1e-4)
        assert abs(exact - fd) <= 1e-4 * (1.0 + abs(exact))


def test_mixed_derivatives_commute_for_commuting_directions(transfer_w):
    # [E12, E13] = 0, so the mixed derivatives agree
    u, z = sf.frame_element("E12"), sf.Z
    pts = sampling.sample_points(10, seed=16)
    for g in pts:
        uz = sf.directional_derivative(transfer_w, u, g, second_direction=z)
        zu = sf.directional_derivative(transfer_w, z, g, second_direction=u)
        assert abs(uz - zu) <= 1e-9


def test_frame_gradient_matches_single_directions(perturbation):
    pts = sampling.sample_points(3, seed=17)
    for g in pts:
        val, grad = perturbation.beta.value_and_frame_gradient(g.matrix)
        assert val == pytest.approx(perturbation.beta(g), abs=1e-15)
        for i in range(DIM):
            single = sf.directional_derivative(perturbation.beta, sf.frame_element(i), g)
            assert grad[i] == pytest.approx(single, abs=1e-13)


# --- perturbation data -----------------------------------------------------


def test_from_transfer_trivial(trivial_perturbation, box_samples):
    for g in box_samples[:10]:
        assert trivial_perturbation.beta(g) == 0.0
        assert trivial_perturbation.lam(g) == 1.0


def test_from_transfer_rejects_out_of_range():
    w = sf.parse_field("-5*m13")  # Zw = -5*m11, near -5 around the identity
    with pytest.raises(sf.TransferDomainError):
        sf.from_transfer(w, sf.frame_element("E12"))


def test_invariance_residual_vanishes_for_transfer(perturbation, box_samples):
    worst = max(abs(sf.invariance_residual(perturbation, g)) for g in box_samples)
    assert worst <= 1e-9


def test_invariance_residual_nonzero_for_non_invariant_pair(box_samples):
    # beta = m13 has Z(beta) = m11 != 0, so with lambda = 1 the identity fails
    P = sf.PerturbationData(sf.parse_field("m13"), sf.parse_field("1"),
                            sf.frame_element("E12"))
    vals = [abs(sf.invariance_residual(P, g)) for g in box_samples[:20]]
    assert max(vals) > 0.5


def test_cocycle_pair_matches_transfer_derivatives(perturbation, transfer_w, box_samples):
    pair = sf.cocycle_from_perturbation(perturbation)
    zw = transfer_w.derivative(sf.Z)
    uw = transfer_w.derivative(sf.frame_element("E12"))
    for g in box_samples[:20]:
        assert pair.f(g) == pytest.approx(zw(g), abs=1e-12)
        assert pair.g(g) == pytest.approx(-uw(g), abs=1e-12)
    assert pair.mean_constant == 0.0


def test_cocycle_pair_trivial(trivial_perturbation, box_samples):
    pair = sf.cocycle_from_perturbation(trivial_perturbation)
    for g in box_samples[:5]:
        assert pair.f(g) == 0.0
        assert pair.g(g) == 0.0


def test_cocycle_scaling_first_order(box_samples):
    U = sf.frame_element("E12")
    eps = 1e-4
    small = sf.from_transfer(sf.parse_field(f"{eps}*sin(m12+m13)"), U)
    big = sf.from_transfer(sf.parse_field(f"{2 * eps}*sin(m12+m13)"), U)
    ps, pb = sf.cocycle_from_perturbation(small), sf.cocycle_from_perturbation(big)
    for g in box_samples[:10]:
        assert pb.f(g) == pytest.approx(2 * ps.f(g), rel=1e-3, abs=1e-12)
        assert pb.g(g) == pytest.approx(2 * ps.g(g), rel=1e-3, abs=1e-12)


def test_cocycle_residual_vanishes_for_transfer(perturbation, box_samples):
    pair = sf.cocycle_from_perturbation(perturbation)
    worst = max(abs(sf.cocycle_residual(pair, g)) for g in box_samples)
    assert worst <= 1e-9


def test_cocycle_residual_nonzero_for_non_cocycle(box_samples):
    pair = sf.CocyclePair(sf.parse_field("m12"), sf.parse_field("0"), 0.0,
                          sf.frame_element("E12"), sf.Z)
    vals = [abs(sf.cocycle_residual(pair, g)) for g in box_samples[:20]]
    assert max(vals) > 0.5


def test_invariance_equals_cocycle_residual(perturbation, box_samples):
    pair = sf.cocycle_from_perturbation(perturbation, mean_constant=0.37)
    for g in box_samples[:50]:
        a = sf.invariance_residual(perturbation, g)
        b = sf.cocycle_residual(pair, g)
        assert abs(a - b) <= 1e-10


def test_condition_check_trivial(trivial_perturbation, box_samples):
    report = sf.condition_check(trivial_perturbation, box_samples)
    assert report.max_w_beta == 0.0
    assert report.passed


def test_condition_check_transfer_many_samples(perturbation):
    samples = sampling.sample_points(1000, box=0.4, seed=18)
    report = sf.condition_check(perturbation, samples)
    assert report.passed
    assert report.lam_min > 0


def test_condition_check_failure():
    # W = E23 moves the third column, so |W beta| = 3 |m22| around 3 near identity
    P = sf.PerturbationData(sf.parse_field("3*m23"), sf.parse_field("1"),
                            sf.frame_element("E12"))
    report = sf.condition_check(P, sampling.default_samples(50))
    assert not report.passed
    assert report.max_w_beta > abs(P.c)
