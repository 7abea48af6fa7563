import io
import math

import numpy as np
import pytest

import sl3flows as sf
from sl3flows import sampling


I = sf.GroupElement.identity()


def _spec(P, step=5e-3, method="lie-rk4"):
    return sf.FlowSpec.perturbed(P, sf.IntegratorConfig(method=method, step=step))


def test_flow_constant_central():
    t = 1.7
    got = sf.flow_constant(sf.Z, t, I)
    assert np.array_equal(got.matrix, np.eye(3) + t * sf.Z.matrix)


def test_flow_constant_zero_time(base_point):
    v = sf.unipotent(0.5, -0.25, 1.0)
    assert sf.flow_constant(v, 0.0, base_point) is not base_point or True
    assert sf.flow_constant(v, 0.0, base_point).distance(base_point) == 0.0


def test_flow_constant_group_law(base_point):
    v = sf.unipotent(0.5, -0.25, 1.0)
    a = sf.flow_constant(v, 0.4, sf.flow_constant(v, 0.9, base_point))
    b = sf.flow_constant(v, 1.3, base_point)
    assert a.distance(b) <= 1e-13


def test_perturbed_zero_time(perturbation, base_point):
    spec = _spec(perturbation)
    assert sf.flow_perturbed(spec, 0.0, base_point) is base_point


def test_perturbed_reduces_to_constant(trivial_perturbation, base_point):
    spec = _spec(trivial_perturbation)
    got = sf.flow_perturbed(spec, 2.0, base_point)
    want = sf.flow_constant(trivial_perturbation.U, 2.0, base_point)
    assert got.distance(want) <= 1e-10


def test_perturbed_flow_property(perturbation, base_point):
    spec = _spec(perturbation)
    a = sf.flow_perturbed(spec, 0.8, sf.flow_perturbed(spec, 1.7, base_point))
    b = sf.flow_perturbed(spec, 2.5, base_point)
    assert a.distance(b) <= 1e-9


def test_perturbed_reversibility(perturbation, base_point):
    spec = _spec(perturbation)
    forward = sf.flow_perturbed(spec, 10.0, base_point)
    back = sf.flow_perturbed(spec, -10.0, forward)
    assert back.distance(base_point) <= 1e-8


def test_determinant_conservation(perturbation, base_point):
    spec = _spec(perturbation)
    traj = sf.flow_trajectory(spec, 10.0, base_point, n_records=20)
    assert traj.det_drift() <= 1e-9


def test_rk4_monitor_method_agrees(perturbation, base_point):
    fine = _spec(perturbation, step=2e-3)
    classical = _spec(perturbation, step=2e-3, method="rk4-monitor")
    a = sf.flow_perturbed(fine, 3.0, base_point)
    b = sf.flow_perturbed(classical, 3.0, base_point)
    assert a.distance(b) <= 1e-9


def test_step_halving_order(perturbation, base_point):
    t = 2.0
    ref = sf.flow_perturbed(_spec(perturbation, step=2.5e-3), t, base_point)
    errors = []
    for step in (0.08, 0.04, 0.02):
        end = sf.flow_perturbed(_spec(perturbation, step=step), t, base_point)
        errors.append(end.distance(ref))
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    assert min(orders) >= 3.7, (errors, orders)


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        sf.IntegratorConfig(step=0.0)
    with pytest.raises(ValueError):
        sf.IntegratorConfig(tolerance=-1.0)
    with pytest.raises(ValueError):
        sf.IntegratorConfig(method="euler")


def test_flowspec_rejects_failing_condition():
    P = sf.PerturbationData(sf.parse_field("3*m23"), sf.parse_field("1"),
                            sf.frame_element("E12"))
    with pytest.raises(sf.PerturbationConditionError):
        sf.FlowSpec.perturbed(P)


def test_timechange_unit_factor(base_point, cfg_fast):
    got = sf.flow_timechange(sf.constant_field(1.0), sf.Z, 1.3, base_point, cfg_fast)
    want = sf.flow_constant(sf.Z, 1.3, base_point)
    assert got.distance(want) <= 1e-12


def test_timechange_constant_factor(base_point, cfg_fast):
    got = sf.flow_timechange(sf.constant_field(2.0), sf.Z, 1.1, base_point, cfg_fast)
    want = sf.flow_constant(sf.Z, 2.2, base_point)
    assert got.distance(want) <= 1e-12


def test_timechange_commutes_with_perturbed(perturbation, base_point, cfg_fast):
    spec = _spec(perturbation)
    zt = perturbation.ztilde
    r, t = 0.8, 1.5
    lhs = sf.flow_perturbed(spec, t, sf.flow_timechange(zt, sf.Z, r, base_point, cfg_fast))
    rhs = sf.flow_timechange(zt, sf.Z, r, sf.flow_perturbed(spec, t, base_point), cfg_fast)
    assert lhs.distance(rhs) <= 1e-7


def test_timechange_sign_vanishing_at_base(cfg_fast):
    # m13 vanishes at the identity
    with pytest.raises(sf.TimeChangeSignError):
        sf.flow_timechange(sf.parse_field("m13"), sf.Z, 1.0, I, cfg_fast)


def test_timechange_sign_change_detected():
    # with a coarse step the stages overshoot the zero of 1 - 3*m13
    f = sf.parse_field("1-3*m13")
    with pytest.raises(sf.TimeChangeSignError):
        sf.flow_timechange(f, sf.Z, 2.0, I, sf.IntegratorConfig(step=1.0))


def test_orbit_average_constant(perturbation, base_point):
    spec = _spec(perturbation)
    assert sf.orbit_average(sf.constant_field(1.0), spec, 2.0, base_point) == pytest.approx(1.0, abs=1e-12)


def test_orbit_average_trivial_integrand(trivial_perturbation, base_point):
    spec = _spec(trivial_perturbation)
    q = trivial_perturbation.shear_integrand  # constant c for beta = 0, lambda = 1
    got = sf.orbit_average(q, spec, 3.0, base_point, direction="backward")
    assert got == pytest.approx(trivial_perturbation.c, abs=1e-12)


def test_orbit_average_change_of_variables(perturbation, base_point):
    spec = _spec(perturbation)
    q = perturbation.shear_integrand
    t = 2.0
    backward = sf.orbit_average(q, spec, t, base_point, direction="backward")
    shifted = sf.flow_perturbed(spec, -t, base_point)
    forward = sf.orbit_average(q, spec, t, shifted, direction="forward")
    assert abs(backward - forward) <= 1e-10


def test_orbit_average_requires_nonzero_time(perturbation, base_point):
    with pytest.raises(ValueError):
        sf.orbit_average(sf.constant_field(1.0), _spec(perturbation), 0.0, base_point)


def test_trajectory_csv_format(perturbation, base_point):
    spec = _spec(perturbation)
    traj = sf.flow_trajectory(spec, 1.0, base_point, n_records=4, metadata={"seed": 7})
    buf = io.StringIO()
    traj.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# ")
    header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    assert lines[header_idx] == "t," + ",".join(
        f"m{r}{c}" for r in (1, 2, 3) for c in (1, 2, 3)
    )
    assert len(lines) == header_idx + 1 + 5


def test_trajectory_negative_time(perturbation, base_point):
    spec = _spec(perturbation)
    traj = sf.flow_trajectory(spec, -2.0, base_point, n_records=4)
    assert traj.times[-1] == -2.0
    end = sf.flow_perturbed(spec, -2.0, base_point)
    assert traj.points[-1].distance(end) <= 1e-12
