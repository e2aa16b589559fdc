import numpy as np
import pytest

from oracles import central_jacobian, semi_implicit_euler
from reflex import rmp
from reflex.errors import RejectedInput
from reflex.rmp import JointSpaceRmp, RmpParams

P = RmpParams()


def test_params_validation():
    for field in ("ell_p", "l_v", "ell_d", "ell_m", "eps_d", "eps_m", "r", "mu_g", "dt_int"):
        with pytest.raises(RejectedInput):
            RmpParams(**{field: 0.0})
    with pytest.raises(RejectedInput):
        RmpParams(n_int=0)
    with pytest.raises(RejectedInput):
        RmpParams(n_int=2.5)


def test_params_dict_roundtrip():
    d = P.to_dict()
    assert list(d) == list(RmpParams.field_names()) and len(d) == 15
    assert RmpParams.from_dict(d) == P
    with pytest.raises(RejectedInput):
        RmpParams.from_dict({"k_q": 1.0})
    assert P.with_overrides(k_g=3.0).k_g == 3.0


def test_attractor_rest_at_goal():
    q = np.linspace(-1, 1, 7)
    out = rmp.attractor(q, np.zeros(7), q, P)
    assert np.array_equal(out.f, np.zeros(7))
    assert np.array_equal(out.M, P.mu_g * np.eye(7))


def test_attractor_unit_gain_exact(rng):
    q, q_g = rng.normal(size=7), rng.normal(size=7)
    out = rmp.attractor(q, np.zeros(7), q_g, P.with_overrides(k_g=1.0))
    assert np.array_equal(out.f, q_g - q)


def test_attractor_formula(rng):
    for _ in range(50):
        q, qd, qg = rng.normal(size=(3, 7))
        kg, kd = rng.uniform(0.1, 50, 2)
        f = rmp.attractor(q, qd, qg, P.with_overrides(k_g=kg, k_d=kd)).f
        assert np.allclose(f, kg * (qg - q) - kd * qd, rtol=0, atol=1e-13)


def test_gate_values():
    assert rmp.closing_gate(0.0, 0.1) == 0.5
    assert rmp.closing_gate(1e6, 0.1) == 0.0
    assert rmp.closing_gate(-1e6, 0.1) == 1.0
    assert np.isclose(rmp.closing_gate(0.3, 0.1), 1 - 1 / (1 + np.exp(-3.0)), rtol=0, atol=1e-15)


def test_gate_strictly_decreasing_where_representable():
    xs = np.linspace(-2, 2, 401)
    g = np.array([rmp.closing_gate(x, 0.1) for x in xs])
    assert np.all(np.diff(g) < 0)


def test_repulsor_frozen_example():
    f, M = rmp.repulsor_task(0.04, -0.5, P)
    assert np.isclose(f, 9.795050870713773, rtol=1e-13)
    assert np.isclose(M, 17.50006303090698, rtol=1e-13)


def test_repulsor_cutoff_boundary():
    for v in (-3.0, 0.0, 2.0):
        assert rmp.repulsor_task(P.r, v, P)[1] == 0.0
        assert rmp.repulsor_task(P.r * 1.5, v, P)[1] == 0.0


def test_repulsor_contact_at_rest():
    f, M = rmp.repulsor_task(0.0, 0.0, P)
    assert f == P.k_p
    assert np.isclose(M, 0.5 * P.mu_r / P.eps_m, rtol=1e-15)


def test_receding_obstacle_deactivates():
    assert rmp.repulsor_task(0.05, 100 * P.l_v, P)[1] < 1e-6


def test_cutoff_continuous():
    assert rmp.cutoff(P.r - 1e-8, P.r) < 1e-14
    assert rmp.cutoff(P.r, P.r) == 0.0
    assert rmp.cutoff(0.0, P.r) == 1.0


def test_metric_nonnegative(rng):
    for x, v in zip(rng.uniform(0, 0.5, 500), rng.normal(scale=5, size=500)):
        assert rmp.repulsor_task(x, v, P)[1] >= 0.0


def test_repulsor_rejects_negative_x():
    with pytest.raises(RejectedInput):
        rmp.repulsor_task(-1e-3, 0.0, P)


def test_pullback_inert_cases():
    for f, M, J in [(1.0, 0.0, np.ones(7)), (1.0, 2.0, np.zeros(7))]:
        out = rmp.pullback(f, M, J)
        assert not np.any(out.f) and not np.any(out.M)


def test_pullback_closed_form_and_eigen(rng):
    for _ in range(200):
        J = rng.normal(size=7)
        f, m = rng.normal(), rng.uniform(0.01, 100)
        out = rmp.pullback(f, m, J)
        assert np.allclose(out.f, J * f / (J @ J), rtol=0, atol=1e-9)
        w = np.linalg.eigvalsh(out.M)
        assert np.isclose(w[-1], m * (J @ J), rtol=1e-9)
        assert np.all(np.abs(w[:-1]) < 1e-9 * w[-1])
        assert np.allclose(out.M, out.M.T, atol=1e-12)


def test_pullback_rejects_non_finite():
    with pytest.raises(RejectedInput):
        rmp.pullback(1.0, 1.0, np.full(7, np.nan))


def test_repulsor_jacobian_finite_difference(model, rng):
    from reflex.kinematics import SurfacePoint, forward_kinematics, point_jacobian

    for _ in range(20):
        q = rng.uniform(model.lower, model.upper)
        local = rng.normal(scale=0.05, size=3)
        link = int(rng.integers(1, 8))
        x_obs = rng.normal(size=3)

        def point(x):
            return (forward_kinematics(model, x).links[link] @ np.append(local, 1.0))[:3]

        x_p = point(q)
        J_r = rmp.repulsor_jacobian(x_p, x_obs, point_jacobian(model, q, SurfacePoint(x_p, link, 0)))
        J_fd = central_jacobian(lambda x: np.sum((point(x) - x_obs) ** 2), q)[0]
        assert np.abs(J_r - J_fd).max() <= 1e-5 * max(1.0, np.abs(J_fd).max())


def test_combine_examples(rng):
    f = rng.normal(size=7)
    A = rng.normal(size=(7, 7))
    M = A @ A.T + np.eye(7)
    assert np.allclose(rmp.combine([JointSpaceRmp(f, M)]), f, atol=1e-10)
    f1, f2 = rng.normal(size=(2, 7))
    assert np.allclose(rmp.combine([JointSpaceRmp(f1, np.eye(7)), JointSpaceRmp(f2, np.eye(7))]), (f1 + f2) / 2, atol=1e-14)
    g = rmp.attractor(np.zeros(7), np.zeros(7), f, P)
    assert np.allclose(rmp.combine([g, rmp.pullback(1.0, 0.0, np.ones(7))]), g.f, atol=1e-14)
    assert not np.any(rmp.combine([JointSpaceRmp(f, np.zeros((7, 7)))]))
    with pytest.raises(RejectedInput):
        rmp.combine([])


@pytest.mark.parametrize("c", [0.1, 10.0])
def test_combine_scale_invariant(rng, c):
    g = rmp.attractor(rng.normal(size=7), rng.normal(size=7), rng.normal(size=7), P)
    r = rmp.pullback(2.0, 3.0, rng.normal(size=7))
    a = rmp.combine([g, r])
    b = rmp.combine([JointSpaceRmp(g.f, c * g.M), JointSpaceRmp(r.f, c * r.M)])
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_euler_rest_is_fixed_point():
    q = np.linspace(0, 1, 7)
    q2, v2 = rmp.euler_integrate(q, np.zeros(7), np.zeros(7), P)
    assert np.array_equal(q2, q) and not np.any(v2)


def test_euler_single_step_expansion(rng):
    q, v, a = rng.normal(size=(3, 7))
    p = P.with_overrides(n_int=1, dt_int=0.01)
    q2, v2 = rmp.euler_integrate(q, v, a, p)
    assert np.allclose(q2, q + (v + a * 0.01) * 0.01, atol=1e-15)
    assert np.allclose(v2, v + a * 0.01, atol=1e-15)


def test_euler_sub_stepping_matches_recurrence(rng):
    q, v, a = rng.normal(size=(3, 7))
    fine = rmp.euler_integrate(q, v, a, P.with_overrides(n_int=10, dt_int=0.01))
    coarse = rmp.euler_integrate(q, v, a, P.with_overrides(n_int=1, dt_int=0.1))
    assert np.allclose(fine[0], semi_implicit_euler(q, v, a, 10, 0.01)[0], atol=1e-13)
    assert np.allclose(coarse[0], semi_implicit_euler(q, v, a, 1, 0.1)[0], atol=1e-13)
    assert np.allclose(fine[1], coarse[1], atol=1e-13)
    assert not np.allclose(fine[0], coarse[0])
