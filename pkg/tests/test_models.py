import math

import numpy as np
import pytest

from conftest import build
from etmas.errors import ConfigError, MissingJacobian
from etmas.etm import rho_bar
from etmas.hybrid import HybridState, integrate_flow, FlowField
from etmas.models import (ObserverModel, PlantModel, RobotArmParams, compose_observer_flow,
                          compose_tracking_flow, detectable, robot_arm_model,
                          validate_adjacency)

RNG = np.random.default_rng(2024)
PRM = RobotArmParams()


# -- graphs / observability ----------------------------------------------------
@pytest.mark.parametrize("adj", [
    [[0, 1], [0, 0]],                          # directed
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],         # disconnected
    [[1, 1], [1, 0]],                          # self loop
    [[0, 2], [2, 0]],                          # weighted
])
def test_adjacency_rejected(adj):
    with pytest.raises(ConfigError):
        validate_adjacency(adj)


def test_adjacency_accepted_and_checked_on_plant_models():
    validate_adjacency([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    with pytest.raises(ConfigError):
        PlantModel(f_p=None, g_p=None, g_c=None, u_f=None, n_p=1, n_y=1, n_u=1,
                   adjacency_p=[[0, 1], [0, 0]])


def test_observer_pairs_not_detectable(golden):
    m = golden["observers-coupled"]["model"]
    A = np.array(m["A"])
    assert not detectable([m["C"][0]], A)
    assert not detectable([m["C"][1]], A)
    assert detectable(m["C"], A)


# -- tracking flow ---------------------------------------------------------------
def robot_args(rng):
    return dict(delta=rng.uniform(0, 10, 2), eta=rng.normal(size=4), x_rf=rng.normal(size=4),
                x_ct=np.zeros(0), e_ax=rng.normal(size=6) * 0.3, e_rf=rng.normal(size=4) * 0.3,
                e_f=rng.normal(size=2) * 0.3, w=np.zeros(0))


def hand_F_eta(delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w):
    """Hand-expanded robot-arm tracking-error flow (independent oracle)."""
    a = [9.81 * 0.2, 9.81 * 0.3]
    c = [2.0, 4.0]
    b = [[0.1, 0.1], [0.1, 0.1]]
    e_eta, e_ct = e_ax[:4], e_ax[4:]
    out = []
    for i in range(2):
        n1, n2 = eta[2 * i], eta[2 * i + 1]
        q = x_rf[2 * i]
        ee1, ee2 = e_eta[2 * i], e_eta[2 * i + 1]
        er1 = e_rf[2 * i]
        coup = sum(b[i][j] * (eta[j] - eta[2 + j]) for j in range(2))
        out += [n2,
                -a[i] * (math.sin(n1 + q) - math.sin(q) - math.sin(n1 + q + ee1 + er1)
                         + math.sin(q + er1))
                - (n1 + ee1) - (n2 + ee2) + coup + c[i] * e_f[i] + c[i] * e_ct[i]]
    return np.array(out)


def test_robot_F_eta_matches_hand_expansion():
    flow = compose_tracking_flow(robot_arm_model(PRM), analytic=True)
    for _ in range(200):
        args = robot_args(RNG)
        got = flow.F_eta(*args.values())
        assert np.allclose(got, hand_F_eta(*args.values()), rtol=0, atol=1e-9)


def test_perfect_tracking_is_invariant():
    flow = compose_tracking_flow(robot_arm_model(PRM), analytic=True)
    z = np.zeros
    args = (np.array([0.3, 0.3]), z(4), RNG.normal(size=4), z(0), z(6), z(4), z(2), z(0))
    assert np.all(flow.F_eta(*args) == 0.0)


def test_G_rf_and_G_f_consistency_by_finite_differences():
    model = robot_arm_model(PRM)
    flow = compose_tracking_flow(model, analytic=True)
    h = 1e-6
    for _ in range(1000):
        args = robot_args(RNG)
        vals = list(args.values())
        v = flow.F_rf(*vals)
        x_rf = args["x_rf"]
        fd = (model.g_p(x_rf + h * v) - model.g_p(x_rf - h * v)) / (2 * h)
        assert np.allclose(flow.G_rf(*vals), -fd, rtol=1e-5, atol=1e-7)
        d = args["delta"]
        fd_f = (model.u_f(d + h) - model.u_f(d - h)) / (2 * h)
        assert np.allclose(flow.G_f(*vals), -fd_f, rtol=1e-5, atol=1e-7)


def test_finite_difference_mode_matches_analytic():
    model = robot_arm_model(PRM)
    fa, ff = (compose_tracking_flow(model, analytic=a) for a in (True, False))
    for _ in range(50):
        vals = list(robot_args(RNG).values())
        assert np.allclose(fa.G_ax(*vals), ff.G_ax(*vals), rtol=1e-6, atol=1e-7)


def linear_plant(with_jacobian=True):
    A = np.array([[0.0, 1.0], [-2.0, -0.5]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.3]])
    K = np.array([[-1.5]])
    return PlantModel(f_p=lambda x, u, w: A @ x + B @ u, g_p=lambda x: C @ x,
                      g_c=lambda xc, yp, yrf: K @ (yp - yrf),
                      u_f=lambda d: np.array([math.sin(float(np.atleast_1d(d)[0]))]),
                      n_p=2, n_y=1, n_u=1, jac_g_p=(lambda x: C) if with_jacobian else None)


def test_linear_plant_flow_is_linear_in_eta_and_errors():
    flow = compose_tracking_flow(linear_plant())
    x_rf, d = RNG.normal(size=2), np.array([0.4])
    for _ in range(50):
        a_eta, b_eta = RNG.normal(size=2), RNG.normal(size=2)
        a_e, b_e = RNG.normal(size=2), RNG.normal(size=2)
        a_f, b_f = RNG.normal(size=1), RNG.normal(size=1)
        z1 = np.zeros(1)

        def F(eta, e_ax, e_f):
            return flow.F_eta(d, eta, x_rf, np.zeros(0), e_ax, z1, e_f, None)
        lhs = F(a_eta + b_eta, a_e + b_e, a_f + b_f)
        rhs = F(a_eta, a_e, a_f) + F(b_eta, b_e, b_f)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_missing_jacobian():
    flow = compose_tracking_flow(linear_plant(with_jacobian=False), analytic=True)
    z = np.zeros
    with pytest.raises(MissingJacobian):
        flow.G_rf(z(1), z(2), z(2), z(0), z(2), z(1), z(1), None)


# -- robot-arm scenario -----------------------------------------------------------
def test_robot_constants(golden):
    _, scen, _ = build("robot-arms-rr")
    assert scen.channels[0].params.gamma0 == 22.9436
    assert scen.channels[0].params.lam == pytest.approx(math.sqrt(2 / 3))
    _, scen, _ = build("robot-arms-tod")
    assert scen.channels[0].params.L0 == 5.1303


def test_lipschitz_constants_follow_M_and_D(golden):
    # L_i0 = M_i D_i, D_i = sqrt(3) max(1 + a_i, c_i), M_i = sqrt(ell) (RR) or 1 (TOD)
    for i, (a, c) in enumerate(zip(PRM.a, PRM.c)):
        D = math.sqrt(3) * max(1 + a, c)
        net = f"net{i + 1}"
        assert round(D, 4) == golden["robot-arms-tod"][net]["L0"]
        assert round(math.sqrt(3) * D, 4) == pytest.approx(golden["robot-arms-rr"][net]["L0"],
                                                           abs=1e-4)


def test_robot_scenario_wiring():
    _, scen, nets = build("robot-arms-mixed")
    assert [n.protocol.value for n in nets] == ["rr", "tod"]
    assert nets[0].order == (1, 2, 3)
    assert scen.e0.shape == (10,) and scen.x0.shape == (8,)
    assert [n.partition.sizes for n in nets] == [(2, 2, 1), (2, 2, 1)]


# -- observers --------------------------------------------------------------------------
def test_observer_rho_bar(golden):
    for net in ("net1", "net2"):
        g = golden["observers-coupled"][net]
        assert round(rho_bar(0.0, g["gamma0"]), 4) == g["published"]["rho_bar"]


def test_zero_innovation_gives_zero_update():
    _, scen, _ = build("observers-coupled")
    flow = scen.meta["observer_flow"]
    x = np.concatenate([np.zeros(6), RNG.normal(size=3)])
    for i in range(2):
        assert np.all(flow.theta(i, x) == 0.0)


@pytest.mark.parametrize("name", ["observers-coupled", "observers-decoupled"])
def test_G_psi_matches_finite_difference(name):
    _, scen, _ = build(name)
    flow = scen.meta["observer_flow"]
    h = 1e-6
    for _ in range(100):
        x, e = RNG.normal(size=9), RNG.normal(size=6)
        dx = flow.field.f(None, x, e, None)
        for i in range(2):
            fd = (flow.theta(i, x + h * dx) - flow.theta(i, x - h * dx)) / (2 * h)
            assert np.allclose(flow.G_psi(i, x, e, None), fd, rtol=1e-5, atol=1e-8)
            # e_i = theta_i - Theta_i(x) with theta_i held: de_i/dt = -dTheta_i/dt
            assert np.allclose(flow.field.g(None, x, e, None)[3 * i:3 * i + 3], -fd,
                               rtol=1e-5, atol=1e-8)


def test_equilibrium_flows_vanish():
    for name in ("observers-coupled", "observers-decoupled"):
        _, scen, _ = build(name)
        z = np.zeros(9)
        assert np.all(scen.field.f(None, z, np.zeros(6), None) == 0)
        assert np.all(scen.field.g(None, z, np.zeros(6), None) == 0)


def test_decoupled_variant_has_no_cross_terms():
    _, scen, _ = build("observers-decoupled", sets=["model.adjacency=[[0, 0], [0, 0]]"])
    K = scen.meta["observer_flow"].K
    assert np.all(K[0][:, 3:] == 0) and np.all(K[1][:, :3] == 0)
    assert np.any(K[1][:, 3:6] != 0)


def test_coupled_variant_requires_connected_graph():
    with pytest.raises(ConfigError):
        build("observers-coupled", sets=["model.adjacency=[[0, 0], [0, 0]]"])


def test_network_free_observers_converge_by_t60(golden):
    """Closed loop without network (e = 0): |eta_i| below 1e-3 by t = 60."""
    _, scen, _ = build("observers-coupled")
    f = scen.field.f
    field = FlowField(f=f, g=lambda d, x, e, w: np.zeros_like(e))
    s = HybridState.initial(scen.x0, np.zeros(6), [slice(0, 3), slice(3, 6)])
    out = integrate_flow(s, field, 60.0, step=1e-2)
    eta = [np.linalg.norm(out.x[0:3]), np.linalg.norm(out.x[3:6])]
    assert max(eta) < 1e-3, f"|eta_i(60)| = {eta}"
