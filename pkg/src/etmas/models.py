"""Plant, reference, controller and observer models, and the shipped scenarios.

A tracking scenario is described by a :class:`PlantModel`; the composed
error-coordinate flow maps (tracking error ``eta = x_p - x_rf``, reference
state, controller state, and the network-induced errors) are assembled by
:func:`compose_tracking_flow`.  Distributed observers are described by an
:class:`ObserverModel` and assembled by :func:`compose_observer_flow`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, MissingJacobian
from .etm import CertificateParams, LyapunovData
from .hybrid import FlowField
from .protocols import NodePartition, ProtocolKind, rr_storage

FD_STEP = 1e-6


# ---------------------------------------------------------------------------
# graph checks
# ---------------------------------------------------------------------------
def validate_adjacency(adj, name: str = "adjacency") -> np.ndarray:
    """Check that ``adj`` is a symmetric 0/1 matrix with zero diagonal and a connected graph."""
    a = np.asarray(adj, float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"{name} must be a square matrix")
    if not np.all((a == 0) | (a == 1)):
        raise ConfigError(f"{name} entries must be 0 or 1")
    if np.any(np.diag(a) != 0):
        raise ConfigError(f"{name} must have a zero diagonal")
    if not np.array_equal(a, a.T):
        raise ConfigError(f"{name} must be symmetric (undirected graph)")
    n = a.shape[0]
    seen, stack = {0}, [0]
    while stack:
        v = stack.pop()
        for w in np.flatnonzero(a[v]):
            if int(w) not in seen:
                seen.add(int(w))
                stack.append(int(w))
    if len(seen) != n:
        raise ConfigError(f"{name} graph is not connected")
    return a


def detectable(C, A, tol: float = 1e-9) -> bool:
    """Popov-Belevitch-Hautus test: every mode with ``Re >= 0`` is observable through ``C``."""
    A = np.atleast_2d(np.asarray(A, float))
    C = np.atleast_2d(np.asarray(C, float))
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real >= -tol:
            M = np.vstack([A - lam * np.eye(n), C])
            if np.linalg.matrix_rank(M, tol=1e-8) < n:
                return False
    return True


# ---------------------------------------------------------------------------
# tracking models
# ---------------------------------------------------------------------------
def _directional(fn, jac, x, v, analytic: bool, what: str):
    """Directional derivative ``D fn(x) . v`` (analytic Jacobian or central differences)."""
    if analytic:
        if jac is None:
            raise MissingJacobian(f"analytic derivatives requested but no Jacobian of {what}")
        return np.asarray(jac(x), float) @ v
    v = np.asarray(v, float)
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    h = FD_STEP / scale
    return (np.asarray(fn(x + h * v), float) - np.asarray(fn(x - h * v), float)) / (2 * h)


@dataclass(frozen=True)
class PlantModel:
    """Agent, reference, controller and feedforward maps of a tracking scenario.

    * ``f_p(x, u, w)`` - stacked agent dynamics (the reference obeys the same
      map driven by the feedforward ``u_f``);
    * ``g_p(x)`` - output map;
    * ``f_c(x_ct, y_hat_p, y_hat_rf)`` / ``g_c(x_ct, y_hat_p, y_hat_rf)`` -
      controller acting on the held (received) outputs;
    * ``u_f(delta)`` - feedforward input as a function of the network clocks.
    """

    f_p: Callable
    g_p: Callable
    g_c: Callable
    u_f: Callable
    n_p: int
    n_y: int
    n_u: int
    n_ct: int = 0
    f_c: Optional[Callable] = None
    u_f_dot: Optional[Callable] = None
    jac_g_p: Optional[Callable] = None
    jac_g_c: Optional[Callable] = None
    adjacency_p: Optional[np.ndarray] = None
    adjacency_rf: Optional[np.ndarray] = None
    split_w: Optional[Callable] = None  # w -> (w_p, w_rf)

    def __post_init__(self):
        for name in ("adjacency_p", "adjacency_rf"):
            adj = getattr(self, name)
            if adj is not None:
                object.__setattr__(self, name, validate_adjacency(adj, name))


@dataclass(frozen=True)
class ComposedFlow:
    """Flow maps in error coordinates.

    All maps share the signature ``(delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w)``
    where ``e_ax = (e_eta, e_ct)`` and ``e_eta = e_p - e_rf``.
    """

    F_eta: Callable
    F_rf: Callable
    F_ct: Callable
    G_ax: Callable
    G_rf: Callable
    G_f: Callable
    model: PlantModel


def compose_tracking_flow(model: PlantModel, analytic: bool = False) -> ComposedFlow:
    """Assemble the error-coordinate flow maps of a :class:`PlantModel`.

    Output derivatives use the supplied Jacobians when ``analytic`` is true
    (raising :class:`MissingJacobian` if absent) and central finite
    differences otherwise.  The reference receives the feedforward directly;
    the agents receive ``u_ct + e_ct + u_f + e_f``.
    """
    mp = model
    n_y = mp.n_y

    def split(w):
        if mp.split_w is not None:
            return mp.split_w(w)
        return w, w

    last = [None, None]  # one-slot memo: F_* / G_* share the same argument tuple

    def pieces(*args):
        prev = last[0]
        if prev is not None and all(a is b for a, b in zip(args, prev)):
            return last[1]
        out = _pieces(*args)
        last[0], last[1] = args, out
        return out

    def _pieces(delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w):
        e_eta, e_ct = e_ax[:n_y], e_ax[n_y:]
        x_p = eta + x_rf
        y_rf_hat = np.asarray(mp.g_p(x_rf), float) + e_rf
        y_p_hat = np.asarray(mp.g_p(x_p), float) + e_eta + e_rf
        u_f = np.asarray(mp.u_f(delta), float)
        u_hat = np.asarray(mp.g_c(x_ct, y_p_hat, y_rf_hat), float) + e_ct + u_f + e_f
        w_p, w_rf = split(w)
        xdot_p = np.asarray(mp.f_p(x_p, u_hat, w_p), float)
        xdot_rf = np.asarray(mp.f_p(x_rf, u_f, w_rf), float)
        xdot_ct = (np.asarray(mp.f_c(x_ct, y_p_hat, y_rf_hat), float)
                   if mp.f_c is not None else np.zeros(mp.n_ct))
        return x_p, xdot_p, xdot_rf, xdot_ct, y_p_hat, y_rf_hat

    def F_eta(*args):
        _, xdot_p, xdot_rf, *_ = pieces(*args)
        return xdot_p - xdot_rf

    def F_rf(*args):
        return pieces(*args)[2]

    def F_ct(*args):
        return pieces(*args)[3]

    def G_ax(delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w):
        x_p, xdot_p, xdot_rf, xdot_ct, y_p_hat, y_rf_hat = pieces(
            delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w)
        ydot_p = _directional(mp.g_p, mp.jac_g_p, x_p, xdot_p, analytic, "g_p")
        ydot_rf = _directional(mp.g_p, mp.jac_g_p, x_rf, xdot_rf, analytic, "g_p")
        if mp.n_ct:
            def gc_of(xc):
                return mp.g_c(xc, y_p_hat, y_rf_hat)
            jac_c = (None if mp.jac_g_c is None
                     else (lambda xc: mp.jac_g_c(xc, y_p_hat, y_rf_hat)))
            udot_ct = _directional(gc_of, jac_c, x_ct, xdot_ct, analytic, "g_c")
        else:
            udot_ct = np.zeros(mp.n_u)
        # held values are constant, so each error decreases at the signal's rate
        return np.concatenate((-(ydot_p - ydot_rf), -udot_ct))

    def G_rf(delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w):
        xdot_rf = pieces(delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w)[2]
        return -_directional(mp.g_p, mp.jac_g_p, x_rf, xdot_rf, analytic, "g_p")

    def G_f(delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w):
        if mp.u_f_dot is not None:
            return -np.asarray(mp.u_f_dot(delta), float)
        d = np.asarray(delta, float)
        return -(np.asarray(mp.u_f(d + FD_STEP), float)
                 - np.asarray(mp.u_f(d - FD_STEP), float)) / (2 * FD_STEP)

    return ComposedFlow(F_eta=F_eta, F_rf=F_rf, F_ct=F_ct, G_ax=G_ax, G_rf=G_rf, G_f=G_f,
                        model=model)


@dataclass(frozen=True)
class ErrorLayout:
    """Map between the network-major error vector and the canonical ``(e_ax, e_rf, e_f)`` stack.

    ``perm[k]`` is the canonical position of network-major entry ``k``.
    """

    perm: np.ndarray

    def to_canonical(self, e):
        out = np.empty_like(np.asarray(e, float))
        out[self.perm] = e
        return out

    def from_canonical(self, c):
        return np.asarray(c, float)[self.perm]


def tracking_field(flow: ComposedFlow, layout: ErrorLayout, e_f_active: bool = True) -> FlowField:
    """Wrap a :class:`ComposedFlow` as a :class:`FlowField` on ``x = (eta, x_rf, x_ct)``.

    When ``e_f_active`` is false the feedforward channel is not networked:
    ``e_f`` is identically zero and absent from the error vector.
    """
    mp = flow.model
    n_p, n_ct, n_y, n_u = mp.n_p, mp.n_ct, mp.n_y, mp.n_u
    n_ax = n_y + n_u

    def unpack(x, e):
        c = layout.to_canonical(e)
        e_ax, e_rf = c[:n_ax], c[n_ax:n_ax + n_y]
        e_f = c[n_ax + n_y:] if e_f_active else np.zeros(n_u)
        return x[:n_p], x[n_p:2 * n_p], x[2 * n_p:2 * n_p + n_ct], e_ax, e_rf, e_f

    def f(delta, x, e, w):
        eta, x_rf, x_ct, e_ax, e_rf, e_f = unpack(x, e)
        args = (delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w)
        return np.concatenate((flow.F_eta(*args), flow.F_rf(*args), flow.F_ct(*args)))

    def g(delta, x, e, w):
        eta, x_rf, x_ct, e_ax, e_rf, e_f = unpack(x, e)
        args = (delta, eta, x_rf, x_ct, e_ax, e_rf, e_f, w)
        parts = [flow.G_ax(*args), flow.G_rf(*args)]
        if e_f_active:
            parts.append(flow.G_f(*args))
        return layout.from_canonical(np.concatenate(parts))

    return FlowField(f=f, g=g)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Channel:
    """Model-side description of one network.

    ``trigger`` holds the storage used inside the trigger (``W`` and
    ``phi_fn``) and ``signal(x, e)`` extracts the argument of ``phi_fn``.
    ``storage`` is the error storage ``W(e, m, kappa, b)`` used by the
    Lyapunov monitor.  ``phi0`` gives ``(phi_0(0), phi_1(0))`` or ``None``
    for the largest admissible value.
    """

    name: str
    params: CertificateParams
    trigger: LyapunovData
    signal: Callable
    storage: Callable
    phi0: Optional[tuple] = None


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate and certify one case study."""

    name: str
    field: FlowField
    x0: np.ndarray
    e0: np.ndarray
    channels: tuple
    nets: tuple
    horizon: float
    step: float
    V: Optional[Callable] = None
    x_names: tuple = ()
    e_names: tuple = ()
    eta_groups: tuple = ()
    eax_index: tuple = ()
    disturbance: Optional[Callable] = None
    meta: dict = field(default_factory=dict)


def _effective(e, m, b):
    """Error seen by the storage function: after a fired sampling the pending update is included."""
    return e + m if b else e


# ---- robot arms ------------------------------------------------------------
@dataclass(frozen=True)
class RobotArmParams:
    a: tuple = (9.81 * 0.2, 9.81 * 0.3)
    c: tuple = (2.0, 4.0)
    b: tuple = ((0.1, 0.1), (0.1, 0.1))
    omega_f: float = 5.0


def robot_arm_model(prm: RobotArmParams) -> PlantModel:
    """Two coupled single-link arms with a feedback-linearising tracking controller.

    State ``(q11, q12, q21, q22)`` (angle and velocity of each arm); the
    controller uses the received arm and reference outputs and the
    feedforward is ``u_f^i = c_i sin(omega_f delta_i)``.
    """
    a = np.asarray(prm.a, float)
    c = np.asarray(prm.c, float)
    bm = np.asarray(prm.b, float)
    w_f = float(prm.omega_f)

    def f_p(x, u, w):
        q = x.reshape(2, 2)
        diff = q[0] - q[1]  # (q^{11} - q^{21}, q^{12} - q^{22})
        out = np.empty(4)
        for i in range(2):
            out[2 * i] = q[i, 1]
            out[2 * i + 1] = -a[i] * math.sin(q[i, 0]) + bm[i] @ diff + c[i] * u[i]
        return out

    def g_p(x):
        return x

    def g_c(x_ct, yp, yrf):
        u = np.empty(2)
        for i in range(2):
            d1 = yp[2 * i] - yrf[2 * i]
            d2 = yp[2 * i + 1] - yrf[2 * i + 1]
            u[i] = (a[i] * (math.sin(yp[2 * i]) - math.sin(yrf[2 * i])) - d1 - d2) / c[i]
        return u

    def u_f(delta):
        d = np.broadcast_to(np.asarray(delta, float), (2,))
        return c * np.sin(w_f * d)

    def u_f_dot(delta):
        d = np.broadcast_to(np.asarray(delta, float), (2,))
        return c * w_f * np.cos(w_f * d)

    return PlantModel(f_p=f_p, g_p=g_p, g_c=g_c, u_f=u_f, u_f_dot=u_f_dot, n_p=4, n_y=4,
                      n_u=2, jac_g_p=lambda x: np.eye(4),
                      adjacency_p=np.array([[0, 1], [1, 0]]),
                      adjacency_rf=np.array([[0, 1], [1, 0]]))


def robot_arm_layout() -> ErrorLayout:
    """Network ``i`` carries nodes ``(q^{i1}), (q^{i2}), (u^i)``.

    Each of the first two nodes holds the plant/reference pair
    ``(e_eta^{ik}, e_rf^{ik})``; the third holds ``e_ct^i``.  Canonical
    order is ``(e_eta[4], e_ct[2], e_rf[4])``.
    """
    perm = []
    for i in range(2):
        perm += [2 * i, 6 + 2 * i, 2 * i + 1, 6 + 2 * i + 1, 4 + i]
    return ErrorLayout(np.array(perm))


ROBOT_PARTITION = NodePartition((2, 2, 1))
# positions inside a robot network vector
_ROBOT_ETA_ERR = np.array([0, 2])        # e_eta^{i1}, e_eta^{i2}
_ROBOT_TRIGGER = np.array([0, 1, 2, 3])  # (e_eta, e_rf)
_ROBOT_EAX = np.array([0, 2, 4])         # (e_eta, e_ct)


def robot_V(weights) -> Callable:
    """Quadratic ``V(eta) = sum_i w1 eta_i1^2 + w2 eta_i1 eta_i2 + w3 eta_i2^2``."""
    w = np.asarray(weights, float).reshape(2, 3)

    def V(x):
        total = 0.0
        for i in range(2):
            e1, e2 = x[2 * i], x[2 * i + 1]
            total += w[i, 0] * e1 * e1 + w[i, 1] * e1 * e2 + w[i, 2] * e2 * e2
        return total
    return V


def robot_arm_scenario(protocols: Sequence[ProtocolKind], params: Sequence[CertificateParams],
                       nets: Sequence, prm: RobotArmParams = RobotArmParams(),
                       q_p0=(0.5, 0.0, -0.5, 0.0), q_rf0=(0.0, 0.0, 0.0, 0.0),
                       phi0: Sequence = (None, None), v_weights=((8, 12, 6), (5, 7, 9)),
                       orders: Sequence = (None, None), horizon: float = 10.0,
                       step: float = 1e-4, name: str = "robot-arms", meta=None) -> Scenario:
    """Two-arm tracking scenario with one network per arm.

    The trigger of network ``i`` is ``gamma_i |(e_eta^i, e_rf^i)|^2 -
    rho_i lbar_i |eta_i|^2``; the feedforward is applied directly (no
    ``e_f`` channel).  Errors start at zero (fresh measurements at ``t = 0``).
    """
    model = robot_arm_model(prm)
    layout = robot_arm_layout()
    fld = tracking_field(compose_tracking_flow(model, analytic=True), layout, e_f_active=False)
    q_p0 = np.asarray(q_p0, float)
    q_rf0 = np.asarray(q_rf0, float)
    x0 = np.concatenate((q_p0 - q_rf0, q_rf0))
    channels = []
    for i in range(2):
        kind = ProtocolKind.parse(protocols[i])
        order = orders[i]

        def trig_W(e, m, kappa, b):
            return float(np.linalg.norm(_effective(e, m, b)[_ROBOT_TRIGGER]))

        if kind is ProtocolKind.ROUND_ROBIN:
            def storage(e, m, kappa, b, _order=order):
                return rr_storage(kappa, _effective(e, m, b), ROBOT_PARTITION, _order)
        else:
            def storage(e, m, kappa, b):
                return float(np.linalg.norm(_effective(e, m, b)[_ROBOT_EAX]))

        def signal(x, e, _i=i):
            return x[2 * _i:2 * _i + 2]

        channels.append(Channel(
            name=f"net{i + 1}", params=params[i],
            trigger=LyapunovData(W=trig_W, phi_fn=lambda z: float(z @ z)),
            signal=signal, storage=storage,
            phi0=None if phi0[i] is None else tuple(phi0[i])))
    x_names = ("eta11", "eta12", "eta21", "eta22", "q11_rf", "q12_rf", "q21_rf", "q22_rf")
    e_names = tuple(f"{lbl}_{i + 1}" for i in range(2)
                    for lbl in ("e_eta1", "e_rf1", "e_eta2", "e_rf2", "e_ct"))
    return Scenario(name=name, field=fld, x0=x0, e0=np.zeros(10), channels=tuple(channels),
                    nets=tuple(nets), horizon=horizon, step=step, V=robot_V(v_weights),
                    x_names=x_names, e_names=e_names, eta_groups=((0, 1), (2, 3)),
                    eax_index=tuple(int(5 * i + k) for i in range(2) for k in _ROBOT_EAX),
                    meta=dict(meta or {}))


# ---- distributed observers -------------------------------------------------
@dataclass(frozen=True)
class ObserverModel:
    """Distributed observers ``x_ob^i' = A x_ob^i + theta_i`` with event-updated ``theta_i``.

    At a transmission ``theta_i`` is set to ``Theta_i = J_i (y_ob^i - y_p^i)
    + sum_k [J_ik (y_ob^k - y_p^k) + chi_i (x_ob^i - x_ob^k)]`` over the
    neighbours ``k``.  The decoupled variant keeps only the own-output term.
    """

    A: np.ndarray
    B: np.ndarray
    C: tuple
    J: tuple
    J_nb: dict
    chi: tuple
    adjacency: np.ndarray
    coupled: bool = True

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "A", np.asarray(self.A, float))
        set_(self, "B", np.asarray(self.B, float))
        set_(self, "C", tuple(np.atleast_1d(np.asarray(c, float)) for c in self.C))
        set_(self, "J", tuple(np.atleast_1d(np.asarray(j, float)) for j in self.J))
        set_(self, "J_nb", {tuple(k): np.atleast_1d(np.asarray(v, float))
                            for k, v in dict(self.J_nb).items()})
        adj = np.asarray(self.adjacency, float)
        if self.coupled:
            adj = validate_adjacency(adj, "observer adjacency")
        set_(self, "adjacency", adj)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return len(self.C)

    def neighbours(self, i: int) -> list:
        if not self.coupled:
            return []
        return [int(k) for k in np.flatnonzero(self.adjacency[i])]


@dataclass(frozen=True)
class ObserverFlow:
    """Observer flow in ``x = (eta_1, ..., eta_N, x_p)`` with ``e_i = theta_i - Theta_i(x) = -psi_i``."""

    K: tuple           # Theta_i(x) = K[i] @ x
    field: FlowField
    model: ObserverModel

    def theta(self, i: int, x) -> np.ndarray:
        return self.K[i] @ np.asarray(x, float)

    def psi(self, i: int, x, e) -> np.ndarray:
        n = self.model.n
        return -np.asarray(e, float)[i * n:(i + 1) * n]

    def G_psi(self, i: int, x, e, w) -> np.ndarray:
        """Rate of ``psi_i`` along the flow: the derivative of ``Theta_i`` (theta is held)."""
        dx = self.field.f(None, np.asarray(x, float), np.asarray(e, float), w)
        return self.K[i] @ dx


def compose_observer_flow(model: ObserverModel) -> ObserverFlow:
    """Assemble the linear observer flow and the per-observer innovation maps."""
    n, N = model.n, model.N
    dim = n * (N + 1)
    K = []
    for i in range(N):
        Ki = np.zeros((n, dim))
        Ki[:, i * n:(i + 1) * n] += np.outer(model.J[i], model.C[i])
        for k in model.neighbours(i):
            Ki[:, k * n:(k + 1) * n] += np.outer(model.J_nb[(i, k)], model.C[k])
            Ki[:, i * n:(i + 1) * n] += model.chi[i] * np.eye(n)
            Ki[:, k * n:(k + 1) * n] -= model.chi[i] * np.eye(n)
        K.append(Ki)
    # linear part: d/dt eta_i = A eta_i + Theta_i(x) + e_i - B w ; d/dt x_p = A x_p + B w
    Mx = np.zeros((dim, dim))
    Me = np.zeros((dim, n * N))
    for i in range(N):
        Mx[i * n:(i + 1) * n, i * n:(i + 1) * n] += model.A
        Mx[i * n:(i + 1) * n] += K[i]
        Me[i * n:(i + 1) * n, i * n:(i + 1) * n] = np.eye(n)
    Mx[N * n:, N * n:] = model.A
    Kall = np.vstack(K)
    Bw = np.zeros((dim, model.B.shape[1]))
    for i in range(N):
        Bw[i * n:(i + 1) * n] = -model.B
    Bw[N * n:] = model.B
    Mx.setflags(write=False)
    Me.setflags(write=False)

    def f(delta, x, e, w):
        out = Mx @ x + Me @ e
        if w is not None and np.size(w):
            out = out + Bw @ w
        return out

    def g(delta, x, e, w):
        return -(Kall @ f(delta, x, e, w))

    return ObserverFlow(K=tuple(K), field=FlowField(f=f, g=g), model=model)


def observer_scenario(model: ObserverModel, params: Sequence[CertificateParams], nets: Sequence,
                      x_p0, x_ob0: Sequence, theta0: Sequence, storage_scale: float = 0.5,
                      horizon: float = 100.0, step: float = 1e-3, name: str = "observers",
                      meta=None) -> Scenario:
    """Observer scenario: one single-node network per observer.

    Trigger ``gamma_i |psi_i|^2 - rho_i lbar_i storage_scale |C_i eta_i|^2``;
    ``V = sum_i eta_i^T eta_i``.
    """
    flow = compose_observer_flow(model)
    n, N = model.n, model.N
    x_p0 = np.asarray(x_p0, float)
    x0 = np.concatenate([np.asarray(x_ob0[i], float) - x_p0 for i in range(N)] + [x_p0])
    e0 = np.concatenate([np.asarray(theta0[i], float) - flow.theta(i, x0) for i in range(N)])
    channels = []
    for i in range(N):
        def W(e, m, kappa, b):
            return float(np.linalg.norm(_effective(e, m, b)))

        def signal(x, e, _i=i):
            return np.atleast_1d(model.C[_i] @ x[_i * n:(_i + 1) * n])

        channels.append(Channel(
            name=f"net{i + 1}", params=params[i],
            trigger=LyapunovData(W=W, phi_fn=lambda z: storage_scale * float(z @ z)),
            signal=signal, storage=W))

    def V(x):
        eta = x[:n * N]
        return float(eta @ eta)

    x_names = tuple(f"eta{i + 1}_{k + 1}" for i in range(N) for k in range(n))
    x_names += tuple(f"x_p{k + 1}" for k in range(n))
    e_names = tuple(f"e{i + 1}_{k + 1}" for i in range(N) for k in range(n))
    return Scenario(name=name, field=flow.field, x0=x0, e0=e0, channels=tuple(channels),
                    nets=tuple(nets), horizon=horizon, step=step, V=V, x_names=x_names,
                    e_names=e_names,
                    eta_groups=tuple(tuple(range(i * n, (i + 1) * n)) for i in range(N)),
                    eax_index=tuple(range(n * N)),
                    meta=dict(meta or {}, observer_flow=flow))
