"""Hybrid state, hybrid time and the fixed-step flow integrator.

A hybrid solution is indexed by pairs ``(t, j)``: flows advance ``t`` with
``j`` fixed and jumps advance ``j`` with ``t`` fixed.  The state
``(x, e, m, delta, tau, kappa, b)`` is partitioned per network; nothing in
this module knows about triggers or protocols.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

from .errors import DimensionMismatch, NonFiniteState

DEFAULT_STEP = 1e-4

Disturbance = Callable[[float], np.ndarray]


@dataclass(frozen=True, order=True)
class HybridTime:
    """A point ``(t, j)`` of a hybrid time domain (ordered lexicographically)."""

    t: float = 0.0
    j: int = 0

    def __post_init__(self):
        if self.t < 0 or self.j < 0:
            raise ValueError(f"hybrid time must be nonnegative, got {self!r}")

    def flow_to(self, t: float) -> "HybridTime":
        return HybridTime(t, self.j)

    def jump(self) -> "HybridTime":
        return HybridTime(self.t, self.j + 1)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HybridState:
    """Full hybrid state, immutable after construction.

    ``parts`` lists, for every network, the slice of ``e`` and ``m`` owned by
    that network.  ``fired`` records whether the most recent sampling of each
    network triggered a transmission; it gates the update at the matching
    arrival.
    """

    x: np.ndarray
    e: np.ndarray
    m: np.ndarray
    delta: np.ndarray
    tau: np.ndarray
    kappa: np.ndarray
    b: np.ndarray
    parts: tuple
    fired: np.ndarray = None
    time: HybridTime = field(default_factory=HybridTime)

    def __post_init__(self):
        n = len(self.parts)
        set_ = object.__setattr__
        set_(self, "x", _frozen(self.x))
        set_(self, "e", _frozen(self.e))
        set_(self, "m", _frozen(self.m))
        set_(self, "delta", _frozen(self.delta))
        set_(self, "tau", _frozen(self.tau))
        set_(self, "kappa", _frozen(self.kappa, np.int64))
        set_(self, "b", _frozen(self.b, np.int8))
        fired = np.zeros(n, bool) if self.fired is None else self.fired
        set_(self, "fired", _frozen(fired, bool))
        set_(self, "parts", tuple(slice(s.start, s.stop) for s in self.parts))
        if self.e.shape != self.m.shape:
            raise DimensionMismatch(f"|e|={self.e.size} but |m|={self.m.size}")
        for name in ("delta", "tau", "kappa", "b", "fired"):
            if getattr(self, name).size != n:
                raise DimensionMismatch(f"{name} must have one entry per network ({n})")
        covered = np.zeros(self.e.size, int)
        for s in self.parts:
            covered[s] += 1
        if self.e.size and not np.all(covered == 1):
            raise DimensionMismatch("network partitions must be disjoint and cover e")
        if np.any((self.b != 0) & (self.b != 1)):
            raise ValueError("mode flags must be 0 or 1")

    @property
    def n_networks(self) -> int:
        return len(self.parts)

    @property
    def t(self) -> float:
        return self.time.t

    @property
    def j(self) -> int:
        return self.time.j

    def e_of(self, i: int) -> np.ndarray:
        return self.e[self.parts[i]]

    def m_of(self, i: int) -> np.ndarray:
        return self.m[self.parts[i]]

    def with_network(self, i: int, *, e=None, m=None, tau=None, kappa=None,
                     b=None, fired=None) -> "HybridState":
        """Return a copy with only network ``i``'s components replaced."""
        s = self.parts[i]
        new_e, new_m = self.e.copy(), self.m.copy()
        if e is not None:
            new_e[s] = e
        if m is not None:
            new_m[s] = m
        tau_, kappa_, b_, fired_ = (self.tau.copy(), self.kappa.copy(),
                                    self.b.copy(), self.fired.copy())
        if tau is not None:
            tau_[i] = tau
        if kappa is not None:
            kappa_[i] = kappa
        if b is not None:
            b_[i] = b
        if fired is not None:
            fired_[i] = fired
        return replace(self, e=new_e, m=new_m, tau=tau_, kappa=kappa_, b=b_,
                       fired=fired_, time=self.time.jump())

    @classmethod
    def initial(cls, x, e, parts: Sequence[slice], t0: float = 0.0) -> "HybridState":
        """State at ``(t0, 0)`` with zero buffers, zero clocks, ``kappa = 1`` and ``b = 0``."""
        n = len(parts)
        e = np.asarray(e, float)
        return cls(x=x, e=e, m=np.zeros_like(e), delta=np.full(n, t0),
                   tau=np.zeros(n), kappa=np.ones(n, np.int64), b=np.zeros(n, np.int8),
                   parts=tuple(parts), time=HybridTime(t0, 0))


class _Field(Protocol):
    def __call__(self, delta: np.ndarray, x: np.ndarray, e: np.ndarray,
                 w: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FlowField:
    """Continuous dynamics ``dx/dt = f(delta, x, e, w)`` and ``de/dt = g(delta, x, e, w)``.

    The clocks ``delta`` and ``tau`` advance at unit rate; ``m``, ``kappa`` and
    ``b`` are constant during flow.  Both maps must be pure.
    """

    f: _Field
    g: _Field

    def __call__(self, delta, x, e, w):
        return self.f(delta, x, e, w), self.g(delta, x, e, w)


def zero_disturbance(t: float) -> np.ndarray:
    return np.zeros(0)


def rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray,
             h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step for ``dy/dt = rhs(t, y)``."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_schedule(t_start: float, t_stop: float, step: float) -> Iterable[float]:
    """Yield step lengths of size ``step`` with a shortened last step landing on ``t_stop``."""
    n_full = int(np.floor((t_stop - t_start) / step * (1 + 1e-12)))
    for _ in range(n_full):
        yield step
    rest = (t_stop - t_start) - n_full * step
    if rest > 1e-12 * max(1.0, abs(t_stop)):
        yield rest


def integrate_flow(state: HybridState, field: FlowField, t_stop: float,
                   step: float = DEFAULT_STEP, disturbance: Optional[Disturbance] = None,
                   on_step: Optional[Callable[[float, np.ndarray, np.ndarray], None]] = None,
                   ) -> HybridState:
    """Advance ``state`` along ``field`` to exactly ``t_stop`` with fixed-step RK4.

    ``on_step(t, x, e)`` is called after every accepted step (used for trace
    recording).  Raises :class:`NonFiniteState` as soon as a step produces a
    non-finite component.
    """
    t0 = state.t
    if step <= 0:
        raise ValueError("step must be positive")
    if t_stop < t0:
        raise ValueError(f"t_stop={t_stop} precedes current time {t0}")
    w_of = disturbance or zero_disturbance
    nx = state.x.size
    delta0 = state.delta

    def rhs(t, y):
        d = delta0 + (t - t0)
        dx, de = field(d, y[:nx], y[nx:], w_of(t))
        return np.concatenate((np.asarray(dx, float).reshape(-1),
                               np.asarray(de, float).reshape(-1)))

    y = np.concatenate((state.x, state.e))
    t = t0
    for h in step_schedule(t0, t_stop, step):
        with np.errstate(over="ignore", invalid="ignore"):  # reported as NonFiniteState
            y = rk4_step(rhs, t, y, h)
        t += h
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at t={t:.6g}")
        if on_step is not None:
            on_step(t, y[:nx], y[nx:])
    elapsed = t_stop - t0
    return replace(state, x=y[:nx], e=y[nx:], delta=state.delta + elapsed,
                   tau=state.tau + elapsed, time=state.time.flow_to(t_stop))


def clamp_to_flow_set(state: HybridState, nets: Sequence) -> bool:
    """True iff every network's ``(b, tau)`` pair lies in its flow set.

    The flow set of network ``i`` is ``b = 0, tau in [0, T]`` or
    ``b = 1, tau in [0, Delta]``; ``nets`` items expose ``T`` and ``Delta``.
    """
    for b, tau, net in zip(state.b, state.tau, nets):
        bound = net.T if b == 0 else net.Delta
        if not 0.0 <= tau <= bound:
            return False
    return True


in_flow_set = clamp_to_flow_set
