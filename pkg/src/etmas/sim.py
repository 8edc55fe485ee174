"""Event-driven execution of the hybrid model over several asynchronous networks.

Each network owns a sampling schedule and a delay schedule.  The engine
flows to the earliest pending event, applies the sampling jump (trigger
evaluation, protocol, buffer/counter update) or the arrival jump (error
update), and records every jump plus the flow samples in a :class:`Trace`.
"""
from __future__ import annotations

import csv
import enum
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigViolation
from .etm import (apply_transmission, apply_update, fires, gamma_centralized,
                  gamma_decentralized, lambda_bar, lambda_bar_centralized)
from .hybrid import DEFAULT_STEP, HybridState, integrate_flow
from .protocols import NodePartition, ProtocolKind, protocol_update

TIME_TOL = 1e-9


@dataclass(frozen=True)
class ConstantInterval:
    h: float

    def value(self, k: int) -> float:
        return self.h

    def time(self, t0: float, k: int) -> float:
        """Time of the ``k``-th event (``k >= 1``) counted from ``t0``."""
        return t0 + k * self.h


@dataclass(frozen=True)
class SequenceInterval:
    """Explicit list of intervals, repeated cyclically."""

    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("interval sequence must not be empty")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def value(self, k: int) -> float:
        return self.values[(k - 1) % len(self.values)]

    def time(self, t0: float, k: int) -> float:
        n = len(self.values)
        full, rest = divmod(k, n)
        return t0 + math.fsum(self.values) * full + math.fsum(self.values[:rest])


@dataclass(frozen=True)
class ConstantDelay:
    d: float

    def value(self, k: int) -> float:
        return self.d


@dataclass(frozen=True)
class SequenceDelay:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("delay sequence must not be empty")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def value(self, k: int) -> float:
        return self.values[(k - 1) % len(self.values)]


@dataclass(frozen=True)
class NetworkConfig:
    """Timing bounds, node partition and protocol of one network.

    ``sampling`` defaults to ``ConstantInterval(T)`` (sample as late as
    allowed) and ``delay`` to ``ConstantDelay(Delta)``.
    """

    T: float
    Delta: float = 0.0
    epsilon: float = 1e-6
    partition: NodePartition = NodePartition((1,))
    protocol: ProtocolKind = ProtocolKind.ROUND_ROBIN
    sampling: object = None
    delay: object = None
    order: Optional[tuple] = None

    def __post_init__(self):
        if self.sampling is None:
            object.__setattr__(self, "sampling", ConstantInterval(self.T))
        if self.delay is None:
            object.__setattr__(self, "delay", ConstantDelay(self.Delta))
        object.__setattr__(self, "protocol", ProtocolKind.parse(self.protocol))

    def validate(self) -> None:
        """Static check of the timing bounds; raises :class:`ConfigViolation`."""
        if not self.T > 0:
            raise ConfigViolation(f"T={self.T} must be positive")
        if not 0 <= self.Delta <= self.T:
            raise ConfigViolation(
                f"need T >= Delta >= 0 (timing bounds on sampling and delay), got T={self.T}, "
                f"Delta={self.Delta}")
        if not 0 < self.epsilon <= self.T:
            raise ConfigViolation(f"need 0 < epsilon <= T, got epsilon={self.epsilon}")
        samples = (self.sampling.values if isinstance(self.sampling, SequenceInterval)
                   else (self.sampling.h,))
        delays = (self.delay.values if isinstance(self.delay, SequenceDelay)
                  else (self.delay.d,))
        for k, h in enumerate(samples, 1):
            check_interval(self, h, k)
        for k, d in enumerate(delays, 1):
            check_delay(self, d, min(samples), k)


def check_interval(net: NetworkConfig, h: float, k: int) -> None:
    if not net.epsilon - TIME_TOL <= h <= net.T + TIME_TOL:
        raise ConfigViolation(
            f"sampling interval #{k} h={h} violates epsilon <= h <= T "
            f"(epsilon={net.epsilon}, T={net.T})")


def check_delay(net: NetworkConfig, d: float, h: float, k: int) -> None:
    if not -TIME_TOL <= d <= min(net.Delta, h) + TIME_TOL:
        raise ConfigViolation(
            f"delay #{k} d={d} violates 0 <= d <= min(Delta, h) (Delta={net.Delta}, h={h})")


class EtmMode(enum.Enum):
    DECENTRALIZED = "etc"
    CENTRALIZED = "centralized"
    TIME_TRIGGERED = "ttc"

    @classmethod
    def parse(cls, tag) -> "EtmMode":
        if isinstance(tag, cls):
            return tag
        key = str(tag).lower()
        aliases = {"etc": cls.DECENTRALIZED, "decentralized": cls.DECENTRALIZED,
                   "centralized": cls.CENTRALIZED, "ttc": cls.TIME_TRIGGERED,
                   "time-triggered": cls.TIME_TRIGGERED, "timetriggered": cls.TIME_TRIGGERED}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown ETM mode {tag!r}") from None


class Event(enum.IntEnum):
    NONE = 0
    FIRED = 1
    SKIPPED = 2
    UPDATED = 3

    @property
    def tag(self) -> str:
        return {0: "none", 1: "sampled-fired", 2: "sampled-skipped", 3: "updated"}[int(self)]


@dataclass
class Trace:
    """Hybrid-time-indexed record; row ``k`` holds the state at ``(t[k], j[k])``.

    ``net[k]`` is the network whose jump produced the row (``-1`` for flow
    rows) and ``event[k]`` the :class:`Event` code.  ``gamma`` holds, per
    network, the trigger value of that network's most recent sampling.
    """

    t: np.ndarray
    j: np.ndarray
    net: np.ndarray
    event: np.ndarray
    x: np.ndarray
    e: np.ndarray
    m: np.ndarray
    tau: np.ndarray
    delta: np.ndarray
    kappa: np.ndarray
    b: np.ndarray
    fired: np.ndarray
    gamma: np.ndarray
    U: Optional[np.ndarray]
    parts: tuple
    x_names: tuple = ()
    e_names: tuple = ()
    eta_groups: tuple = ()
    eax_index: tuple = ()
    sampling_times: tuple = ()
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def n_networks(self) -> int:
        return len(self.parts)

    def state(self, k: int) -> HybridState:
        from .hybrid import HybridTime
        return HybridState(x=self.x[k], e=self.e[k], m=self.m[k], delta=self.delta[k],
                           tau=self.tau[k], kappa=self.kappa[k], b=self.b[k],
                           parts=self.parts, fired=self.fired[k],
                           time=HybridTime(float(self.t[k]), int(self.j[k])))

    @classmethod
    def empty(cls, n_networks: int = 0) -> "Trace":
        z = np.zeros(0)
        return cls(t=z, j=z.astype(int), net=z.astype(int), event=z.astype(int),
                   x=np.zeros((0, 0)), e=np.zeros((0, 0)), m=np.zeros((0, 0)),
                   tau=np.zeros((0, n_networks)), delta=np.zeros((0, n_networks)),
                   kappa=np.zeros((0, n_networks), int), b=np.zeros((0, n_networks), int),
                   fired=np.zeros((0, n_networks), bool),
                   gamma=np.zeros((0, n_networks)), U=None,
                   parts=tuple(slice(0, 0) for _ in range(n_networks)))

    # -- exports ---------------------------------------------------------
    def columns(self) -> list:
        """Column order of :meth:`to_csv` / :meth:`to_jsonl`."""
        x_names = self.x_names or tuple(f"x{k}" for k in range(self.x.shape[1]))
        e_names = self.e_names or tuple(f"e{k}" for k in range(self.e.shape[1]))
        cols = ["t", "j", "net", "event", *x_names, *e_names, "eta_norm", "eax_norm"]
        cols += [f"gamma_net{i + 1}" for i in range(self.n_networks)]
        cols.append("U")
        return cols

    def records(self):
        eta, eax = _norms(self)
        for k in range(len(self)):
            row = [float(self.t[k]), int(self.j[k]), int(self.net[k]) + 1,
                   Event(int(self.event[k])).tag]
            row += [float(v) for v in self.x[k]]
            row += [float(v) for v in self.e[k]]
            row += [float(eta[k]), float(eax[k])]
            row += [float(g) for g in self.gamma[k]]
            row.append(float(self.U[k]) if self.U is not None else float("nan"))
            yield row

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns())
            for row in self.records():
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def to_jsonl(self, path) -> None:
        cols = self.columns()
        with open(path, "w") as fh:
            for row in self.records():
                rec = {c: (None if isinstance(v, float) and not math.isfinite(v) else v)
                       for c, v in zip(cols, row)}
                fh.write(json.dumps(rec) + "\n")


def _norms(trace: Trace):
    n = len(trace)
    if n == 0:
        return np.zeros(0), np.zeros(0)
    groups = trace.eta_groups or (tuple(range(trace.x.shape[1])),)
    eta_idx = sorted(set(itertools.chain.from_iterable(groups)))
    eta = np.linalg.norm(trace.x[:, eta_idx], axis=1)
    eax_idx = list(trace.eax_index) if trace.eax_index else list(range(trace.e.shape[1]))
    eax = np.linalg.norm(trace.e[:, eax_idx], axis=1) if eax_idx else np.zeros(n)
    return eta, eax


@dataclass(frozen=True)
class NormSeries:
    t: np.ndarray
    j: np.ndarray
    eta: np.ndarray
    eax: np.ndarray
    eta_parts: np.ndarray  # one column per agent / observer group


def error_norms(trace: Trace) -> NormSeries:
    """Euclidean norms of the tracking error and of ``e_ax`` per trace row."""
    eta, eax = _norms(trace)
    groups = trace.eta_groups or ()
    parts = (np.column_stack([np.linalg.norm(trace.x[:, list(g)], axis=1) for g in groups])
             if groups and len(trace) else np.zeros((len(trace), 0)))
    return NormSeries(t=trace.t.copy(), j=trace.j.copy(), eta=eta, eax=eax, eta_parts=parts)


@dataclass(frozen=True)
class EventCounts:
    samplings: int
    fired: int
    updates: int


def event_counts(trace: Trace) -> list:
    """Per-network ``(samplings, fired, updates)`` counted from the event tags."""
    out = []
    for i in range(trace.n_networks):
        mine = trace.event[trace.net == i]
        fired = int(np.sum(mine == Event.FIRED))
        skipped = int(np.sum(mine == Event.SKIPPED))
        out.append(EventCounts(samplings=fired + skipped, fired=fired,
                               updates=int(np.sum(mine == Event.UPDATED))))
    return out


class _Recorder:
    def __init__(self, n: int, monitor: Optional[Callable[[HybridState], float]]):
        self.cols = {k: [] for k in ("t", "j", "net", "event", "x", "e", "m", "tau",
                                     "delta", "kappa", "b", "fired", "gamma", "U")}
        self.gamma = np.full(n, np.nan)
        self.monitor = monitor

    def add(self, s: HybridState, net: int = -1, event: Event = Event.NONE):
        c = self.cols
        c["t"].append(s.t)
        c["j"].append(s.j)
        c["net"].append(net)
        c["event"].append(int(event))
        c["x"].append(s.x)
        c["e"].append(s.e)
        c["m"].append(s.m)
        c["tau"].append(s.tau)
        c["delta"].append(s.delta)
        c["kappa"].append(s.kappa)
        c["b"].append(s.b)
        c["fired"].append(s.fired)
        c["gamma"].append(self.gamma.copy())
        if self.monitor is not None:
            c["U"].append(self.monitor(s))

    def build(self, parts, **meta) -> Trace:
        c = self.cols
        n = len(parts)

        def stack(key, width_dtype=float):
            return np.array(c[key], dtype=width_dtype) if c[key] else np.zeros((0, n))
        return Trace(t=np.array(c["t"], float), j=np.array(c["j"], int),
                     net=np.array(c["net"], int), event=np.array(c["event"], int),
                     x=np.array(c["x"]), e=np.array(c["e"]), m=np.array(c["m"]),
                     tau=stack("tau"), delta=stack("delta"), kappa=stack("kappa", int),
                     b=stack("b", int), fired=stack("fired", bool), gamma=stack("gamma"),
                     U=np.array(c["U"]) if self.monitor is not None else None,
                     parts=tuple(parts), **meta)


@dataclass
class _Schedule:
    net: NetworkConfig
    t0: float
    horizon: float
    k: int = 0               # samplings issued
    last_sample: float = 0.0
    pending_arrival: Optional[float] = None
    times: list = field(default_factory=list)

    def next_sampling(self) -> Optional[float]:
        k = self.k + 1
        h = self.net.sampling.value(k)
        check_interval(self.net, h, k)
        t = self.net.sampling.time(self.t0, k)
        d = self.net.delay.value(k)
        check_delay(self.net, d, h, k)
        if t + d > self.horizon + TIME_TOL:
            return None
        return t

    def next_event(self) -> Optional[float]:
        if self.pending_arrival is not None:
            return self.pending_arrival
        return self.next_sampling()


def run(scenario, nets: Optional[Sequence[NetworkConfig]] = None, horizon: Optional[float] = None,
        step: Optional[float] = None, etm_mode="etc", monitor=None, record_every: int = 1,
        disturbance=None) -> Trace:
    """Simulate ``scenario`` and return its :class:`Trace`.

    ``scenario`` supplies ``field``, ``x0``, ``e0``, ``channels`` (per
    network: ``params``, ``trigger``, ``signal``) and optionally ``V``.
    ``monitor`` is an optional callable ``HybridState -> U`` evaluated on
    every recorded row.  Simultaneous events are processed in ascending
    network index; a zero delay executes the arrival jump right after the
    sampling jump at the same time.
    """
    mode = EtmMode.parse(etm_mode)
    nets = list(scenario.nets if nets is None else nets)
    horizon = float(scenario.horizon if horizon is None else horizon)
    step = float(step or getattr(scenario, "step", None) or DEFAULT_STEP)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if len(nets) != len(scenario.channels):
        raise ConfigViolation("one NetworkConfig per network channel is required")
    for net in nets:
        net.validate()
    parts, offset = [], 0
    for net in nets:
        parts.append(slice(offset, offset + net.partition.dim))
        offset += net.partition.dim
    state = HybridState.initial(scenario.x0, scenario.e0, parts)
    channels = scenario.channels
    V = getattr(scenario, "V", None)
    if mode is EtmMode.CENTRALIZED:
        lbars = [lambda_bar_centralized(ch.params) for ch in channels]
    else:
        lbars = [lambda_bar(ch.params) for ch in channels]
    disturbance = disturbance or getattr(scenario, "disturbance", None)

    rec = _Recorder(len(nets), monitor)
    rec.add(state)
    sched = [_Schedule(net, state.t, horizon) for net in nets]
    counter = [0]

    def on_step(t, x, e):
        counter[0] += 1
        if counter[0] % record_every == 0 and t < t_target - 1e-15:
            el = t - t_start
            rec.add(replace(state, x=x, e=e, tau=state.tau + el, delta=state.delta + el,
                            time=state.time.flow_to(t)))

    t_start = t_target = state.t
    while True:
        upcoming = [(s.next_event(), i) for i, s in enumerate(sched)]
        upcoming = [(t, i) for t, i in upcoming if t is not None]
        if not upcoming:
            break
        t_target = min(t for t, _ in upcoming)
        if t_target > state.t:
            t_start = state.t
            state = integrate_flow(state, scenario.field, t_target, step, disturbance, on_step)
            rec.add(state)
        for t_ev, i in sorted(upcoming, key=lambda p: p[1]):
            if t_ev > t_target + TIME_TOL:
                continue
            s = sched[i]
            if s.pending_arrival is None:
                state = _sampling_jump(state, i, nets[i], channels[i], mode, lbars[i], V, rec)
                rec.add(state, i, Event.FIRED if state.fired[i] else Event.SKIPPED)
                s.k += 1
                s.times.append(state.t)
                d = nets[i].delay.value(s.k)
                s.pending_arrival = t_ev + d
                if d > TIME_TOL:
                    continue
            state = _arrival_jump(state, i)
            rec.add(state, i, Event.UPDATED)
            s.pending_arrival = None
    if state.t < horizon:
        t_start, t_target = state.t, horizon
        state = integrate_flow(state, scenario.field, horizon, step, disturbance, on_step)
        rec.add(state)
    return rec.build(parts, x_names=tuple(getattr(scenario, "x_names", ())),
                     e_names=tuple(getattr(scenario, "e_names", ())),
                     eta_groups=tuple(getattr(scenario, "eta_groups", ())),
                     eax_index=tuple(getattr(scenario, "eax_index", ())),
                     sampling_times=tuple(tuple(s.times) for s in sched),
                     meta={"etm_mode": mode.value, "horizon": horizon, "step": step,
                           "nets": [{"T": n.T, "Delta": n.Delta, "epsilon": n.epsilon,
                                     "protocol": n.protocol.value} for n in nets]})


def _sampling_jump(state: HybridState, i: int, net: NetworkConfig, channel, mode: EtmMode,
                   lbar: float, V, rec: _Recorder) -> HybridState:
    e_i, m_i, kappa = state.e_of(i), state.m_of(i), int(state.kappa[i])
    p = channel.params
    if mode is EtmMode.TIME_TRIGGERED:
        w = float(channel.trigger.W(e_i, m_i, kappa, 0))
        value = p.gamma0 * w * w
    elif mode is EtmMode.CENTRALIZED:
        lyap = channel.trigger if channel.trigger.V is not None else replace(channel.trigger, V=V)
        value = gamma_centralized(state.x, e_i, m_i, kappa, 0, p, lyap, lbar)
    else:
        z = channel.signal(state.x, state.e)
        value = gamma_decentralized(z, e_i, m_i, kappa, 0, p, channel.trigger, lbar)
    rec.gamma[i] = value
    fired = fires(value)
    out = protocol_update(net.protocol, kappa, e_i, net.partition, net.order) if fired else None
    new_m, new_kappa = apply_transmission(e_i, m_i, kappa, fired, out)
    return state.with_network(i, m=new_m, kappa=new_kappa, b=1, tau=0.0, fired=fired)


def _arrival_jump(state: HybridState, i: int) -> HybridState:
    new_e, new_m = apply_update(state.e_of(i), state.m_of(i), bool(state.fired[i]))
    return state.with_network(i, e=new_e, m=new_m, b=0)
