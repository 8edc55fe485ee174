"""Composite Lyapunov monitor.

Evaluates ``U = V(x) + sum_i max{gamma_b phi_b(tau_i) W_i^2, (1 - b_i) rho_i phi(z_i)}``
along a trace and checks that it decreases during flows and does not
increase across jumps.  The monitor is a diagnostic: the class-K slack
functions of the stability proof are rarely known, so jumps are compared
against user callbacks when supplied and a scalar slack otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .certify import DEFAULT_GRID, PhiSolution, default_phi0, lifetime_bound, solve_phi
from .errors import TauOutOfRange
from .etm import lambda_bar


@dataclass(frozen=True)
class MonitorChannel:
    """Per-network ingredients of ``U``."""

    W: Callable          # (e_i, m_i, kappa, b) -> float
    phi_fn: Callable     # trigger storage on the transmitted signal
    signal: Callable     # (x, e) -> z_i
    phi: tuple           # (PhiSolution for b = 0, PhiSolution for b = 1)
    gamma: tuple         # (gamma0, gamma1)
    rho: float


@dataclass(frozen=True)
class MonitorConfig:
    """Everything needed to evaluate ``U``.

    ``alpha3``/``alpha4`` are optional jump-slack callbacks applied to
    ``|e_f|`` and ``|e_rf|`` (read from ``ef_index``/``erf_index`` of the
    error vector); without them a scalar slack is used.
    """

    V: Callable
    channels: tuple
    enabled: bool = True
    alpha3: Optional[Callable[[float], float]] = None
    alpha4: Optional[Callable[[float], float]] = None
    ef_index: tuple = ()
    erf_index: tuple = ()
    meta: dict = field(default_factory=dict)

    def __call__(self, state) -> float:
        """Monitor callback for :func:`etmas.sim.run`; ``nan`` outside the solved tau range."""
        try:
            return evaluate_U(state, self)
        except TauOutOfRange:
            return math.nan


def monitor_config(scenario, nets: Optional[Sequence] = None, grid_step: float = DEFAULT_GRID,
                   enabled: bool = True, alpha3=None, alpha4=None, ef_index=(),
                   erf_index=()) -> MonitorConfig:
    """Build a :class:`MonitorConfig` from a scenario.

    Each ``phi_b`` is solved from the channel's initial pair (or the largest
    admissible value) until it reaches zero; a trace whose ``tau`` leaves
    that range is outside every certificate and is reported as such.
    """
    nets = list(scenario.nets if nets is None else nets)
    chans = []
    for ch in scenario.channels:
        p = ch.params
        lbar = lambda_bar(p)
        pair = ch.phi0 if ch.phi0 is not None else (default_phi0(lbar),) * 2
        sols = tuple(
            solve_phi(p.L(b), p.gamma(b), p.varrho(b), float(pair[b]),
                      lifetime_bound(p.gamma(b)) + 2 * grid_step, grid_step)
            for b in (0, 1))
        chans.append(MonitorChannel(W=ch.storage, phi_fn=ch.trigger.phi_fn, signal=ch.signal,
                                    phi=sols, gamma=(p.gamma0, p.gamma1), rho=p.rho))
    return MonitorConfig(V=scenario.V, channels=tuple(chans), enabled=enabled, alpha3=alpha3,
                         alpha4=alpha4, ef_index=tuple(ef_index), erf_index=tuple(erf_index),
                         meta={"phi_range": [[float(s.grid[-1]) for s in c.phi] for c in chans],
                               "nets": len(nets)})


def _W_terms(x, e, m, tau, kappa, b, parts, cfg: MonitorConfig) -> float:
    total = 0.0
    for i, ch in enumerate(cfg.channels):
        bi = int(b[i])
        w = float(ch.W(e[parts[i]], m[parts[i]], int(kappa[i]), bi))
        phi_tau = ch.phi[bi](float(tau[i]))
        hold = 0.0 if bi else ch.rho * float(ch.phi_fn(ch.signal(x, e)))
        total += max(ch.gamma[bi] * phi_tau * w * w, hold)
    return total


def evaluate_U(state, cfg: MonitorConfig) -> float:
    """``U`` at a hybrid state; raises :class:`TauOutOfRange` outside the solved phi grid."""
    x = np.asarray(state.x, float)
    return float(cfg.V(x)) + _W_terms(x, state.e, state.m, state.tau, state.kappa, state.b,
                                       state.parts, cfg)


def _jump_slack(cfg: MonitorConfig, e, slack: float) -> float:
    extra = 0.0
    if cfg.alpha3 is not None and cfg.ef_index:
        extra += float(cfg.alpha3(float(np.linalg.norm(e[list(cfg.ef_index)]))))
    if cfg.alpha4 is not None and cfg.erf_index:
        extra += float(cfg.alpha4(float(np.linalg.norm(e[list(cfg.erf_index)]))))
    return slack + extra


def trace_U(trace, cfg: MonitorConfig) -> np.ndarray:
    """``U`` on every trace row (``nan`` where tau leaves the solved range)."""
    out = np.empty(len(trace))
    for k in range(len(trace)):
        try:
            out[k] = float(cfg.V(trace.x[k])) + _W_terms(
                trace.x[k], trace.e[k], trace.m[k], trace.tau[k], trace.kappa[k], trace.b[k],
                trace.parts, cfg)
        except TauOutOfRange:
            out[k] = math.nan
    return out


def check_trace(trace, cfg: MonitorConfig, slack: float = 1e-9, max_items: int = 50) -> dict:
    """Check flow decrease and jump non-increase of ``U`` along ``trace``.

    Jump rows sharing one time instant form a single composite jump (for
    example sampling and zero-delay arrival), compared between the flow row
    just before and the last jump row of the group.  Flow pairs are
    consecutive rows with equal jump counter; a flow increase is flagged
    when it exceeds ``slack * (1 + |U|)``.  Rows where ``tau`` leaves the
    solved range count as violations.  The report is JSON-serialisable;
    ``n_*`` entries hold full counts while the lists keep the first
    ``max_items`` occurrences.
    """
    report = {"rows": int(len(trace)), "slack": slack, "flow_violations": [],
              "jump_violations": [], "out_of_range": [], "max_flow_increase": 0.0,
              "max_jump_increase": 0.0, "passed": True}
    if len(trace) == 0 or not cfg.enabled:
        report.update(n_flow_violations=0, n_jump_violations=0, n_out_of_range=0)
        return report
    U = trace_U(trace, cfg)
    bad = np.flatnonzero(~np.isfinite(U))
    report["out_of_range"] = [{"row": int(k), "t": float(trace.t[k])} for k in bad]
    n = len(trace)
    # flows
    for k in range(n - 1):
        if trace.j[k + 1] != trace.j[k] or not (np.isfinite(U[k]) and np.isfinite(U[k + 1])):
            continue
        inc = U[k + 1] - U[k]
        report["max_flow_increase"] = max(report["max_flow_increase"], float(inc))
        if inc > slack * (1.0 + abs(U[k])):
            report["flow_violations"].append(
                {"t0": float(trace.t[k]), "t1": float(trace.t[k + 1]), "increase": float(inc)})
    # composite jumps
    k = 1
    while k < n:
        if trace.net[k] < 0:
            k += 1
            continue
        start = k - 1
        while k + 1 < n and trace.net[k + 1] >= 0 and abs(trace.t[k + 1] - trace.t[k]) <= 1e-12:
            k += 1
        before, after = U[start], U[k]
        if np.isfinite(before) and np.isfinite(after):
            inc = after - before
            report["max_jump_increase"] = max(report["max_jump_increase"], float(inc))
            if inc > _jump_slack(cfg, trace.e[k], slack):
                report["jump_violations"].append(
                    {"t": float(trace.t[k]), "j": int(trace.j[k]),
                     "nets": sorted({int(v) + 1 for v in trace.net[start + 1:k + 1]}),
                     "increase": float(inc)})
        k += 1
    for key in ("flow_violations", "jump_violations", "out_of_range"):
        report["n_" + key] = len(report[key])
        report[key] = report[key][:max_items]
    report["passed"] = not (report["n_flow_violations"] or report["n_jump_violations"]
                            or report["n_out_of_range"])
    return report
