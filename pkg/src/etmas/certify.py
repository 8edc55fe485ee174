"""Riccati-ODE certification of sampling periods and delays.

The scalar ODE ``phi' = -2 L phi - gamma ((1 + varrho) phi^2 + 1)`` is
integrated with fixed-step RK4 on a uniform grid.  Its positive lifetime
bounds the maximally allowable sampling period (MASP); comparing the
solutions for the two modes bounds the maximally allowable delay (MAD).
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleInitialization
from .etm import CertificateParams, lambda_bar

DEFAULT_GRID = 1e-5
#: Slack used when none is configured: the limit varrho -> 0+.
DEFAULT_VARRHO = 1e-9
#: Relative distance below the upper end 1/lambda_bar of the phi(0) window.
DEFAULT_PHI0_MARGIN = 1e-9
#: Cap on phi(0) when lambda_bar = 0 makes the window unbounded.
PHI0_CAP = 1e6
REFINE_TOL = 1e-8
# Grid intervals are subdivided so that step * |df/dphi| stays below this.
_STIFFNESS = 0.2


@dataclass(frozen=True)
class PhiSolution:
    """Solution of the Riccati ODE sampled on a uniform grid.

    When the solution crosses zero inside the horizon the grid is truncated
    there and the crossing time (linear interpolation) is appended with value 0.
    """

    grid: np.ndarray
    values: np.ndarray
    params: tuple  # (L, gamma, varrho, phi0)
    step: float
    crossing: Optional[float] = None

    def __call__(self, tau: float) -> float:
        from .errors import TauOutOfRange
        if tau < self.grid[0] - 1e-12 or tau > self.grid[-1] + 1e-12:
            raise TauOutOfRange(f"tau={tau} outside solved range [0, {self.grid[-1]}]")
        return float(np.interp(tau, self.grid, self.values))


@dataclass(frozen=True)
class CertResult:
    T: float
    Delta: float
    phi0_pair: tuple
    feasible: bool
    margin: float
    lambda_bar: float
    varrho_pair: tuple = (DEFAULT_VARRHO, DEFAULT_VARRHO)
    warnings: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {"T": self.T, "Delta": self.Delta, "phi0": list(self.phi0_pair),
                "varrho": list(self.varrho_pair), "feasible": self.feasible,
                "margin": self.margin, "lambda_bar": self.lambda_bar,
                "warnings": list(self.warnings)}


def _rhs(L: float, gamma: float, varrho: float):
    a = gamma * (1.0 + varrho)

    def f(phi: float) -> float:
        return -2.0 * L * phi - a * phi * phi - gamma

    def stiffness(phi: float) -> float:
        return abs(2.0 * L + 2.0 * a * phi)

    return f, stiffness


def _advance(f, stiffness, phi: float, h: float) -> float:
    """Integrate over a length ``h`` with as many RK4 substeps as stiffness requires."""
    n = max(1, math.ceil(h * stiffness(phi) / _STIFFNESS))
    s = h / n
    for _ in range(n):
        k1 = f(phi)
        k2 = f(phi + 0.5 * s * k1)
        k3 = f(phi + 0.5 * s * k2)
        k4 = f(phi + s * k3)
        phi += (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return phi


def solve_phi(L: float, gamma: float, varrho: float, phi0: float, horizon: float,
              step: float = DEFAULT_GRID) -> PhiSolution:
    """Solve the Riccati ODE from ``phi(0) = phi0`` up to ``horizon`` or the zero crossing."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if phi0 <= 0:
        raise ValueError("phi0 must be positive")
    if step <= 0 or horizon < 0:
        raise ValueError("step must be positive and horizon nonnegative")
    f, stiff = _rhs(float(L), float(gamma), float(varrho))
    n = int(math.ceil(horizon / step - 1e-9))
    vals = [float(phi0)]
    phi = float(phi0)
    crossing = None
    for k in range(n):
        nxt = _advance(f, stiff, phi, step)
        if nxt <= 0.0:
            crossing = (k + phi / (phi - nxt)) * step
            vals.append(0.0)
            break
        vals.append(nxt)
        phi = nxt
    grid = np.arange(len(vals), dtype=float) * step
    if crossing is not None:
        grid[-1] = crossing
    return PhiSolution(grid=grid, values=np.array(vals), params=(L, gamma, varrho, phi0),
                       step=step, crossing=crossing)


def lifetime_bound(gamma: float) -> float:
    """Upper bound on the positive lifetime of any solution with ``L, varrho >= 0``: ``pi / (2 gamma)``."""
    return math.pi / (2.0 * gamma)


def _bisect(pred, lo: float, hi: float, tol: float = REFINE_TOL) -> float:
    """Largest ``s`` in ``[lo, hi]`` (to ``tol``) with ``pred(s)`` true, given ``pred(lo)``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def default_phi0(lbar: float) -> float:
    """Largest admissible initial value ``(1 - 1e-9) / lambda_bar`` (capped when ``lambda_bar = 0``)."""
    if lbar <= 0:
        return PHI0_CAP
    return min(PHI0_CAP, (1.0 - DEFAULT_PHI0_MARGIN) / lbar)


def varrho_window(lbar: float, phi0: float) -> float:
    """Upper end of the admissible slack interval ``(0, lbar^-2 phi0^-2 - 1)``."""
    if lbar <= 0:
        return math.inf
    return 1.0 / (lbar * lbar * phi0 * phi0) - 1.0


def masp_delay_free(p: CertificateParams, phi0: Optional[float] = None,
                    grid_step: float = DEFAULT_GRID) -> float:
    """MASP of a delay-free network: the largest ``T`` with ``phi(T) > 0``.

    Uses ``L0``, ``gamma0`` and ``varrho0`` of ``p``.  Returns 0 when
    ``lambda_bar >= 1`` (no admissible initial value exists).  Without an
    explicit ``phi0`` the largest admissible value :func:`default_phi0` is used.
    """
    lbar = lambda_bar(p)
    # The window (1, 1/lambda_bar) is empty (up to rounding of rho = rho_bar).
    if lbar >= 1.0 - 1e-12:
        return 0.0
    phi0 = default_phi0(lbar) if phi0 is None else float(phi0)
    upper = math.inf if lbar == 0 else 1.0 / lbar
    if not 1.0 < phi0 < upper:
        raise InfeasibleInitialization(f"phi(0)={phi0} outside (1, {upper})")
    if not 0.0 < p.varrho0 < varrho_window(lbar, phi0):
        raise InfeasibleInitialization(
            f"varrho={p.varrho0} outside (0, {varrho_window(lbar, phi0)})")
    sol = solve_phi(p.L0, p.gamma0, p.varrho0, phi0,
                    lifetime_bound(p.gamma0) + 2 * grid_step, grid_step)
    if sol.crossing is None:  # cannot happen for L >= 0, kept as a guard
        return float(sol.grid[-1])
    f, stiff = _rhs(p.L0, p.gamma0, p.varrho0)
    k = len(sol.values) - 2  # last grid point with phi > 0
    base, t_base = float(sol.values[k]), k * grid_step
    s = _bisect(lambda s: _advance(f, stiff, base, s) > 0.0 if s > 0 else True,
                0.0, grid_step)
    return t_base + s


def masp_mad_search(p: CertificateParams, phi0_pair: Sequence[float],
                    grid_step: float = DEFAULT_GRID) -> CertResult:
    """Largest MASP ``T`` and MAD ``Delta`` satisfying the two-mode certificate conditions.

    Conditions, checked on the grid and refined by bisection:

    * ``gamma0 phi0(tau) >= (1 + varrho1) lbar^2 gamma1 phi1(0)`` and
      ``phi0(tau) > 0`` for ``tau in [0, T]``;
    * ``gamma1 phi1(tau) >= (1 + varrho0) gamma0 phi0(tau)`` and
      ``phi1(tau) > 0`` for ``tau in [0, Delta]``, ``Delta <= T``.
    """
    lbar = lambda_bar(p)
    if lbar >= 1.0:
        raise InfeasibleInitialization(f"lambda_bar={lbar} >= 1: the phi(0) window is empty")
    upper = math.inf if lbar == 0 else 1.0 / lbar
    notes = []
    phis = [float(v) for v in phi0_pair]
    for b, v in enumerate(phis):
        if v <= 0:
            raise InfeasibleInitialization(f"phi_{b}(0)={v} must be positive")
        if not 1.0 < v < upper:
            msg = f"phi_{b}(0)={v} lies outside the window (1, {upper:.6g})"
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)
        hi = varrho_window(lbar, v)
        if not 0.0 < p.varrho(b) < hi:
            raise InfeasibleInitialization(f"varrho_{b}={p.varrho(b)} outside (0, {hi:.6g})")

    horizon = lifetime_bound(min(p.gamma0, p.gamma1)) + 2 * grid_step
    sol0 = solve_phi(p.L0, p.gamma0, p.varrho0, phis[0], horizon, grid_step)
    sol1 = solve_phi(p.L1, p.gamma1, p.varrho1, phis[1], horizon, grid_step)
    f0, s0 = _rhs(p.L0, p.gamma0, p.varrho0)
    f1, s1 = _rhs(p.L1, p.gamma1, p.varrho1)
    c1 = (1.0 + p.varrho1) * lbar * lbar * p.gamma1 * phis[1]

    def cond_T(v0: float) -> float:
        return p.gamma0 * v0 - c1

    def cond_D(v0: float, v1: float) -> float:
        return p.gamma1 * v1 - (1.0 + p.varrho0) * p.gamma0 * v0

    n0 = len(sol0.values) - (1 if sol0.crossing is not None else 0)
    n1 = len(sol1.values) - (1 if sol1.crossing is not None else 0)

    # MASP: first grid index where condition fails, then refine inside the interval.
    margin = math.inf
    T = 0.0
    feasible = cond_T(phis[0]) >= 0.0
    if feasible:
        k = 0
        while k + 1 < n0 and cond_T(sol0.values[k + 1]) >= 0.0:
            margin = min(margin, cond_T(sol0.values[k]))
            k += 1
        margin = min(margin, cond_T(sol0.values[k]))
        base = float(sol0.values[k])
        T = k * grid_step + _bisect(
            lambda s: (lambda v: v > 0 and cond_T(v) >= 0)(_advance(f0, s0, base, s)),
            0.0, grid_step)
    # MAD: same scan on the second condition, capped at T.
    Delta = 0.0
    if feasible and cond_D(phis[0], phis[1]) >= 0.0:
        n = min(n0, n1)
        k = 0
        while (k + 1 < n and (k + 1) * grid_step <= T
               and cond_D(sol0.values[k + 1], sol1.values[k + 1]) >= 0.0):
            k += 1
        b0, b1 = float(sol0.values[k]), float(sol1.values[k])

        def ok(s):
            v0, v1 = _advance(f0, s0, b0, s), _advance(f1, s1, b1, s)
            return v1 > 0 and cond_D(v0, v1) >= 0
        Delta = min(T, k * grid_step + _bisect(ok, 0.0, grid_step))
    elif feasible:
        notes.append("delay condition fails at tau = 0; Delta = 0")
    if not feasible:
        notes.append("sampling condition fails at tau = 0; no positive MASP")
        margin = cond_T(phis[0])
    return CertResult(T=T, Delta=Delta, phi0_pair=tuple(phis), feasible=feasible and T > 0,
                      margin=float(margin), lambda_bar=lbar,
                      varrho_pair=(p.varrho0, p.varrho1), warnings=tuple(notes))


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    T: tuple  # one entry per network; None marks a failed cell
    reasons: tuple = ()


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ETMAS_THREADS", "0")) or (os.cpu_count() or 1))
    except ValueError:
        return 1


def _cell(p: CertificateParams, ratio: float, phi0, grid_step: float):
    try:
        return masp_delay_free(p.with_rho_ratio(ratio), phi0, grid_step), ""
    except Exception as exc:  # reported as an empty cell with its reason
        return None, f"{type(exc).__name__}: {exc}"


def sweep_table(p, ratios: Sequence[float], phi0: Optional[float] = None,
                grid_step: float = DEFAULT_GRID, threads: Optional[int] = None) -> list:
    """One delay-free MASP per ratio ``rho / rho_bar`` and per network.

    ``p`` is a :class:`CertificateParams` or a sequence of them (one column
    per network).  Parallelism is capped by ``threads`` or ``ETMAS_THREADS``.
    """
    nets = [p] if isinstance(p, CertificateParams) else list(p)
    for r in ratios:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"ratio {r} outside [0, 1]")
    jobs = [(q, r) for r in ratios for q in nets]
    workers = threads or _threads()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(lambda job: _cell(job[0], job[1], phi0, grid_step), jobs))
    else:
        cells = [_cell(q, r, phi0, grid_step) for q, r in jobs]
    rows = []
    for k, r in enumerate(ratios):
        chunk = cells[k * len(nets):(k + 1) * len(nets)]
        rows.append(SweepRow(ratio=float(r), T=tuple(c[0] for c in chunk),
                             reasons=tuple(c[1] for c in chunk)))
    return rows
