"""Event-triggering mechanisms and the bookkeeping of the two jump families.

At a sampling instant network ``i`` evaluates ``Gamma_i`` and transmits iff
``Gamma_i >= 0``.  The sampling jump stores the protocol correction in the
buffer ``m_i`` and bumps the counter ``kappa_i``; the arrival jump applies the
buffer to the error.  Constants follow the emulation-style certificate: a
protocol contraction ``lambda``, flow growth ``L``, gains ``gamma`` and
trigger aggressiveness ``rho``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DegenerateDenominator, MissingStateLyapunov


@dataclass(frozen=True)
class CertificateParams:
    """Scalar certificate data of one network (mode ``b = 0`` and ``b = 1``).

    ``varrho0``/``varrho1`` are the slack constants entering the Riccati ODE.
    ``rho_bar_value`` optionally pins the admissible upper bound for ``rho``
    when it was computed outside this library; otherwise :func:`rho_bar` is
    used.
    """

    lam: float = 0.0
    L0: float = 0.0
    L1: float = 0.0
    Lbar0: float = 0.0
    Lbar1: float = 0.0
    gamma0: float = 1.0
    gamma1: float = 1.0
    theta0: float = 1.0
    theta1: float = 1.0
    mu: float = 1.0
    varrho0: float = 1e-9
    varrho1: float = 1e-9
    rho: float = 0.0
    rho_bar_value: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValueError(f"lambda must lie in [0, 1), got {self.lam}")
        if self.gamma0 <= 0 or self.gamma1 <= 0:
            raise ValueError("gamma0 and gamma1 must be positive")
        if self.L0 < 0 or self.L1 < 0:
            raise ValueError("L0 and L1 must be nonnegative")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")

    @property
    def rho_max(self) -> float:
        """Upper bound on ``rho``: the pinned value or :func:`rho_bar`."""
        if self.rho_bar_value is not None:
            return float(self.rho_bar_value)
        return rho_bar(self.Lbar0, self.gamma0)

    def with_rho_ratio(self, ratio: float) -> "CertificateParams":
        """Copy with ``rho = ratio * rho_max``."""
        return replace(self, rho=float(ratio) * self.rho_max)

    def gamma(self, b: int) -> float:
        return self.gamma0 if b == 0 else self.gamma1

    def L(self, b: int) -> float:
        return self.L0 if b == 0 else self.L1

    def varrho(self, b: int) -> float:
        return self.varrho0 if b == 0 else self.varrho1


def _zero(*_args) -> float:
    return 0.0


@dataclass(frozen=True)
class LyapunovData:
    """User-supplied storage functions of one network.

    ``W(e, m, kappa, b)`` bounds the network-induced error; ``phi_fn(z)`` is
    the trigger storage evaluated on the transmitted signal; ``V(x)`` is the
    optional state Lyapunov function needed by the centralized trigger.
    ``bound_fns`` may hold optional class-K slack callbacks for the monitor.
    """

    W: Callable[..., float]
    phi_fn: Callable[[np.ndarray], float] = _zero
    V: Optional[Callable[[np.ndarray], float]] = None
    bound_fns: Mapping[str, Callable] = field(default_factory=dict)


def rho_bar(Lbar0: float, gamma0: float) -> float:
    """Admissible bound on ``rho``: 1 if ``Lbar0 <= -gamma0`` else ``min(1, 1/(Lbar0 + gamma0))``."""
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    if Lbar0 <= -gamma0:
        return 1.0
    return min(1.0, 1.0 / (Lbar0 + gamma0))


def lambda_bar(p: CertificateParams) -> float:
    """``max(lambda, rho * gamma0 / (1 - rho * Lbar0))``."""
    denom = 1.0 - p.rho * p.Lbar0
    if denom <= 0:
        raise DegenerateDenominator(f"1 - rho*Lbar0 = {denom} is not positive")
    return max(p.lam, p.rho * p.gamma0 / denom)


def rho_bar_centralized(p: CertificateParams) -> float:
    """Centralized bound ``min(1, mu / gamma0)``."""
    return min(1.0, p.mu / p.gamma0)


def lambda_bar_centralized(p: CertificateParams) -> float:
    """Centralized ``lambda * max(1, gamma0 / mu)``."""
    return p.lam * max(1.0, p.gamma0 / p.mu)


def gamma_decentralized(z, e, m, kappa: int, b: int, p: CertificateParams,
                        lyap: LyapunovData, lbar: Optional[float] = None) -> float:
    """Decentralized trigger ``(1-2b) gamma_b W^2 - (1-b) rho lbar phi(z)``.

    A sampling fires iff the returned value is ``>= 0``; during a delay
    interval (``b = 1``) the value is ``-gamma1 W^2 <= 0``.
    """
    lbar = lambda_bar(p) if lbar is None else lbar
    w = float(lyap.W(e, m, kappa, b))
    hold = 0.0 if b else p.rho * lbar * float(lyap.phi_fn(z))
    return (1 - 2 * b) * p.gamma(b) * w * w - hold


def gamma_centralized(x, e, m, kappa: int, b: int, p: CertificateParams,
                      lyap: LyapunovData, lbar: Optional[float] = None) -> float:
    """Centralized trigger ``(1-2b) gamma_b W^2 - (1-b) rho lbar V(x)``."""
    if lyap.V is None:
        raise MissingStateLyapunov("centralized trigger needs a state Lyapunov function V")
    lbar = lambda_bar_centralized(p) if lbar is None else lbar
    w = float(lyap.W(e, m, kappa, b))
    hold = 0.0 if b else p.rho * lbar * float(lyap.V(x))
    return (1 - 2 * b) * p.gamma(b) * w * w - hold


def fires(gamma_value: float) -> bool:
    """Trigger decision; the boundary ``Gamma = 0`` counts as fired."""
    return gamma_value >= 0.0


def apply_transmission(e, m, kappa: int, fired: bool, protocol_out) -> tuple:
    """Buffer/counter part of the sampling jump.

    Fired: ``m' = h(kappa, e) - e`` and ``kappa' = kappa + 1``.  Otherwise the
    buffer and counter are unchanged.  (The mode flag flips 0 -> 1 either way;
    that is handled by the caller.)
    """
    e = np.asarray(e, float)
    if fired:
        return np.asarray(protocol_out, float) - e, int(kappa) + 1
    return np.array(m, float, copy=True), int(kappa)


def apply_update(e, m, fired_at_sampling: bool) -> tuple:
    """Error/buffer part of the arrival jump.

    ``e' = e + m`` if the matching sampling fired, else ``e' = e``;
    ``m' = -e - m`` in both cases (computed from the pre-jump values).
    """
    e = np.asarray(e, float)
    m = np.asarray(m, float)
    new_e = e + m if fired_at_sampling else e.copy()
    return new_e, -e - m
