"""Event-triggered tracking control of networked multi-agent systems.

Hybrid simulation with Round-Robin / Try-Once-Discard scheduling, delayed
transmissions and decentralized event triggers, plus certification of
maximally allowable sampling periods and delays.
"""
from .certify import (CertResult, PhiSolution, masp_delay_free, masp_mad_search, solve_phi,
                      sweep_table)
from .config import build_scenario, load_config, network_configs
from .errors import (ConfigError, ConfigViolation, DegenerateDenominator, DimensionMismatch,
                     EtmasError, InfeasibleInitialization, MissingJacobian,
                     MissingStateLyapunov, NonFiniteState, TauOutOfRange)
from .etm import (CertificateParams, LyapunovData, gamma_centralized, gamma_decentralized,
                  lambda_bar, lambda_bar_centralized, rho_bar, rho_bar_centralized)
from .hybrid import FlowField, HybridState, HybridTime, integrate_flow, rk4_step
from .monitor import MonitorConfig, check_trace, evaluate_U, monitor_config
from .protocols import (NodePartition, ProtocolKind, contraction_factor, protocol_update,
                        rr_update, tod_update)
from .sim import NetworkConfig, Trace, error_norms, event_counts, run

__all__ = [name for name in dir() if not name.startswith("_")]
