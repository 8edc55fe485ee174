"""Declarative scenario configuration: loading, overrides, validation, building.

Configurations are YAML documents with three sections: ``model``,
``networks`` (one entry per network) and ``run``.  Shipped scenarios live in
``etmas/scenarios``; every published constant is stored there, never in
code.  :func:`dump_config` emits a document that reloads to an identical
effective configuration.
"""
from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import yaml

from .errors import ConfigError, ConfigViolation
from .etm import CertificateParams
from .models import (ROBOT_PARTITION, ObserverModel, RobotArmParams, Scenario,
                     observer_scenario, robot_arm_scenario)
from .protocols import NodePartition, ProtocolKind, contraction_factor
from .sim import (ConstantDelay, ConstantInterval, NetworkConfig, SequenceDelay,
                  SequenceInterval)

SHIPPED = ("robot-arms-rr", "robot-arms-tod", "robot-arms-mixed",
           "observers-decoupled", "observers-coupled")

_CERT_KEYS = {"lambda": "lam", "L0": "L0", "L1": "L1", "Lbar0": "Lbar0", "Lbar1": "Lbar1",
              "gamma0": "gamma0", "gamma1": "gamma1", "theta0": "theta0", "theta1": "theta1",
              "mu": "mu", "varrho0": "varrho0", "varrho1": "varrho1", "rho_bar": "rho_bar_value"}
_RUN_DEFAULTS = {"horizon": 10.0, "step": 1e-4, "etm": "etc", "rho_ratio": 0.5,
                 "record_every": 1, "monitor": False}


def load_config(name: str) -> dict:
    """Load a shipped scenario by name or a file given as ``custom:<path>`` (or a path)."""
    if name.startswith("custom:"):
        path = Path(name[len("custom:"):])
    elif name in SHIPPED:
        path = None
    elif name.endswith((".yaml", ".yml")) or Path(name).exists():
        path = Path(name)
    else:
        raise ConfigError(f"unknown scenario {name!r}; choose one of {', '.join(SHIPPED)} "
                          f"or custom:<path>")
    try:
        if path is None:
            text = resources.files("etmas").joinpath(f"scenarios/{name}.yaml").read_text()
        else:
            text = path.read_text()
        cfg = yaml.safe_load(text)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read scenario {name!r}: {exc}") from exc
    return normalize(cfg)


def _num(v, where: str, allow_none: bool = False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {v!r}") from None


def _nums(v, where: str) -> list:
    if isinstance(v, (int, float, str)) and not isinstance(v, bool):
        return _num(v, where)
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{where}: expected a number or a list, got {v!r}")
    return [_nums(x, f"{where}[{k}]") for k, x in enumerate(v)]


def normalize(cfg) -> dict:
    """Validate structure and coerce numbers so that equal configs compare equal."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a mapping")
    for key in ("scenario", "kind", "model", "networks"):
        if key not in cfg:
            raise ConfigError(f"configuration lacks the {key!r} section")
    kind = cfg["kind"]
    if kind not in ("robot-arms", "observers"):
        raise ConfigError(f"unknown scenario kind {kind!r}")
    out = {"scenario": str(cfg["scenario"]), "kind": kind}
    out["model"] = _normalize_model(kind, cfg["model"])
    nets = cfg["networks"]
    if not isinstance(nets, list) or not nets:
        raise ConfigError("networks must be a nonempty list")
    expected = 2
    if len(nets) != expected:
        raise ConfigError(f"{kind} scenarios need exactly {expected} networks")
    out["networks"] = [_normalize_net(n, k) for k, n in enumerate(nets)]
    run = dict(_RUN_DEFAULTS)
    run.update(cfg.get("run") or {})
    out["run"] = _normalize_run(run)
    return out


def _normalize_model(kind: str, m) -> dict:
    if not isinstance(m, dict):
        raise ConfigError("model must be a mapping")
    m = copy.deepcopy(m)
    if kind == "robot-arms":
        req = ("gravity", "arm", "c", "b", "omega_f", "q_p0", "q_rf0", "v_weights")
    else:
        req = ("coupled", "A", "B", "C", "J", "J_nb", "chi", "adjacency", "x_p0", "x_ob0",
               "theta0")
    for key in req:
        if key not in m:
            raise ConfigError(f"model lacks {key!r}")
    for key, val in list(m.items()):
        if key in ("coupled",):
            m[key] = bool(val)
        elif key == "J_nb":
            m[key] = [[int(a), int(b), _nums(g, "model.J_nb")] for a, b, g in val]
        elif key == "v_design":
            m[key] = {k: _num(v, f"model.v_design.{k}") for k, v in val.items()}
        else:
            m[key] = _nums(val, f"model.{key}")
    if kind == "observers":
        m.setdefault("storage_scale", 0.5)
    return m


def _normalize_net(n, k: int) -> dict:
    if not isinstance(n, dict):
        raise ConfigError(f"networks[{k}] must be a mapping")
    where = f"networks[{k}]"
    out = {"name": str(n.get("name", f"net{k + 1}"))}
    try:
        out["protocol"] = ProtocolKind.parse(n.get("protocol", "rr")).value
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if n.get("order") is not None:
        out["order"] = [int(v) for v in n["order"]]
    for key in ("T", "Delta", "epsilon"):
        if key not in n:
            raise ConfigError(f"{where} lacks {key!r}")
        out[key] = _num(n[key], f"{where}.{key}")
    for key in ("h", "delay"):
        if n.get(key) is not None:
            out[key] = _nums(n[key], f"{where}.{key}")
    if n.get("rho") is not None:
        out["rho"] = _num(n["rho"], f"{where}.rho")
    cert = n.get("certificate")
    if not isinstance(cert, dict):
        raise ConfigError(f"{where} lacks a certificate mapping")
    unknown = set(cert) - set(_CERT_KEYS)
    if unknown:
        raise ConfigError(f"{where}.certificate: unknown keys {sorted(unknown)}")
    out["certificate"] = {key: _num(cert.get(key), f"{where}.certificate.{key}",
                                    allow_none=key in ("lambda", "rho_bar"))
                          for key in _CERT_KEYS if key in cert}
    phi0 = n.get("phi0")
    out["phi0"] = None if phi0 is None else [_num(v, f"{where}.phi0") for v in phi0]
    if n.get("published") is not None:
        out["published"] = copy.deepcopy(n["published"])
    return out


def _normalize_run(run: dict) -> dict:
    out = {}
    for key, val in run.items():
        if key in ("horizon", "step"):
            out[key] = _num(val, f"run.{key}")
        elif key == "rho_ratio":
            out[key] = _nums(val, "run.rho_ratio")
        elif key == "ratios":
            out[key] = [_num(v, "run.ratios") for v in val]
        elif key == "record_every":
            out[key] = int(val)
        elif key == "monitor":
            out[key] = bool(val)
        elif key == "etm":
            if str(val) not in ("etc", "ttc", "centralized"):
                raise ConfigError(f"run.etm must be etc, ttc or centralized, got {val!r}")
            out[key] = str(val)
        else:
            raise ConfigError(f"run: unknown key {key!r}")
    if out["horizon"] <= 0 or out["step"] <= 0:
        raise ConfigError("run.horizon and run.step must be positive")
    return out


def apply_overrides(cfg: dict, horizon=None, step=None, etm=None, rho_ratio=None,
                    monitor=None, ratios=None, sets: Iterable[str] = ()) -> dict:
    """Return a copy of ``cfg`` with command-line overrides applied and re-validated.

    ``sets`` holds ``PATH=VALUE`` strings; ``PATH`` is dotted and may start
    with a network name, e.g. ``net1.Delta=0.01`` or ``run.record_every=5``.
    """
    out = copy.deepcopy(cfg)
    run = out["run"]
    for key, val in (("horizon", horizon), ("step", step), ("etm", etm),
                     ("rho_ratio", rho_ratio), ("monitor", monitor), ("ratios", ratios)):
        if val is not None:
            run[key] = val
    names = {n["name"]: n for n in out["networks"]}
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form PATH=VALUE")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        value = yaml.safe_load(raw)
        node = names.get(keys[0])
        keys = keys[1:] if node is not None else keys
        node = out if node is None else node
        for key in keys[:-1]:
            if isinstance(node, list):
                node = node[int(key)]
            else:
                node = node.setdefault(key, {})
        if isinstance(node, list):
            node[int(keys[-1])] = value
        else:
            node[keys[-1]] = value
    return normalize(out)


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None, width=100)


def certificate_params(net: dict, rho_ratio: float, n_nodes: int) -> CertificateParams:
    """Certificate parameters of one network with ``rho = rho_ratio * rho_bar`` unless pinned."""
    kw = {_CERT_KEYS[k]: v for k, v in net["certificate"].items()}
    if kw.get("lam") is None:
        kw["lam"] = contraction_factor(ProtocolKind.parse(net["protocol"]),
                                       NodePartition.scalar(n_nodes))
    try:
        p = CertificateParams(**kw)
    except ValueError as exc:
        raise ConfigError(f"{net['name']}: {exc}") from None
    if "rho" in net:
        return CertificateParams(**{**kw, "rho": net["rho"]})
    return p.with_rho_ratio(rho_ratio)


def _ratio_for(run: dict, k: int) -> float:
    r = run["rho_ratio"]
    return float(r[k]) if isinstance(r, list) else float(r)


def network_configs(cfg: dict) -> list:
    """Timing/protocol configuration of every network (validated)."""
    out = []
    for net in cfg["networks"]:
        part = ROBOT_PARTITION if cfg["kind"] == "robot-arms" else NodePartition((3,))
        h = net.get("h", net["T"])
        d = net.get("delay", net["Delta"])
        nc = NetworkConfig(
            T=net["T"], Delta=net["Delta"], epsilon=net["epsilon"], partition=part,
            protocol=ProtocolKind.parse(net["protocol"]),
            sampling=SequenceInterval(tuple(h)) if isinstance(h, list) else ConstantInterval(h),
            delay=SequenceDelay(tuple(d)) if isinstance(d, list) else ConstantDelay(d),
            order=tuple(net["order"]) if net.get("order") else None)
        try:
            nc.validate()
        except ConfigViolation as exc:
            raise ConfigViolation(f"{net['name']}: {exc}") from None
        out.append(nc)
    return out


def build_scenario(cfg: dict) -> Scenario:
    """Instantiate the :class:`~etmas.models.Scenario` described by ``cfg``."""
    m, run = cfg["model"], cfg["run"]
    nets = network_configs(cfg)
    params = [certificate_params(n, _ratio_for(run, k), nc.partition.ell)
              for k, (n, nc) in enumerate(zip(cfg["networks"], nets))]
    meta = {"config": cfg}
    if cfg["kind"] == "robot-arms":
        prm = RobotArmParams(a=tuple(m["gravity"] * np.asarray(m["arm"])), c=tuple(m["c"]),
                             b=tuple(map(tuple, m["b"])), omega_f=m["omega_f"])
        return robot_arm_scenario(
            protocols=[n["protocol"] for n in cfg["networks"]], params=params, nets=nets,
            prm=prm, q_p0=m["q_p0"], q_rf0=m["q_rf0"],
            phi0=[n["phi0"] for n in cfg["networks"]], v_weights=m["v_weights"],
            orders=[n.get("order") for n in cfg["networks"]], horizon=run["horizon"],
            step=run["step"], name=cfg["scenario"], meta=meta)
    model = ObserverModel(A=m["A"], B=m["B"], C=m["C"], J=m["J"],
                          J_nb={(a - 1, b - 1): g for a, b, g in m["J_nb"]}, chi=m["chi"],
                          adjacency=m["adjacency"], coupled=m["coupled"])
    return observer_scenario(model, params, nets, m["x_p0"], m["x_ob0"], m["theta0"],
                             storage_scale=m["storage_scale"], horizon=run["horizon"],
                             step=run["step"], name=cfg["scenario"], meta=meta)


def scenario(name: str, **overrides) -> Scenario:
    """Convenience: load, override and build in one call."""
    return build_scenario(apply_overrides(load_config(name), **overrides))
