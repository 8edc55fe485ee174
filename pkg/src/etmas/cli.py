"""Command-line interface: ``etmas simulate | certify | sweep | dump-config``.

Exit codes: 0 success, 2 configuration error or timing-bound violation,
3 numeric blow-up during a simulation, 4 infeasible certificate
initialisation.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .certify import masp_delay_free, masp_mad_search, sweep_table
from .errors import ConfigError, ConfigViolation, InfeasibleInitialization, NonFiniteState
from .etm import lambda_bar
from .monitor import check_trace, monitor_config
from .sim import error_norms, event_counts, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 2, 3, 4
ROBOT_PROTOCOL_SCENARIOS = ("robot-arms-rr", "robot-arms-tod")


def _ratios(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--ratios expects comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True,
                        help="shipped scenario name or custom:<path to YAML>")
    common.add_argument("--horizon", type=float, help="simulation horizon in seconds")
    common.add_argument("--step", type=float, help="integrator step in seconds")
    common.add_argument("--etm", choices=("etc", "ttc", "centralized"), help="trigger mode")
    common.add_argument("--rho-ratio", type=float, dest="rho_ratio",
                        help="rho / rho_bar applied to every network")
    common.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                        help="override a config entry, e.g. net1.Delta=0.002 (repeatable)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")

    parser = argparse.ArgumentParser(prog="etmas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="run a hybrid simulation")
    sim.add_argument("--monitor", action="store_true", default=None,
                     help="evaluate and check the composite Lyapunov function")
    sim.add_argument("--plot", action="store_true", help="also write PNG figures (matplotlib)")
    sub.add_parser("certify", parents=[common], help="compute MASP/MAD per network")
    sw = sub.add_parser("sweep", parents=[common], help="MASP table over rho / rho_bar")
    sw.add_argument("--ratios", type=_ratios, help="comma-separated ratios in [0, 1]")
    sw.add_argument("--plot", action="store_true", help="also write a PNG of the table")
    sub.add_parser("dump-config", parents=[common], help="print the effective configuration")
    return parser


def _load(args):
    cfg = cfgmod.load_config(args.scenario)
    return cfgmod.apply_overrides(cfg, horizon=args.horizon, step=args.step, etm=args.etm,
                                  rho_ratio=args.rho_ratio,
                                  monitor=getattr(args, "monitor", None),
                                  ratios=getattr(args, "ratios", None), sets=args.set)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, allow_nan=False, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serialisable: {type(v).__name__}")


def _finite(v):
    return None if v is None or not math.isfinite(v) else float(v)


# -- simulate ------------------------------------------------------------------
def cmd_simulate(args) -> int:
    cfg = _load(args)
    scen = cfgmod.build_scenario(cfg)
    nets = cfgmod.network_configs(cfg)
    r = cfg["run"]
    mon = monitor_config(scen, nets) if r["monitor"] else None
    trace = run(scen, nets, horizon=r["horizon"], step=r["step"], etm_mode=r["etm"],
                monitor=mon, record_every=r["record_every"])
    args.out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(args.out / "trace.csv")
    trace.to_jsonl(args.out / "trace.jsonl")
    norms = error_norms(trace)
    counts = event_counts(trace)
    summary = {
        "scenario": cfg["scenario"], "etm": r["etm"], "horizon": r["horizon"],
        "step": r["step"], "columns": trace.columns(),
        "networks": [{"name": n["name"], "protocol": n["protocol"], "T": n["T"],
                      "Delta": n["Delta"], "rho": ch.params.rho,
                      "samplings": c.samplings, "fired": c.fired, "updates": c.updates}
                     for n, ch, c in zip(cfg["networks"], scen.channels, counts)],
        "final": {"t": float(norms.t[-1]), "eta_norm": float(norms.eta[-1]),
                  "eax_norm": float(norms.eax[-1]),
                  "eta_parts": [float(v) for v in norms.eta_parts[-1]]},
        "peak": {"eta_norm": float(norms.eta.max()), "eax_norm": float(norms.eax.max())},
        "monitor": check_trace(trace, mon) if mon is not None else None,
    }
    _write_json(args.out / "summary.json", summary)
    for net in summary["networks"]:
        print(f"{net['name']}: samplings={net['samplings']} fired={net['fired']}")
    print(f"final |eta|={summary['final']['eta_norm']:.6g} "
          f"|e_ax|={summary['final']['eax_norm']:.6g}")
    if summary["monitor"] is not None:
        m = summary["monitor"]
        print(f"monitor: jump violations={m['n_jump_violations']} "
              f"flow violations={m['n_flow_violations']} out of range={m['n_out_of_range']}")
    if args.plot:
        _plot_trace(norms, counts, trace, args.out)
    return EXIT_OK


# -- certify -------------------------------------------------------------------
def certify_config(cfg: dict, strict: bool = True) -> list:
    """Certificate per network: delay-free MASP when ``phi0`` is unset, else MASP/MAD search.

    With ``strict`` a ``lambda_bar >= 1`` raises :class:`InfeasibleInitialization`.
    """
    scen_nets = cfgmod.network_configs(cfg)
    out = []
    for k, (net, nc) in enumerate(zip(cfg["networks"], scen_nets)):
        p = cfgmod.certificate_params(net, cfgmod._ratio_for(cfg["run"], k), nc.partition.ell)
        lbar = lambda_bar(p)
        if strict and lbar >= 1.0 - 1e-12:
            raise InfeasibleInitialization(
                f"{net['name']}: lambda_bar={lbar:.6g} >= 1, no admissible phi(0)")
        row = {"name": net["name"], "protocol": net["protocol"], "rho": p.rho,
               "lambda": p.lam, "lambda_bar": lbar}
        if net["phi0"] is None:
            T = masp_delay_free(p)
            row.update(T=T, Delta=0.0, phi0=None, varrho=[p.varrho0, p.varrho1],
                       feasible=T > 0, warnings=[])
        else:
            row.update(masp_mad_search(p, net["phi0"]).as_dict())
        out.append(row)
    return out


def cmd_certify(args) -> int:
    cfg = _load(args)
    rows = certify_config(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_json(args.out / "cert.json", {"scenario": cfg["scenario"],
                                         "rho_ratio": cfg["run"]["rho_ratio"],
                                         "networks": rows})
    for r in rows:
        print(f"{r['name']} ({r['protocol']}): T={r['T']:.6g} Delta={r['Delta']:.6g} "
              f"phi0={r['phi0']} varrho={r['varrho']}")
    return EXIT_OK


# -- sweep ---------------------------------------------------------------------
def cmd_sweep(args) -> int:
    cfg = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    if cfg["kind"] == "robot-arms":
        return _protocol_sweep(args, cfg)
    ratios = cfg["run"].get("ratios") or [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    nets = cfgmod.network_configs(cfg)
    params = [cfgmod.certificate_params(n, 0.0, nc.partition.ell)
              for n, nc in zip(cfg["networks"], nets)]
    rows = sweep_table(params, ratios)
    names = [n["name"] for n in cfg["networks"]]
    with open(args.out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ratio", *(f"T_{n}" for n in names)])
        for row in rows:
            w.writerow([repr(row.ratio), *("" if v is None else repr(v) for v in row.T)])
    for row in rows:
        cells = " ".join("  failed" if v is None else f"{v:8.4f}" for v in row.T)
        print(f"{row.ratio:4.2f} {cells}")
        for reason in filter(None, row.reasons):
            print(f"     {reason}", file=sys.stderr)
    if args.plot:
        _plot_sweep(rows, names, args.out)
    return EXIT_OK


def _protocol_sweep(args, cfg) -> int:
    """RR versus TOD certificates of the robot arms (one row per protocol)."""
    rows = []
    for name in ROBOT_PROTOCOL_SCENARIOS:
        other = cfgmod.load_config(name)
        other["run"]["rho_ratio"] = cfg["run"]["rho_ratio"]
        certs = certify_config(other, strict=False)
        rows.append([other["networks"][0]["protocol"]]
                    + [v for c in certs for v in (c["T"], c["Delta"])])
    header = ["protocol"] + [f"{q}_{n['name']}" for n in cfg["networks"] for q in ("T", "Delta")]
    with open(args.out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
    for row in rows:
        print(row[0], " ".join(f"{v:.6g}" for v in row[1:]))
    return EXIT_OK


# -- dump-config ---------------------------------------------------------------
def cmd_dump_config(args) -> int:
    text = cfgmod.dump_config(_load(args))
    if args.out != Path("."):
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "config.yaml").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# -- optional figures ----------------------------------------------------------
def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ConfigError("--plot needs matplotlib (install the 'plot' extra)") from exc
    return plt


def _plot_trace(norms, counts, trace, out: Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    for k in range(norms.eta_parts.shape[1]):
        ax[0].plot(norms.t, norms.eta_parts[:, k], label=f"|eta_{k + 1}|")
    ax[0].legend()
    ax[1].plot(norms.t, norms.eax, label="|e_ax|")
    ax[1].set_xlabel("t")
    ax[1].legend()
    fig.savefig(out / "norms.png", dpi=120)
    fig, ax = plt.subplots(figsize=(7, 2.5))
    for i, times in enumerate(trace.sampling_times):
        fired = trace.t[(trace.net == i) & (trace.event == 1)]
        ax.plot(fired, np.full(len(fired), i + 1), "|", label=f"net{i + 1} transmissions")
    ax.set_xlabel("t")
    fig.savefig(out / "events.png", dpi=120)
    plt.close("all")


def _plot_sweep(rows, names, out: Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ratios = [r.ratio for r in rows]
    for k, n in enumerate(names):
        ax.plot(ratios, [np.nan if r.T[k] is None else r.T[k] for r in rows], "o-", label=n)
    ax.set_xlabel("rho / rho_bar")
    ax.set_ylabel("MASP")
    ax.legend()
    fig.savefig(out / "sweep.png", dpi=120)
    plt.close("all")


COMMANDS = {"simulate": cmd_simulate, "certify": cmd_certify, "sweep": cmd_sweep,
            "dump-config": cmd_dump_config}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ConfigViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteState as exc:
        print(f"error: numeric blow-up: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InfeasibleInitialization as exc:
        print(f"error: infeasible certificate: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
