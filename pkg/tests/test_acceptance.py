"""Acceptance criteria; each test prints one PASS/FAIL line."""
import math
import time
import warnings

import numpy as np
import pytest

from conftest import build, simulate
from etmas import config
from etmas.certify import masp_mad_search, solve_phi, sweep_table
from etmas.etm import apply_transmission, apply_update, rho_bar
from etmas.hybrid import FlowField, HybridState, integrate_flow
from etmas.monitor import check_trace, monitor_config
from etmas.protocols import (NodePartition, ProtocolKind, contraction_factor, rr_update,
                             tod_node, tod_update)
from etmas.sim import Event, error_norms, event_counts


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title} -- {detail}")
        assert ok, detail
    return emit


def rel_err(got, want):
    return abs(got - want) / abs(want)


def test_criterion_1_masp_table(verdict, golden):
    cfg = config.load_config("observers-coupled")
    nets = config.network_configs(cfg)
    params = [config.certificate_params(n, 0.0, nc.partition.ell)
              for n, nc in zip(cfg["networks"], nets)]
    ratios = [round(0.1 * k, 1) for k in range(11)]
    t0 = time.perf_counter()
    rows = sweep_table(params, ratios)
    elapsed = time.perf_counter() - t0
    bad = []
    for col, net in enumerate(("net1", "net2")):
        for row, want in zip(rows, golden["observers-coupled"][net]["published"]["table_T"]):
            got = row.T[col]
            ok = got == 0.0 if want == 0.0 else (got is not None and rel_err(got, want) <= 0.05)
            if not ok:
                bad.append(f"{net}@{row.ratio}: {got:.4f} vs {want}")
    verdict(1, "MASP table over rho/rho_bar", not bad and elapsed < 5.0,
            f"{22 - len(bad)}/22 cells within 5%, {elapsed:.2f}s; off: {', '.join(bad[:6])}"
            + (" ..." if len(bad) > 6 else ""))


def test_criterion_2_masp_mad_search(verdict, golden):
    bad, shown = [], []
    for name in ("robot-arms-rr", "robot-arms-tod"):
        cfg = config.load_config(name)
        for net, nc in zip(cfg["networks"], config.network_configs(cfg)):
            p = config.certificate_params(net, cfg["run"]["rho_ratio"], nc.partition.ell)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                r = masp_mad_search(p, net["phi0"])
            want = golden[name][net["name"]]["published"]
            shown.append(f"{name}/{net['name']} T={r.T:.5f} (pub {want['T']}), "
                         f"Delta={r.Delta:.5f} (pub {want['Delta']})")
            for got, key in ((r.T, "T"), (r.Delta, "Delta")):
                if rel_err(got, want[key]) > 0.05:
                    bad.append(f"{name}/{net['name']}.{key}")
    verdict(2, "MASP/MAD with published robot-arm constants", not bad,
            "; ".join(shown))


def test_criterion_3_derived_constants(verdict):
    r1, r2 = rho_bar(0.0, 1.7243), rho_bar(0.0, 1.5045)
    lam = contraction_factor(ProtocolKind.ROUND_ROBIN, NodePartition.scalar(3))
    ok = (float(f"{r1:.4g}") == 0.5799 and float(f"{r2:.4g}") == 0.6647
          and round(lam, 6) == 0.816497)
    verdict(3, "derived constants", ok, f"rho_bar=({r1:.4g}, {r2:.4g}), lambda(3)={lam:.6f}")


def test_criterion_4_event_counts(verdict, observer_run, golden):
    counts = event_counts(observer_run[0])
    fired = [c.fired for c in counts]
    samplings = [c.samplings for c in counts]
    want_f = [golden["observers-coupled"][n]["published"]["fired"] for n in ("net1", "net2")]
    ok = samplings == [500, 250] and all(abs(f - w) <= 0.05 * w for f, w in zip(fired, want_f))
    verdict(4, "observer event counts", ok,
            f"samplings={samplings} (want [500, 250]), fired={fired} (want {want_f} +-5%)")


def test_criterion_5_convergence(verdict, observer_run, robot_runs):
    n = error_norms(observer_run[0])
    init = n.eta_parts[0]
    late = n.eta_parts[n.t >= 60.0]
    ok_a = bool(np.all(late < 0.05 * init))
    parts = [f"observers max|eta_i|/|eta_i(0)| after t=60: "
             f"{np.max(late[:, 0]) / init[0]:.3f}, {np.max(late[:, 1]) / init[1]:.3f}"]
    ok_b = True
    for name, (tr, _, _) in robot_runs.items():
        rn = error_norms(tr)
        peak = float(np.max(rn.eta))
        tail = float(np.max(rn.eta[rn.t >= rn.t[-1] - 1.0]))
        good = np.all(np.isfinite(rn.eta)) and tail <= 0.1 * peak
        ok_b &= bool(good)
        parts.append(f"{name} final/peak={tail / peak:.4f}")
    verdict(5, "convergence (observers by t=60; robot arms below 10% of peak)", ok_a and ok_b,
            "; ".join(parts))


def test_criterion_6_protocol_properties(verdict):
    rng = np.random.default_rng(6)
    reset = contraction = ties = True
    for _ in range(1000):
        ell = int(rng.integers(1, 13))
        part = NodePartition.scalar(ell)
        e = rng.normal(size=ell)
        cur = e
        for kappa in range(1, ell + 1):
            cur = rr_update(kappa, cur, part)
        reset &= bool(np.all(cur == 0.0))
        lam = contraction_factor(ProtocolKind.TRY_ONCE_DISCARD, part)
        contraction &= bool(np.linalg.norm(tod_update(e, part))
                            <= lam * np.linalg.norm(e) * (1 + 1e-12))
        tie = np.abs(e).max() * np.sign(rng.normal(size=ell))
        ties &= tod_node(tie, part) == 0 and tod_node(tie, part) == tod_node(tie.copy(), part)
    verdict(6, "protocol properties", reset and contraction and ties,
            f"RR cycle reset={reset}, TOD contraction={contraction}, tie-break={ties}")


def test_criterion_7_numerical_oracles(verdict):
    sol = solve_phi(0.0, 1.0, 0.0, 1.0, 1.0)
    cross_err = abs(sol.crossing - math.pi / 4)
    field = FlowField(f=lambda d, x, e, w: -x, g=lambda d, x, e, w: np.zeros_like(e))
    errs = []
    for h in (0.2, 0.1, 0.05, 0.025):
        s = HybridState.initial([1.0], [0.0], [slice(0, 1)])
        errs.append(abs(integrate_flow(s, field, 1.0, step=h).x[0] - math.exp(-1.0)))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = cross_err < 1e-5 and all(r >= 8.0 for r in ratios)
    verdict(7, "numerical oracles", ok,
            f"tangent crossing error={cross_err:.1e}; RK4 error ratios on halving="
            f"{', '.join(f'{r:.1f}' for r in ratios)}")


def test_criterion_8_hybrid_structure(verdict):
    checks = {}
    runs = [simulate("robot-arms-mixed", horizon=0.5, step=1e-3),
            simulate("observers-coupled", horizon=10.0)]
    locality = alternation = zeno = True
    for tr, _, nets in runs:
        for k in np.flatnonzero(tr.net >= 0):
            i = tr.net[k]
            for o in range(tr.n_networks):
                if o != i:
                    p = tr.parts[o]
                    locality &= (tr.e[k, p].tobytes() == tr.e[k - 1, p].tobytes()
                                 and tr.m[k, p].tobytes() == tr.m[k - 1, p].tobytes()
                                 and tr.tau[k, o] == tr.tau[k - 1, o]
                                 and tr.kappa[k, o] == tr.kappa[k - 1, o]
                                 and tr.b[k, o] == tr.b[k - 1, o])
        for i in range(tr.n_networks):
            ev = tr.event[tr.net == i]
            upd = ev == Event.UPDATED
            alternation &= bool(np.all(upd[1::2]) and not np.any(upd[0::2]))
            gaps = np.diff((0.0,) + tr.sampling_times[i])
            zeno &= bool(np.all(gaps >= nets[i].epsilon))
    checks["mask-locality"] = locality
    checks["mode alternation"] = alternation
    checks["inter-sampling>=eps"] = zeno
    rng = np.random.default_rng(8)
    comp = True
    for _ in range(1000):
        ell = int(rng.integers(1, 6))
        part = NodePartition.scalar(ell)
        e, m, kappa = rng.normal(size=ell), rng.normal(size=ell), int(rng.integers(1, 50))
        h = rr_update(kappa, e, part)
        m1, _ = apply_transmission(e, m, kappa, True, h)
        e2, _ = apply_update(e, m1, True)
        comp &= bool(np.allclose(e2, h, rtol=0, atol=1e-12))
    checks["zero-delay composition"] = comp
    a = simulate("robot-arms-mixed", horizon=0.2, step=1e-3)[0]
    b = simulate("robot-arms-mixed", horizon=0.2, step=1e-3)[0]
    checks["determinism"] = all(getattr(a, f).tobytes() == getattr(b, f).tobytes()
                                for f in ("t", "j", "x", "e", "m", "tau", "kappa", "b"))
    verdict(8, "hybrid-model structure", all(checks.values()),
            ", ".join(f"{k}={v}" for k, v in checks.items()))


def test_criterion_9_monitor_falsification(verdict, observer_run):
    tr, scen, nets = observer_run
    good = check_trace(tr, monitor_config(scen, nets), slack=1e-9)
    tr3, scen3, nets3 = simulate("observers-coupled",
                                 sets=[f"net1.T={3 * nets[0].T}", f"net2.T={3 * nets[1].T}"])
    probe = check_trace(tr3, monitor_config(scen3, nets3), slack=1e-9)
    flagged = probe["n_jump_violations"] + probe["n_out_of_range"]
    ok = good["n_jump_violations"] == 0 and not probe["passed"] and flagged > 0
    verdict(9, "monitor falsification", ok,
            f"certified: {good['n_jump_violations']} jump violations; 3xT: "
            f"{probe['n_jump_violations']} jump violations, {probe['n_out_of_range']} rows "
            f"outside the certified timer range")
