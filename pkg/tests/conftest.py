import json
from pathlib import Path

import pytest

from etmas import config, sim

GOLDEN = json.loads((Path(__file__).parent / "golden_constants.json").read_text())


def build(name, **overrides):
    """Effective config, scenario and network configs of a shipped scenario."""
    cfg = config.apply_overrides(config.load_config(name), **overrides)
    return cfg, config.build_scenario(cfg), config.network_configs(cfg)


def simulate(name, record_every=1, etm=None, **overrides):
    cfg, scen, nets = build(name, **overrides)
    r = cfg["run"]
    return sim.run(scen, nets, horizon=r["horizon"], step=r["step"],
                   etm_mode=etm or r["etm"], record_every=record_every), scen, nets


@pytest.fixture(scope="session")
def golden():
    return GOLDEN


@pytest.fixture(scope="session")
def observer_run():
    """Coupled observers, rho = 0.2 rho_bar, T = (0.2, 0.4), horizon 100."""
    return simulate("observers-coupled")


@pytest.fixture(scope="session")
def robot_runs():
    """Robot-arm runs with the published timing; step 1e-3 keeps the suite fast."""
    return {name: simulate(name, record_every=10, horizon=10.0, step=1e-3)
            for name in ("robot-arms-rr", "robot-arms-tod", "robot-arms-mixed")}
