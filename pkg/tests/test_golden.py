"""Shipped scenario files must carry the published constants bit-exactly."""
import pytest

from etmas import config

CERT_KEYS = ("L0", "L1", "gamma0", "gamma1")


@pytest.mark.parametrize("name", ["robot-arms-rr", "robot-arms-tod"])
def test_robot_constants_bit_exact(golden, name):
    cfg = config.load_config(name)
    for net in cfg["networks"]:
        g = golden[name][net["name"]]
        for key in CERT_KEYS:
            assert net["certificate"][key] == g[key], (net["name"], key)
        assert net["certificate"]["rho_bar"] == g["rho_bar"]
        assert net["phi0"] == g["phi0"]
        assert (net["T"], net["Delta"]) == (g["T"], g["Delta"])
        assert net["published"] == g["published"]


def test_mixed_scenario_reuses_protocol_constants(golden):
    cfg = config.load_config("robot-arms-mixed")
    rr, tod = cfg["networks"]
    assert {k: rr["certificate"][k] for k in CERT_KEYS} == {
        k: golden["robot-arms-rr"]["net1"][k] for k in CERT_KEYS}
    assert {k: tod["certificate"][k] for k in CERT_KEYS} == {
        k: golden["robot-arms-tod"]["net2"][k] for k in CERT_KEYS}


@pytest.mark.parametrize("name", ["observers-coupled", "observers-decoupled"])
def test_observer_constants_bit_exact(golden, name):
    cfg = config.load_config(name)
    g = golden["observers-coupled"]
    for key, value in g["model"].items():
        assert cfg["model"][key] == value, key
    for net in cfg["networks"]:
        gn = g[net["name"]]
        c = net["certificate"]
        assert (c["L0"], c["gamma0"], c["lambda"], c["mu"], c["theta0"]) == (
            gn["L0"], gn["gamma0"], gn["lambda"], gn["mu"], gn["theta0"])
        assert net["T"] == gn["T"] and net["published"] == gn["published"]
