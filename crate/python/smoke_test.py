"""Smoke test for the Python bindings. Build first with
`maturin develop -m crates/py/pyproject.toml` or `pip install ./crates/py`."""

import stinger_py as s


def main():
    names = s.preset_names()
    assert "transport" in names, names

    scenario = s.preset("transport", 7).replace("duration = 30.0", "duration = 5.0")
    metrics, log = s.run(scenario)
    assert isinstance(metrics, dict)
    assert log
    assert s.run(scenario)[1] == log
    assert s.replay(scenario, log)["verdict"] == "identical"
    truncated = log.splitlines()[0] + "\n"
    assert s.replay(scenario, truncated)["verdict"] == "diverged"

    mode, site = s.behavior(0.1, 1000.0)
    assert mode == "ICEP", mode

    sim = s.Simulation(scenario)
    sim.control({"type": "set_magnet", "heading": 0.5, "rpm": 60})
    events = sim.step(10)
    assert any(e["kind"] == "FieldChanged" for e in events), events
    assert sim.t > 0
    assert not sim.finished

    try:
        sim.control({"type": "warp"})
    except ValueError:
        pass
    else:
        raise AssertionError("bad action accepted")

    print("ok:", len(names), "presets,", len(log.splitlines()), "events")


if __name__ == "__main__":
    main()
