"""LoRa/LoRaWAN discrete-event simulator."""

from os import PathLike
from pathlib import Path

from ._core import (
    ArgumentError,
    FirmwareFault,
    FirmwareLoadError,
    IoError,
    RunOutputs,
    Scenario,
    ScenarioError,
    StateError,
    aes_cmac,
    load_scenario,
    parse_scenario,
    run_scenario,
    set_log_level,
    time_on_air,
)

__all__ = [
    "ArgumentError",
    "FirmwareFault",
    "FirmwareLoadError",
    "IoError",
    "RunOutputs",
    "Scenario",
    "ScenarioError",
    "StateError",
    "aes_cmac",
    "load_scenario",
    "parse_scenario",
    "run",
    "run_scenario",
    "set_log_level",
    "time_on_air",
]


def run(scenario, *, seed=None, length_s=None, out=None):
    """Run a scenario given as a Scenario, a file path or JSON text.

    `seed` and `length_s` override the scenario's values. With `out`, the three tables are
    written to that directory.
    """
    if isinstance(scenario, Scenario):
        spec = parse_scenario(scenario.render())  # overrides must not touch the caller's object
    elif isinstance(scenario, PathLike) or (isinstance(scenario, str) and not scenario.lstrip().startswith("{")):
        spec = load_scenario(Path(scenario))
    else:
        spec = parse_scenario(scenario)
    if seed is not None:
        spec.seed = seed
    if length_s is not None:
        spec.length_s = length_s
    outputs = run_scenario(spec)
    if out is not None:
        outputs.export(Path(out))
    return outputs
