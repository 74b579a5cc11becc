from tcfinger.plantsim.attacks import TRACKED_PAIRS, scripted_campaign
from tcfinger.plantsim.bench import (
    bench_run,
    bench_transition_times,
    classification_devices,
    entropy_devices,
    five_valve_devices,
)
from tcfinger.plantsim.scenario import (
    ATTACK_TYPES,
    AttackSpec,
    ControlRule,
    DeviceParams,
    Scenario,
    TankParams,
    WatermarkPolicy,
    build_scenario,
    default_scenario,
    load_scenario,
    nominal_device,
    save_scenario,
)
from tcfinger.plantsim.simulator import (
    AttackRecord,
    CriticalEvent,
    DelayRecord,
    GroundTruth,
    load_ground_truth,
    replay_attack,
    save_ground_truth,
    simulate,
)

__all__ = [
    "TRACKED_PAIRS",
    "scripted_campaign",
    "bench_run",
    "bench_transition_times",
    "classification_devices",
    "entropy_devices",
    "five_valve_devices",
    "ATTACK_TYPES",
    "AttackSpec",
    "ControlRule",
    "DeviceParams",
    "Scenario",
    "TankParams",
    "WatermarkPolicy",
    "build_scenario",
    "default_scenario",
    "load_scenario",
    "nominal_device",
    "save_scenario",
    "AttackRecord",
    "CriticalEvent",
    "DelayRecord",
    "GroundTruth",
    "load_ground_truth",
    "replay_attack",
    "save_ground_truth",
    "simulate",
]
