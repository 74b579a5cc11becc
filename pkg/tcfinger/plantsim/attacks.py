"""
Scripted attack campaigns over the default plant.

Attacks are laid out in fixed slots so that an attack, the wait for its
target operation and the detection grace period never reach the next slot.
Stuck and swapped sensor attacks hit the tank level sensors, which no
Time Constant is measured on.
"""

from typing import List, Sequence, Tuple

import numpy as np

from tcfinger.plantsim.scenario import ATTACK_TYPES, AttackSpec

TRACKED_PAIRS: Tuple[Tuple[str, str], ...] = (("MV101", "FIT101"), ("MV201", "FIT201"), ("P302", "FIT301"))
LEVEL_SENSORS = ("LIT101", "LIT301")

SLOT_SPACING_S = 2000.0
MAX_WAIT_S = 1500.0
START_JITTER_S = 200.0


def _spec(kind: str, index: int, start: int, rng: np.random.Generator, pairs: Sequence[Tuple[str, str]]) -> AttackSpec:
    actuator, sensor = pairs[index % len(pairs)]
    if kind == "A1":
        return AttackSpec(type="A1", targets=[LEVEL_SENSORS[index % 2]], start_idx=start, duration=30)
    if kind == "B1":
        target = "MV101" if index % 2 == 0 else "P302"
        command = "on" if (index // 2) % 2 == 0 else "off"
        return AttackSpec(type="B1", targets=[target], start_idx=start, duration=120, params={"command": command})
    if kind == "C1":
        return AttackSpec(type="C1", targets=[actuator], start_idx=start, duration=30, params={"period_s": 3.0})
    if kind == "D1":
        sigmoid = float(rng.uniform(4.0, 80.0))
        return AttackSpec(type="D1", targets=[actuator, sensor], start_idx=start, duration=120,
                          params={"sigmoid_s": sigmoid, "max_wait_s": MAX_WAIT_S})
    if kind == "D2":
        return AttackSpec(type="D2", targets=[actuator, sensor], start_idx=start, duration=60, params={"max_wait_s": MAX_WAIT_S})
    if kind == "E1":
        sigmoid = float(rng.uniform(4.0, 80.0))
        return AttackSpec(type="E1", targets=[actuator, sensor], start_idx=start, duration=60,
                          params={"sigmoid_s": sigmoid, "max_wait_s": MAX_WAIT_S})
    return AttackSpec(type="F1", targets=list(LEVEL_SENSORS), start_idx=start, duration=30)


def scripted_campaign(
    attacks_per_type: int = 30,
    seed: int = 0,
    sample_period_s: float = 1.0,
    types: Sequence[str] = ATTACK_TYPES,
    lead_s: float = SLOT_SPACING_S,
    pairs: Sequence[Tuple[str, str]] = TRACKED_PAIRS,
) -> Tuple[List[AttackSpec], float]:
    """
    Interleave `attacks_per_type` instances of every type, one per slot.

    Returns:
        The attack list and the simulated duration (s) that covers every slot
    """
    rng = np.random.default_rng(seed)
    spacing = int(round(SLOT_SPACING_S / sample_period_s))
    lead = int(round(lead_s / sample_period_s))
    jitter = int(round(START_JITTER_S / sample_period_s))

    attacks = []
    slot = 0
    for i in range(attacks_per_type):
        for kind in types:
            start = lead + slot * spacing + int(rng.integers(0, jitter))
            attacks.append(_spec(kind, i, start, rng, pairs))
            slot += 1
    duration_s = (lead + (slot + 1) * spacing) * sample_period_s
    return attacks, duration_s
