#!/usr/bin/env python3
"""Independent recomputation of per-step human costs from scenario geometry.

Walks each bundled scenario's plan, resolving the acting object's furniture at
the projected state and pricing stationary + walk time directly from the
document data (no cost-model code). Useful as a cross-check when editing
scenario layouts.

Usage:
    python scripts/recompute_human_costs.py [scenario ...]
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mixtask.scenarios import builtin_scenario, builtin_scenarios  # noqa: E402
from mixtask.world import apply_effect  # noqa: E402

WALK_MPS = 1.4


def recompute(scenario):
    world = scenario.world
    state = scenario.initial_state
    rows = []
    for idx, prim in enumerate(scenario.plan.steps):
        holder = state.object_locations[prim.params[0]]
        while holder in state.object_locations:
            holder = state.object_locations[holder]
        hx, hy = state.agent_poses["human"]
        meters = min(
            math.hypot(hx - x, hy - y) for x, y in world.furniture[holder]
        ) * world.meters_per_cell
        stationary = scenario.human_stationary_seconds(prim)
        if stationary is None:
            stationary = float("nan")
        rows.append((idx, str(prim), stationary, meters / WALK_MPS))
        state = apply_effect(state, prim)
    return rows


def main() -> int:
    names = sys.argv[1:]
    scenarios = [builtin_scenario(n) for n in names] if names else builtin_scenarios()
    for scenario in scenarios:
        print(f"\n== {scenario.name} ==")
        print(f"{'step':4s} {'primitive':50s} {'stationary':>10s} {'walk':>7s} {'total':>8s}")
        for idx, prim, stationary, walk in recompute(scenario):
            total = stationary + walk
            print(f"{idx:<4d} {prim:50s} {stationary:10.2f} {walk:7.2f} {total:8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
