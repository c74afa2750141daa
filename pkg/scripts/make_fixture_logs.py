#!/usr/bin/env python3
"""Generate a batch of trial logs for replay tooling and the web client tests.

Produces a mix of scripted and parameterized trials, including the
rejection-then-acceptance trace whose help-estimate gauge is non-monotone.

Usage:
    python scripts/make_fixture_logs.py --out-dir fixtures/logs [--count 20]
"""

import argparse
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mixtask.logs import save_log  # noqa: E402
from mixtask.server import build_snapshot  # noqa: E402
from mixtask.trial import TrialConfig, _load, run_trial  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="fixtures/logs")
    parser.add_argument("--count", type=int, default=20)
    args = parser.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    configs = [
        TrialConfig(
            scenario="pour_package",
            method="mixed_init",
            human_script="reject\naccept\n",
            alpha=0.3,
            seed=0,
        )
    ]
    methods = ("mixed_init", "random", "recb", "llm_proxy", "h_init", "no_hierarchy")
    p_grid = (0.0, 0.3, 0.7, 1.0)
    i = 0
    while len(configs) < args.count:
        configs.append(
            TrialConfig(
                scenario="pour_package",
                method=methods[i % len(methods)],
                human_p=p_grid[i % len(p_grid)],
                mood="positive" if i % 2 == 0 else "negative",
                seed=i,
            )
        )
        i += 1

    for idx, config in enumerate(configs[: args.count]):
        _, log = run_trial(config)
        snapshot = build_snapshot(_load(config), config.method, config.alpha)
        path = os.path.join(args.out_dir, f"trial_{idx:03d}.jsonl")
        save_log(path, config.to_dict(), log, snapshot=snapshot)
        print(f"{path}: {config.method} p={config.human_p} -> {log.termination_reason()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
