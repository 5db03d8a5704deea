"""Tiny end-to-end run: pretrain the motor skills, train the skill selector, score it.

Budgets here are a few thousand samples so the script finishes in about a minute; the
numbers it prints only show that the pieces connect. Use configs/desk.yaml for real runs.
"""

import sys
import tempfile
from pathlib import Path

from motorhrl.config import load_config
from motorhrl.training import evaluate_run, pretrain, tasktrain

SMALL = [
    "net.hidden=64",
    "skill.init_std=1.0",
    "pretrain.total_samples=20000", "pretrain.warmup_samples=2000", "pretrain.eval_interval=10000",
    "tasktrain.total_samples=20000", "tasktrain.warmup_samples=2000", "tasktrain.eval_interval=10000",
    "tasktrain.eval_episodes=10",
]


def main(out: Path) -> None:
    cfg = load_config(None, [*SMALL, "task.kind=vtrack"])
    pre = pretrain(cfg, out / "pretrain")
    ret = pre.episodes["fusion_return"]
    tenth = max(1, len(ret) // 10)
    print(f"pretrain: {len(ret)} episodes, fusion return {ret[:tenth].mean():.2f} -> {ret[-tenth:].mean():.2f}")

    task = tasktrain(cfg, pre.checkpoint, out / "tasktrain")
    print(f"tasktrain: eval score {task.final_score:.1f} (max 1000), motor policy untouched: "
          f"{task.low_hash_before == task.low_hash_after}")

    score = evaluate_run(cfg, task.checkpoint, pre.checkpoint, episodes=10, seed=1)
    print(f"fresh evaluation on another seed: {score:.1f}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="motorhrl_")))
