"""Print the activity table and how each preset re-weights a shared motor-reward stream.

Pass a low-level checkpoint to use trained skills; without one an untrained policy is
used, which still shows the weighting arithmetic (severe_pd is always exactly zero).
"""

import sys

import numpy as np

from motorhrl.basal_ganglia import PRESET_ORDER, activity_table, simulate_presets
from motorhrl.config import load_config
from motorhrl.envs import Locomotor
from motorhrl.low_level import LowLevelAgent
from motorhrl.training import load_low

cfg = load_config(None, ["net.hidden=64"] if len(sys.argv) < 2 else sys.argv[2:])
print("h(z) for z = 0..9")
for name, row in activity_table(cfg.skill.n_skills).items():
    print(f"{name:>10}: " + " ".join(f"{v:.3f}" for v in row))

rng = np.random.default_rng(0)
agent = load_low(cfg, sys.argv[1]) if len(sys.argv) > 1 else LowLevelAgent.from_config(cfg, rng)
env = Locomotor(n=10, horizon=cfg.pretrain.horizon, body=cfg.body(), seed=0)
res = simulate_presets(agent, env, cfg.weights(), 50, rng, PRESET_ORDER)
print("\nmean activity-weighted motor reward over 50 skill rollouts")
for name, r in res.items():
    print(f"{name:>10}: {np.mean(r['weighted_r_e']):+.4f}")
