"""Why invalid-action masking matters: masked vs penalty-reward training.

Runs the single-agent learner on the 13-node system twice with shared seed
and hyperparameters, once with masking and once with the penalty reward
(M = -1 on constraint violations), and tabulates the outcomes.
"""

from gridrestore import Hyperparameters, TrainingConfig, builtin_feeder, compare

feeder = builtin_feeder("ieee13")
SEED = 2

variants = [
    ("masked", TrainingConfig(episodes=500, agent_mode="single",
                              hyper=Hyperparameters(seed=SEED))),
    ("penalty", TrainingConfig(episodes=500, agent_mode="single", masking=False,
                               hyper=Hyperparameters(seed=SEED))),
]

print("training both variants (same seed, same hyperparameters) ...")
rows = compare(feeder, variants)

header = f"{'variant':>10} {'final50 mean':>13} {'final50 std':>12} {'violations':>11} {'converged@':>11}"
print("\n" + header)
for row in rows:
    print(f"{row['variant']:>10} {row['final50_mean']:>13.3f} {row['final50_std']:>12.3f} "
          f"{row['violations']:>11d} {row['convergence_episode']:>11d}")

masked, penalty = rows
print(f"\nmasked final reward is {masked['final50_mean'] / penalty['final50_mean']:.2f}x "
      f"the penalty variant's, with a {masked['final50_std'] / penalty['final50_std']:.2f}x "
      f"standard deviation and {masked['violations']} constraint violations "
      f"(the penalty variant logged {penalty['violations']}).")
