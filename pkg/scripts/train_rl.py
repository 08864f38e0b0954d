"""Train a REINFORCE agent and write its learning curve and best pulses.

    python scripts/train_rl.py --seed 0 --out results/rl [--preset reinforce-adam]
"""
import argparse

from qctrl.harness import ExperimentConfig, run_rl


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="reinforce-sgd")
    ap.add_argument("--t-gamma", type=float, default=5.0)
    ap.add_argument("--t-omega-max", type=float, default=20.0)
    ap.add_argument("--steps", type=int, default=30)
    ap.add_argument("--episodes", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/rl")
    ap.add_argument("--every", type=int, default=100, help="progress print interval")
    args = ap.parse_args()

    config = ExperimentConfig(mode="rl", seed=args.seed, preset=args.preset,
                              t_gamma=args.t_gamma, t_omega_max=args.t_omega_max,
                              steps=args.steps, episodes=args.episodes)

    def progress(episode, mean_reward, best_reward):
        if episode % args.every == 0:
            print(f"episode {episode:5d}  mean {mean_reward:.4f}  best {best_reward:.4f}", flush=True)

    _, evaluation = run_rl(config, args.out, progress)
    print(f"best reward {evaluation['best_reward']:.4f}, "
          f"replay without decay F={evaluation['replay_fidelity_gamma0']:.4f}, "
          f"counter-intuitive: {evaluation['counterintuitive']}")


if __name__ == "__main__":
    main()
