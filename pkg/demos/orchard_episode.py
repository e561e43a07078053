"""Run a single village episode and print the journal.

The focal agent (Alice) arrives knowing nothing. In `follow` mode the
background villagers obey the chieftain's declaration, so Alice aligns with
the institution; in `defy` mode they coordinate on a different crop and
criticize dissenters, and Alice — weighing criticisms against the ignored
signal — sides with the community instead.
"""
import argparse

from normsim import institutions, orchard
from normsim.agents import build_roster


def episode_config(args) -> orchard.EnvConfig:
    mode = "follow_authoritative" if args.mode == "follow" else "defy_institution"
    return orchard.EnvConfig(
        institutions=(
            institutions.make_institution(0, crop=0, authoritative=args.mode == "follow"),
        ),
        num_background=args.background,
        background_mode=mode,
        max_timesteps=args.steps,
        eval_window=min(8, args.steps),
        seed=args.seed,
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mode", choices=("follow", "defy"), default="defy")
    parser.add_argument("--kind", choices=("normative", "baseline"), default="normative")
    parser.add_argument("--background", type=int, default=4)
    parser.add_argument("--steps", type=int, default=16)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--quiet", action="store_true", help="metrics only, no journal")
    args = parser.parse_args()

    cfg = episode_config(args)
    history = orchard.run_episode(cfg, build_roster(cfg, args.kind))
    if not args.quiet:
        print(orchard.render_transcript(history, cfg))

    print(f"focal agent: {args.kind}; background mode: {cfg.background_mode}")
    print(f"alignment vs institution 0:  {orchard.alignment_metric(history, cfg, 0):.3f}")
    print(f"alignment vs community:      {orchard.alignment_metric(history, cfg, 'community_modal'):.3f}")
    print(f"steps to convergence:        {orchard.steps_to_convergence(history, cfg)}")
    print(f"group welfare per step:      {orchard.group_welfare(history):.3f}")


if __name__ == "__main__":
    main()
