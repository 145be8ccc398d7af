"""Command-line front end: attack, train-policy, gen-corpus, eval."""

from __future__ import annotations

import argparse
import json
import os
import sys

from advtrack.config import load_config
from advtrack.corpus import generate_corpus, load_corpus, write_corpus
from advtrack.metrics import ope_curves, track_scores
from advtrack.pipeline import make_tracker, run_corpus, train_policy
from advtrack.policynet import load_policy, save_policy
from advtrack.report import write_outputs


def _add_tracker_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tracker", choices=["ncc", "remote"], default="ncc")
    p.add_argument("--remote-addr", default=None, help="HOST:PORT of a bridge")
    p.add_argument("--config", default=None, help="flat TOML config file")
    p.add_argument("--seed", type=int, default=None)


def _config_from_args(args) -> "AttackConfig":
    overrides = {}
    if getattr(args, "tracker", None):
        overrides["backend"] = args.tracker
    if getattr(args, "remote_addr", None):
        overrides["remote_addr"] = args.remote_addr
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(getattr(args, "config", None), overrides)


def cmd_attack(args) -> int:
    config = _config_from_args(args)
    videos = load_corpus(args.corpus, interval=config.eval.interval)
    if not videos:
        print("no videos found", file=sys.stderr)
        return 2
    tracker = make_tracker(config, workdir=args.out)
    policy = load_policy(args.policy) if args.policy else None
    reports = run_corpus(videos, config, tracker=tracker, policy=policy)
    write_outputs(reports, args.out)
    for r in reports:
        status = "FAILED" if r.attack_failed else "ok"
        print(f"{r.video_id}: {status} tp={r.tp_final:.4f} "
              f"linf={r.linf_final:.1f} queries={r.queries['total']}")
    if hasattr(tracker, "close"):
        tracker.close()
    return 0


def cmd_train_policy(args) -> int:
    config = _config_from_args(args)
    videos = load_corpus(args.corpus, interval=config.eval.interval)
    tracker = make_tracker(config, workdir=os.path.dirname(args.out) or ".")
    net, stats = train_policy(videos, config, episodes=args.episodes,
                              tracker=tracker)
    save_policy(net, args.out)
    print(json.dumps(stats))
    if hasattr(tracker, "close"):
        tracker.close()
    return 0


def cmd_gen_corpus(args) -> int:
    videos = generate_corpus(seed=args.seed, n_videos=args.videos,
                             n_frames=args.frames)
    write_corpus(videos, args.out)
    print(f"wrote {len(videos)} videos to {args.out}")
    return 0


def cmd_eval(args) -> int:
    config = _config_from_args(args)
    videos = load_corpus(args.corpus, interval=config.eval.interval)
    tracker = make_tracker(config, workdir=".")
    for video in videos:
        result = tracker.track(video, video.gt_boxes[0])
        a, r = track_scores(result, video.gt_boxes, config.eval)
        curves = ope_curves(result, video.gt_boxes)
        print(f"{video.video_id}: A={a:.4f} R={r:.4f} "
              f"AUC={curves.success_auc:.4f} P20={curves.precision_at_20:.4f}")
    if hasattr(tracker, "close"):
        tracker.close()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="advtrack",
        description="Black-box first-frame attacks on object trackers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="run the full attack over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", default=None, help="policy checkpoint")
    _add_tracker_args(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("train-policy", help="pretrain the selection policy")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--episodes", type=int, default=40)
    _add_tracker_args(p)
    p.set_defaults(func=cmd_train_policy)

    p = sub.add_parser("gen-corpus", help="write a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--videos", type=int, default=20)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("eval", help="clean tracking baseline only")
    p.add_argument("--corpus", required=True)
    _add_tracker_args(p)
    p.set_defaults(func=cmd_eval)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
