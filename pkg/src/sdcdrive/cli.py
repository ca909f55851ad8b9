"""Command-line entry points.

Subcommands:
    gen-data   render a synthetic dataset to disk
    train      train a model on a dataset
    simulate   drive one route closed-loop with the expert or a checkpoint
    eval       offline task metrics (and optional plots) for a checkpoint
    bench      compare the compiled and numpy BEV kernels
"""

import argparse
import json
import os
import sys

import numpy as np


def _add_ablation_flags(p):
    p.add_argument("--no-sdc-sides", action="store_true",
                   help="drop the side-camera BEV maps")
    p.add_argument("--no-cvt", action="store_true",
                   help="replace the transformer RGB encoder with the CNN encoder")
    p.add_argument("--no-vc", action="store_true",
                   help="remove the learned control branch (PID-only)")


def build_parser():
    parser = argparse.ArgumentParser(prog="sdcdrive")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--scenario", default="mixed",
                   choices=["mixed", "straight", "turn", "red_light", "lead_vehicle"])
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", default="toy", help="scale preset name or config JSON path")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-mgn", action="store_true")
    _add_ablation_flags(p)

    p = sub.add_parser("simulate", help="drive a route closed-loop")
    p.add_argument("--route", required=True,
                   help="route JSON file ({'scenario','seed'} or explicit waypoints)")
    p.add_argument("--agent", default="expert",
                   help="'expert' or 'model:<checkpoint path>'")
    p.add_argument("--mode", default="normal", choices=["normal", "adversarial"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--log", default=None, help="directory for the trace log")

    p = sub.add_parser("eval", help="offline metrics for a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--report", default=None, help="output JSON path")
    p.add_argument("--plots", default=None, help="directory for plot images")

    p = sub.add_parser("bench", help="benchmark compiled vs numpy kernels")
    p.add_argument("--repeats", type=int, default=20)
    return parser


def cmd_gen_data(args):
    from .training import make_dataset

    dirs = make_dataset(args.out, args.count, seed=args.seed, scenario=args.scenario)
    print(f"wrote {len(dirs)} samples to {args.out}")


def cmd_train(args):
    from .training.loop import TrainSettings, train_loop

    settings = TrainSettings(
        scale=args.config, data_dir=args.data, out_dir=args.out,
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        seed=args.seed, use_mgn=not args.no_mgn,
        no_cvt=args.no_cvt, no_vc=args.no_vc, no_sdc_sides=args.no_sdc_sides,
    )
    _, log = train_loop(settings)
    print(f"trained {len(log)} epochs; final val loss {log[-1]['val_loss']:.4f}")


def cmd_simulate(args):
    import torch

    from .evaluation import ExpertAgent, load_route_file, run_closed_loop
    from .model import ModelAgent, load_checkpoint

    torch.manual_seed(args.seed)
    np.random.seed(args.seed)
    scene = load_route_file(args.route)
    if args.agent == "expert":
        agent = ExpertAgent()
    elif args.agent.startswith("model:"):
        model, _ = load_checkpoint(args.agent.split(":", 1)[1])
        agent = ModelAgent(model, beta=args.beta, dt=args.dt)
    else:
        raise SystemExit(f"unknown agent {args.agent!r}")
    result, _ = run_closed_loop(agent, scene, mode=args.mode, dt=args.dt,
                                log_dir=args.log)
    print(json.dumps({"rc": result.rc, "ip": result.ip, "ds": result.ds,
                      "termination": result.termination}, sort_keys=True))


def cmd_eval(args):
    import torch

    from .evaluation import task_metrics
    from .model import load_checkpoint
    from .training.loop import sample_to_tensors
    from .training.synthetic import load_dataset

    model, _ = load_checkpoint(args.ckpt)
    samples = load_dataset(args.data)
    preds, gts = [], []
    with torch.no_grad():
        for s in samples:
            t = sample_to_tensors(s, model.config.no_sdc_sides)
            out = model(t["rgb"][None], t["sdc"][None], t["meas"][None],
                        t["route_point"][None])
            preds.append({
                "traffic_light": float(out["traffic_light"][0]),
                "speed": float(out["speed"][0]),
                "seg": out["seg"][0].numpy(),
                "waypoints": out["waypoints"][0].numpy(),
                "steering": float(out["steering"][0]),
                "throttle": float(out["throttle"][0]),
                "brake": float(out["brake"][0]),
            })
            gts.append({k: s[k] for k in ("traffic_light", "speed", "waypoints",
                                          "steering", "throttle", "brake")}
                       | {"seg": s["seg"].astype(float)})
    report = task_metrics(preds, gts)
    out = json.dumps(report, indent=2, sort_keys=True)
    print(out)
    if args.report:
        with open(args.report, "w") as f:
            f.write(out + "\n")
    if args.plots:
        _write_plots(args.plots, samples, preds)


def _write_plots(plot_dir, samples, preds):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(plot_dir, exist_ok=True)
    fig, ax = plt.subplots()
    for s, p in zip(samples, preds):
        gt = np.asarray(s["waypoints"])
        pr = np.asarray(p["waypoints"])
        ax.plot(gt[:, 0], gt[:, 1], "g.-", alpha=0.5)
        ax.plot(pr[:, 0], pr[:, 1], "r.--", alpha=0.5)
    ax.set_xlabel("lateral (m)")
    ax.set_ylabel("forward (-m)")
    ax.set_title("waypoints: ground truth (green) vs predicted (red)")
    fig.savefig(os.path.join(plot_dir, "waypoints.png"), dpi=120)
    plt.close(fig)


def cmd_bench(args):
    from .benchmark import run_benchmark

    for line in run_benchmark(repeats=args.repeats):
        print(line)


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "gen-data": cmd_gen_data,
        "train": cmd_train,
        "simulate": cmd_simulate,
        "eval": cmd_eval,
        "bench": cmd_bench,
    }
    handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
