"""Command-line interface for dataset generation, runs, and reports.

Subcommands: gen, train, eval, sweep, latency, theorem-check,
variance-probe.  Successful commands exit 0; failures print one JSON
object {"error", "message"} to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np


def _parse_snr_list(text: str) -> tuple:
    return tuple(float(s) for s in text.split(","))


def _experiment_config(args):
    from . import harness
    frames_train = args.frames_train
    frames_test = args.frames_test
    if args.frames is not None:
        frames_train, frames_test = args.frames, 0
    return harness.ExperimentConfig(
        master_seed=args.seed,
        n_devices=args.devices,
        frames_train=frames_train,
        frames_test=frames_test,
        snr_grid_db=args.snr,
        channel_preset=args.channel,
        subband_width=args.width,
        method=args.method,
        normalization_mode=args.normalization,
    )


def _add_experiment_flags(p, seed_required: bool) -> None:
    from . import harness
    p.add_argument("--devices", type=int, default=10)
    p.add_argument("--frames", type=int, default=None,
                   help="total frames per device (train split only)")
    p.add_argument("--frames-train", type=int, default=600)
    p.add_argument("--frames-test", type=int, default=100)
    p.add_argument("--snr", type=_parse_snr_list, default=(20.0,),
                   help="comma-separated SNR grid in dB")
    p.add_argument("--channel", choices=harness.CHANNEL_PRESETS,
                   default="tdl20")
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--method", choices=harness.METHODS, default="lldr")
    p.add_argument("--normalization", default="oracle-cfr-mean")
    p.add_argument("--seed", type=int, required=seed_required, default=None)


def _add_train_flags(p) -> None:
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--train-seed", type=int, default=0)


def _train_config(args):
    from . import cnn
    return cnn.TrainConfig(learning_rate=args.lr, batch_size=args.batch,
                           max_epochs=args.epochs, patience=args.patience,
                           val_fraction=args.val_frac, seed=args.train_seed)


def _cmd_gen(args) -> int:
    from . import harness
    cfg = _experiment_config(args)
    data = harness.generate_dataset(cfg, out_path=args.out)
    print(json.dumps({"out": args.out, "n_rows": data.n_rows,
                      "feature_len": data.feature_len,
                      "n_degenerate_rows": data.header["n_degenerate_rows"]}))
    return 0


def _cmd_train(args) -> int:
    from . import cnn, dataset, harness
    data = dataset.load_dataset(args.data)
    part = {"train": 0, "test": 1}.get(args.split)
    subset = harness.split_dataset(data)[part] if part is not None else data
    spec = cnn.CnnSpec(n_classes=data.n_classes,
                       input_len=data.feature_len)
    model, log = cnn.train(subset.features.astype(np.float64),
                           subset.labels.astype(int), spec,
                           _train_config(args))
    cnn.save_model(model, args.out)
    if args.log_out:
        cnn.write_training_log(log, args.log_out)
    print(json.dumps({"out": args.out, "epochs_run": len(log),
                      "best_val_loss": min(r["val_loss"] for r in log)}))
    return 0


def _cmd_eval(args) -> int:
    from . import cnn, dataset, harness
    data = dataset.load_dataset(args.data)
    part = {"train": 0, "test": 1}.get(args.split)
    subset = harness.split_dataset(data)[part] if part is not None else data
    model = cnn.load_model(args.model)
    metrics = cnn.evaluate(model, subset.features.astype(np.float64),
                           subset.labels.astype(int),
                           snr_tags=subset.snr_tags)
    out = {
        "accuracy": metrics["accuracy"],
        "per_snr": {f"{k:g}": v for k, v in metrics.get("per_snr", {}).items()},
        "confusion": metrics["confusion"].tolist(),
        "n_rows": subset.n_rows,
    }
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_sweep(args) -> int:
    from . import harness
    base = _experiment_config(args)
    values = [int(v) if args.axis != "channel_preset" else v
              for v in args.values.split(",")]
    summary = harness.sweep(base, args.axis, values,
                            train_cfg=_train_config(args),
                            out_dir=args.out_dir)
    print(json.dumps({
        "axis": summary["axis"],
        "points": [{"axis_value": r["config"][args.axis],
                    "accuracy": r["accuracy"]} for r in summary["results"]],
        "failures": summary["failures"],
    }, indent=2))
    return 0 if not summary["failures"] else 1


def _cmd_latency(args) -> int:
    from . import roofline
    params = roofline.RooflineParams(peak_flops=args.peak,
                                     mem_bandwidth=args.bandwidth)
    if args.profile_pipeline:
        ue, bs = roofline.profile_pipeline()
    else:
        ue = roofline.WorkloadProfile("ue", args.ue_flops, args.ue_bytes)
        bs = roofline.WorkloadProfile("bs", args.bs_flops, args.bs_bytes)
    report = roofline.latency_report(ue, bs, scs_hz=args.scs, params=params,
                                     t_rffi_override=args.trffi_override)
    report["workloads"] = {"ue": {"flops": ue.flops, "bytes": ue.bytes},
                           "bs": {"flops": bs.flops, "bytes": bs.bytes}}
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_theorem_check(args) -> int:
    from . import harness
    if args.widths:
        widths = tuple(int(w) for w in args.widths.split(","))
        suite = harness.theorem_suite(args.channel, args.trials, args.seed,
                                      widths=widths)
        for w in widths:
            c = suite["checks"][w]
            print(f"width {w}: median relative error "
                  f"{c['median_rel_err']:.4%}")
        print(f"width ordering strict: {suite['strictly_ordered']}")
        pinned = suite["checks"].get(16)
        verdict = suite["strictly_ordered"] and (pinned is None or
                                                 pinned["pass"])
    else:
        check = harness.theorem_check(args.channel, args.width, args.trials,
                                      args.seed)
        print(f"median relative error {check['median_rel_err']:.4%} "
              f"(tolerance {check['tolerance']:.0%})")
        verdict = check["pass"]
    print("PASS" if verdict else "FAIL")
    return 0 if verdict else 1


def _cmd_variance_probe(args) -> int:
    from . import harness
    rep = harness.variance_report(
        master_seed=args.seed,
        sigma_h_levels=tuple(float(s) for s in args.sigma_h.split(",")),
        sigma_n_levels=tuple(float(s) for s in args.sigma_n.split(",")),
        trials=args.trials, width=args.width)
    print(json.dumps(rep, indent=2))
    return 0 if rep["all_rows_increasing"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rffsim",
        description="SIMO fingerprint simulation and identification toolkit")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset file")
    _add_experiment_flags(p, seed_required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train the classifier on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log-out", default=None)
    p.add_argument("--split", choices=("train", "test", "all"),
                   default="train")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--split", choices=("train", "test", "all"),
                   default="test")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="run experiments along one axis")
    _add_experiment_flags(p, seed_required=True)
    _add_train_flags(p)
    p.add_argument("--axis", required=True,
                   choices=("subband_width", "n_devices", "channel_preset"))
    p.add_argument("--values", required=True,
                   help="comma-separated axis values")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("latency", help="roofline latency report")
    p.add_argument("--scs", type=float, default=60e3)
    p.add_argument("--ue-flops", dest="ue_flops", type=float, default=7.34e5)
    p.add_argument("--ue-bytes", dest="ue_bytes", type=float, default=5.91e5)
    p.add_argument("--bs-flops", dest="bs_flops", type=float, default=1.37e6)
    p.add_argument("--bs-bytes", dest="bs_bytes", type=float, default=1.39e6)
    p.add_argument("--trffi-override", dest="trffi_override", type=float,
                   default=None)
    p.add_argument("--peak", type=float, default=403.2e9)
    p.add_argument("--bandwidth", type=float, default=17.06e9)
    p.add_argument("--profile-pipeline", action="store_true",
                   help="measure the implemented pipeline instead")
    p.set_defaults(func=_cmd_latency)

    p = sub.add_parser("theorem-check", help="noiseless ratio-identity check")
    p.add_argument("--channel", default="tdl20")
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--widths", default=None,
                   help="comma-separated widths for the ordered suite")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_theorem_check)

    p = sub.add_parser("variance-probe", help="noise/channel variance grid")
    p.add_argument("--sigma-h", default="0.5,1.0,2.0")
    p.add_argument("--sigma-n", default="0.0,0.05,0.1,0.2")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_variance_probe)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
