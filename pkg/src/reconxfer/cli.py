"""Command-line entry points.

    reconxfer gen-data      write a seeded dataset file (d2d / miso)
    reconxfer fetch-mnist   download/locate the MNIST IDX corpus
    reconxfer verify-arch   assert the published stage parameter counts
    reconxfer run           full experiment from a JSON config
    reconxfer train-source  source phase only for one seed/method
    reconxfer transfer      build the frozen-feature target model
    reconxfer train-target  target phase for one seed/method
    reconxfer eval          re-evaluate a stored checkpoint on the test set
    reconxfer report        regenerate table.csv from results.json
    reconxfer bench         numba-vs-numpy kernel timings

Config files are JSON; see README.md for the schema.
"""

import argparse
import json
import sys
from pathlib import Path

from . import experiments
from .backend import backend_name
from .errors import ReconxferError
from .tasks import d2d as d2d_task
from .tasks import miso as miso_task


def _method_alpha(cfg, method):
    return cfg.alpha if method == "reconstruction" else 0.0


def _source_tag(cfg, seed, method):
    return f"seed{seed}/source-alpha{_method_alpha(cfg, method):g}"


def _target_tag(seed, method):
    return f"seed{seed}/target-{method}"


def cmd_gen_data(args):
    if args.suite == "d2d":
        batch = d2d_task.generate_networks(args.count, args.seed)
        d2d_task.save_networks(args.out, batch)
    elif args.suite == "miso":
        block = miso_task.make_pilot_block(args.pilot_seed)
        batch = miso_task.generate_scenes(args.count, args.seed, block)
        miso_task.save_scenes(args.out, batch, block)
    else:
        raise ReconxferError(
            "gen-data covers the wireless suites; use fetch-mnist for MNIST")
    print(f"wrote {args.count} {args.suite} samples to {args.out}")


def cmd_fetch_mnist(args):
    paths = experiments.ensure_mnist(
        experiments.mnist_data_dir(args.dir), download=not args.no_download)
    for key, path in sorted(paths.items()):
        print(f"{key}: {path}")


def cmd_verify_arch(args):
    report = experiments.verify_architecture(args.suite)
    for suite, row in report.items():
        status = "ok" if row["ok"] else "MISMATCH"
        print(f"{suite}: {status}")
        for stage, count in row["counts"].items():
            want = row["expected"].get(stage)
            mark = "" if want in (None, count) else f"  (expected {want})"
            print(f"  {stage:<20}{count}{mark}")


def cmd_run(args):
    cfg = experiments.ExperimentConfig.from_file(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    result = experiments.run_experiment(cfg, verbose=not args.quiet)
    outdir = Path(cfg.output_dir)
    print(f"results: {outdir / 'results.json'}")
    print(f"table:   {outdir / 'table.csv'}")


def _load_cfg_and_data(args):
    cfg = experiments.ExperimentConfig.from_file(args.config)
    data = experiments.build_suite_data(cfg)
    return cfg, data


def cmd_train_source(args):
    cfg, data = _load_cfg_and_data(args)
    alpha = _method_alpha(cfg, args.method)
    run = experiments._train_source_phase(cfg, data, alpha, args.seed)
    outdir = Path(cfg.output_dir)
    tag = _source_tag(cfg, args.seed, args.method)
    experiments.save_staged_model(outdir / "checkpoints" / tag, run.model)
    (outdir / "curves" / f"seed{args.seed}").mkdir(parents=True, exist_ok=True)
    experiments.write_curves_csv(outdir / "curves" / f"{tag}.csv", run.report)
    print(json.dumps({"phase": "source", "seed": args.seed,
                      "alpha": alpha, data.source_metric:
                      run.test_metrics["metric"],
                      "epochs": run.report.epochs_run}, indent=2))


def cmd_transfer(args):
    cfg, data = _load_cfg_and_data(args)
    outdir = Path(cfg.output_dir)
    tag = _source_tag(cfg, args.seed, args.method)
    source_dir = outdir / "checkpoints" / tag
    from .training import transfer_feature_stage

    source = experiments.load_staged_model(source_dir)
    model = transfer_feature_stage(
        source, data.target_arch,
        seed=experiments._seed_int(args.seed, "init", "target"))
    dest = outdir / "checkpoints" / _target_tag(args.seed, args.method) / "init"
    experiments.save_staged_model(dest, model)
    print(f"transferred feature stage -> {dest}")


def cmd_train_target(args):
    cfg, data = _load_cfg_and_data(args)
    outdir = Path(cfg.output_dir)
    alpha = _method_alpha(cfg, args.method)
    source_dir = outdir / "checkpoints" / _source_tag(cfg, args.seed, args.method)
    if args.method == "regular":
        source = None
    else:
        source = experiments.SourceRun(
            experiments.load_staged_model(source_dir), None, alpha, {})
    run = experiments._train_target_phase(cfg, data, args.method, args.seed,
                                          source)
    tag = _target_tag(args.seed, args.method)
    experiments.save_staged_model(outdir / "checkpoints" / tag / "best",
                                  run.model_best)
    experiments.save_staged_model(outdir / "checkpoints" / tag / "final",
                                  run.model_final)
    (outdir / "curves" / f"seed{args.seed}").mkdir(parents=True, exist_ok=True)
    experiments.write_curves_csv(outdir / "curves" / f"{tag}.csv", run.report)
    print(json.dumps({"phase": "target", "seed": args.seed,
                      "method": args.method,
                      f"{data.target_metric}_early_stopped":
                      run.test_best["metric"],
                      f"{data.target_metric}_final": run.test_final["metric"],
                      "epochs": run.report.epochs_run,
                      "best_epoch": run.report.best_epoch}, indent=2))


def cmd_eval(args):
    cfg, data = _load_cfg_and_data(args)
    outdir = Path(cfg.output_dir)
    if args.phase == "source":
        path = outdir / "checkpoints" / _source_tag(cfg, args.seed, args.method)
        adapter = data.source_adapter
        metric = data.source_metric
    else:
        path = (outdir / "checkpoints" / _target_tag(args.seed, args.method)
                / args.checkpoint)
        adapter = data.target_adapter
        metric = data.target_metric
    model = experiments.load_staged_model(path)
    stats = experiments.evaluate(model, data.test, adapter)
    print(json.dumps({"checkpoint": str(path), metric: stats["metric"]},
                     indent=2))


def cmd_report(args):
    outdir = Path(args.output_dir)
    with open(outdir / "results.json") as fh:
        table = json.load(fh)
    experiments.write_table_csv(outdir / "table.csv", table)
    print(f"wrote {outdir / 'table.csv'}")


def cmd_bench(args):
    from . import benchmark

    benchmark.main(["--count", str(args.count)])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="reconxfer",
        description="staged-model transfer learning experiments "
                    f"(kernel backend: {backend_name()})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a seeded dataset file")
    p.add_argument("--suite", required=True, choices=["d2d", "miso"])
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pilot-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("fetch-mnist", help="download/locate the IDX corpus")
    p.add_argument("--dir", default=None)
    p.add_argument("--no-download", action="store_true")
    p.set_defaults(fn=cmd_fetch_mnist)

    p = sub.add_parser("verify-arch", help="check stage parameter counts")
    p.add_argument("--suite", choices=["d2d", "miso", "mnist"], default=None)
    p.set_defaults(fn=cmd_verify_arch)

    p = sub.add_parser("run", help="full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_run)

    for name, fn in (("train-source", cmd_train_source),
                     ("transfer", cmd_transfer),
                     ("train-target", cmd_train_target)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--method", required=True, choices=experiments.METHODS)
        p.set_defaults(fn=fn)

    p = sub.add_parser("eval", help="evaluate a stored checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--method", required=True, choices=experiments.METHODS)
    p.add_argument("--phase", choices=["source", "target"], default="target")
    p.add_argument("--checkpoint", choices=["best", "final"], default="best")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="rebuild table.csv from results.json")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("bench", help="numba vs numpy kernel timings")
    p.add_argument("--count", type=int, default=256)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ReconxferError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
