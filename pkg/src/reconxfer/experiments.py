"""Config-driven experiment harness.

One experiment = one suite (mnist / d2d / miso), a set of replication
seeds and up to three training methods:

    regular         fresh full model per task, no parameter sharing
    conventional    source trained on the task loss alone, feature stage
                    transferred frozen to the target task
    reconstruction  source trained on task loss + alpha * reconstruction
                    loss, then the same frozen-feature transfer

Regular and conventional share the alpha=0 source run (identical by
definition), so the harness trains at most two source models per seed.
Every random stream derives from named seeds, making a rerun of the same
config byte-identical.
"""

import hashlib
import json
import os
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .nn import load_mlp, save_mlp
from .tasks import d2d as d2d_task
from .tasks import miso as miso_task
from .tasks import mnist as mnist_task
from .training import (
    Architecture,
    LabeledDataset,
    StagedModel,
    TrainConfig,
    build_staged_model,
    evaluate_model,
    train_source,
    train_target,
    transfer_feature_stage,
)
from .utils import derive_seed

SUITES = ("mnist", "d2d", "miso")
METHODS = ("regular", "conventional", "reconstruction")

DEFAULT_ALPHA = {"mnist": 5.0, "d2d": 3.0, "miso": 4.0}


def _seed_int(*parts) -> int:
    return int(derive_seed(*parts).generate_state(1)[0])


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    suite: str
    methods: list = field(default_factory=lambda: list(METHODS))
    alpha: float = None
    seeds: list = field(default_factory=lambda: [1, 2, 3])
    master_seed: int = 0
    data: dict = field(default_factory=dict)
    source_train: dict = field(default_factory=dict)
    target_train: dict = field(default_factory=dict)
    output_dir: str = "runs"

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ConfigurationError(f"unknown suite {self.suite!r}")
        for method in self.methods:
            if method not in METHODS:
                raise ConfigurationError(f"unknown method {method!r}")
        if self.alpha is None:
            self.alpha = DEFAULT_ALPHA[self.suite]
        if "reconstruction" in self.methods and self.alpha <= 0:
            raise ConfigurationError(
                "the reconstruction method needs alpha > 0")
        if not self.seeds:
            raise ConfigurationError("need at least one replication seed")

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(payload) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        return cls(**payload)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "suite": self.suite, "methods": list(self.methods),
            "alpha": self.alpha, "seeds": list(self.seeds),
            "master_seed": self.master_seed, "data": dict(self.data),
            "source_train": dict(self.source_train),
            "target_train": dict(self.target_train),
            "output_dir": str(self.output_dir),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


SOURCE_TRAIN_DEFAULTS = {
    "mnist": dict(lr=1e-3, batch_size=256, max_epochs=200, patience=20,
                  early_stopping=True, validation_metric="loss"),
    "d2d": dict(lr=1e-3, batch_size=256, max_epochs=100, patience=20,
                early_stopping=True, validation_metric="loss"),
    "miso": dict(lr=1e-3, batch_size=256, max_epochs=200, patience=20,
                 early_stopping=True, validation_metric="loss"),
}
TARGET_TRAIN_DEFAULTS = {
    "mnist": dict(lr=1e-3, batch_size=64, max_epochs=200, patience=20,
                  early_stopping=False, validation_metric="utility"),
    "d2d": dict(lr=1e-3, batch_size=64, max_epochs=200, patience=20,
                early_stopping=False, validation_metric="utility"),
    "miso": dict(lr=1e-3, batch_size=64, max_epochs=200, patience=20,
                 early_stopping=False, validation_metric="utility"),
}

DATA_DEFAULTS = {
    "mnist": dict(spec="A", dir=None, download=True),
    "d2d": dict(source_train=500000, source_val=5000, target_train=1000,
                target_val=5000, test=2000),
    "miso": dict(source_train=100000, source_val=5000, target_train=500,
                 target_val=5000, test=2000),
}


def _phase_cfg(defaults: dict, overrides: dict, alpha: float,
               shuffle_seed: int) -> TrainConfig:
    merged = {**defaults, **overrides}
    return TrainConfig(alpha=alpha, seed=shuffle_seed, **merged)


# ---------------------------------------------------------------------------
# suite glue


@dataclass
class SuiteData:
    source_train: LabeledDataset
    source_val: LabeledDataset
    target_train: LabeledDataset
    target_val: LabeledDataset
    test: LabeledDataset
    source_adapter: object
    target_adapter: object
    source_arch: Architecture
    target_arch: Architecture
    source_metric: str
    target_metric: str
    target_metric_higher_is_better: bool
    info: dict = field(default_factory=dict)


def _build_d2d(cfg: ExperimentConfig) -> SuiteData:
    sizes = {**DATA_DEFAULTS["d2d"], **cfg.data}
    chan = d2d_task.D2dConfig()
    batches = {}
    for split in ("source_train", "source_val", "target_train",
                  "target_val", "test"):
        seed = derive_seed(cfg.master_seed, "data", "d2d", split)
        batches[split] = d2d_task.generate_networks(sizes[split], seed, chan)
    stats = d2d_task.fit_input_standardizer(batches["source_train"])
    data = {k: d2d_task.build_dataset(v, stats, name=k)
            for k, v in batches.items()}
    arch = d2d_task.d2d_architecture(chan.n_links)
    return SuiteData(
        **data,
        source_adapter=d2d_task.SumRateAdapter(chan),
        target_adapter=d2d_task.MinRateAdapter(chan),
        source_arch=arch,
        target_arch=arch,
        source_metric="sum_rate_mbps",
        target_metric="min_rate_mbps",
        target_metric_higher_is_better=True,
        info={"channel_config": chan, "input_stats": stats},
    )


def _build_miso(cfg: ExperimentConfig) -> SuiteData:
    sizes = {**DATA_DEFAULTS["miso"], **cfg.data}
    chan = miso_task.MisoConfig()
    pilots = miso_task.make_pilot_block(
        _seed_int(cfg.master_seed, "data", "miso", "pilots"), chan)
    batches = {}
    for split in ("source_train", "source_val", "target_train",
                  "target_val", "test"):
        seed = derive_seed(cfg.master_seed, "data", "miso", split)
        batches[split] = miso_task.generate_scenes(sizes[split], seed, pilots,
                                                   chan)
    input_stats, info_stats = miso_task.fit_standardizers(batches["source_train"])
    data = {k: miso_task.build_dataset(v, input_stats, info_stats, name=k)
            for k, v in batches.items()}
    return SuiteData(
        **data,
        source_adapter=miso_task.BeamformingAdapter(chan),
        target_adapter=miso_task.LocalizationAdapter(chan),
        source_arch=miso_task.miso_architecture("beamforming", chan),
        target_arch=miso_task.miso_architecture("localization", chan),
        source_metric="snr_db",
        target_metric="localization_error_m",
        target_metric_higher_is_better=False,
        info={"channel_config": chan, "pilot_block": pilots,
              "input_stats": input_stats, "info_stats": info_stats},
    )


MNIST_FILES = {
    "train_images": ("train-images-idx3-ubyte", 2051),
    "train_labels": ("train-labels-idx1-ubyte", 2049),
    "eval_images": ("t10k-images-idx3-ubyte", 2051),
    "eval_labels": ("t10k-labels-idx1-ubyte", 2049),
}
MNIST_MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
)


def mnist_data_dir(cfg_dir=None) -> Path:
    if cfg_dir:
        return Path(cfg_dir)
    env = os.environ.get("RECONXFER_MNIST_DIR")
    if env:
        return Path(env)
    cache = os.environ.get("RECONXFER_DATA_DIR", "data")
    return Path(cache) / "mnist"


def _find_mnist_file(directory: Path, stem: str):
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"),
                 stem.replace("-idx", ".idx") + ".gz"):
        path = directory / name
        if path.exists():
            return path
    return None


def ensure_mnist(directory: Path, download: bool = True) -> dict:
    """Locate (and optionally fetch) the IDX corpus; returns file paths."""
    directory = Path(directory)
    paths = {}
    missing = []
    for key, (stem, _) in MNIST_FILES.items():
        found = _find_mnist_file(directory, stem)
        if found is None:
            missing.append(stem)
        else:
            paths[key] = found
    if not missing:
        return paths
    if download:
        directory.mkdir(parents=True, exist_ok=True)
        for stem in list(missing):
            for mirror in MNIST_MIRRORS:
                try:
                    url = mirror + stem + ".gz"
                    with urllib.request.urlopen(url, timeout=30) as resp:
                        blob = resp.read()
                    (directory / (stem + ".gz")).write_bytes(blob)
                    missing.remove(stem)
                    break
                except OSError:
                    continue
        paths = {}
        still = []
        for key, (stem, _) in MNIST_FILES.items():
            found = _find_mnist_file(directory, stem)
            if found is None:
                still.append(stem)
            else:
                paths[key] = found
        missing = still
    if missing:
        raise DataError(
            f"MNIST corpus not found under {directory} and download failed "
            f"(missing: {missing}). Place the standard IDX files there or "
            f"point RECONXFER_MNIST_DIR at them."
        )
    return paths


def _build_mnist(cfg: ExperimentConfig) -> SuiteData:
    opts = {**DATA_DEFAULTS["mnist"], **cfg.data}
    paths = ensure_mnist(mnist_data_dir(opts.get("dir")),
                         download=opts.get("download", True))
    train_images, train_labels = mnist_task.load_idx_pair(
        paths["train_images"], paths["train_labels"])
    eval_images, eval_labels = mnist_task.load_idx_pair(
        paths["eval_images"], paths["eval_labels"])
    train_images, train_labels = mnist_task.filter_digits(train_images,
                                                          train_labels)
    eval_images, eval_labels = mnist_task.filter_digits(eval_images,
                                                        eval_labels)
    train_pixels = mnist_task.downsample(train_images)
    eval_pixels = mnist_task.downsample(eval_images)
    split = mnist_task.make_splits(
        len(train_pixels), opts["spec"],
        _seed_int(cfg.master_seed, "data", "mnist", "split"))
    stats = mnist_task.fit_recon_standardizer(train_pixels[split.source_train])

    def subset(idx, name):
        return mnist_task.build_dataset(train_pixels[idx], train_labels[idx],
                                        stats, name=name)

    return SuiteData(
        source_train=subset(split.source_train, "source_train"),
        source_val=subset(split.source_val, "source_val"),
        target_train=subset(split.target_train, "target_train"),
        target_val=subset(split.target_val, "target_val"),
        test=mnist_task.build_dataset(eval_pixels, eval_labels, stats,
                                      name="eval"),
        source_adapter=mnist_task.DigitAdapter(mnist_task.SOURCE_DIGIT),
        target_adapter=mnist_task.DigitAdapter(mnist_task.TARGET_DIGIT),
        source_arch=mnist_task.mnist_architecture(),
        target_arch=mnist_task.mnist_architecture(),
        source_metric="accuracy",
        target_metric="accuracy",
        target_metric_higher_is_better=True,
        info={"spec": opts["spec"], "split": split, "recon_stats": stats},
    )


def build_suite_data(cfg: ExperimentConfig) -> SuiteData:
    return {"mnist": _build_mnist, "d2d": _build_d2d, "miso": _build_miso}[
        cfg.suite](cfg)


# ---------------------------------------------------------------------------
# evaluation


def evaluate(model: StagedModel, testset: LabeledDataset, adapter,
             higher_is_better=True) -> dict:
    """Suite metric on a held-out set, plus per-sample detail where the
    adapter provides it (localization errors for CDF curves)."""
    if len(testset) == 0:
        raise ConfigurationError("empty test set")
    stats = evaluate_model(model, testset, adapter)
    out = {"utility": stats["utility"], "task_loss": stats["task_loss"]}
    if hasattr(adapter, "errors_m"):
        outputs = model.predict(testset.inputs)
        out["errors_m"] = adapter.errors_m(outputs, testset)
        out["metric"] = float(out["errors_m"].mean())
    else:
        out["metric"] = stats["utility"]
    return out


def suite_baselines(data: SuiteData, seed=0) -> dict:
    """Classical reference rows for the suite's test set."""
    rows = {}
    if isinstance(data.source_adapter, d2d_task.SumRateAdapter):
        chan = data.info["channel_config"]
        gains = data.test.extras["gains"]
        x_fp = d2d_task.fp_sum_rate(gains, chan)
        rates = d2d_task.link_rates(gains, x_fp, chan)
        rows["fp_sum_rate_mbps"] = float(rates.sum(axis=1).mean() / 1e6)
        x_mm = d2d_task.maxmin_rate(gains, chan)
        rates_mm = d2d_task.link_rates(gains, x_mm, chan)
        rows["maxmin_min_rate_mbps"] = float(rates_mm.min(axis=1).mean() / 1e6)
        rows["fp_min_rate_mbps"] = float(rates.min(axis=1).mean() / 1e6)
    elif isinstance(data.source_adapter, miso_task.BeamformingAdapter):
        chan = data.info["channel_config"]
        channels = data.test.extras["channels"]
        perfect = miso_task.perfect_beamformers(channels)
        rows["perfect_snr_db"] = float(
            miso_task.beamform_snr(perfect, channels, chan).mean())
        rand = miso_task.random_beamformers(
            _seed_int(seed, "baseline", "random-beams"), len(channels), chan)
        rows["random_snr_db"] = float(
            miso_task.beamform_snr(rand, channels, chan).mean())
    return rows


# ---------------------------------------------------------------------------
# run orchestration


@dataclass
class SourceRun:
    model: StagedModel  # best-validation checkpoint restored
    report: object
    alpha: float
    test_metrics: dict


@dataclass
class TargetRun:
    model_best: StagedModel
    model_final: StagedModel
    report: object
    test_best: dict
    test_final: dict


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    data: SuiteData
    source_runs: dict  # (seed, alpha) -> SourceRun
    target_runs: dict  # (seed, method) -> TargetRun
    baselines: dict
    table: dict


def _train_source_phase(cfg, data, alpha, seed) -> SourceRun:
    init_seed = _seed_int(seed, "init", "source")
    model = build_staged_model(data.source_arch, with_reconstruction=alpha > 0,
                               seed=init_seed)
    tc = _phase_cfg(SOURCE_TRAIN_DEFAULTS[cfg.suite], cfg.source_train, alpha,
                    _seed_int(seed, "shuffle", "source"))
    report = train_source(model, data.source_train, data.source_val,
                          data.source_adapter, tc)
    report.restore_best(model)
    metrics = evaluate(model, data.test, data.source_adapter)
    return SourceRun(model, report, alpha, metrics)


def _train_target_phase(cfg, data, method, seed, source: SourceRun) -> TargetRun:
    init_seed = _seed_int(seed, "init", "target")
    if method == "regular":
        model = build_staged_model(data.target_arch, with_reconstruction=False,
                                   seed=init_seed)
    else:
        model = transfer_feature_stage(source.model, data.target_arch,
                                       seed=init_seed)
    tc = _phase_cfg(TARGET_TRAIN_DEFAULTS[cfg.suite], cfg.target_train, 0.0,
                    _seed_int(seed, "shuffle", "target"))
    report = train_target(model, data.target_train, data.target_val,
                          data.target_adapter, tc)
    model_final = model.copy()
    report.restore_final(model_final)
    report.restore_best(model)
    return TargetRun(
        model_best=model,
        model_final=model_final,
        report=report,
        test_best=evaluate(model, data.test, data.target_adapter),
        test_final=evaluate(model_final, data.test, data.target_adapter),
    )


def _mean_std(values):
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()),
            "per_seed": [float(v) for v in arr]}


def build_results_table(cfg: ExperimentConfig, data: SuiteData, source_runs,
                        target_runs, baselines) -> dict:
    table = {
        "suite": cfg.suite,
        "alpha": cfg.alpha,
        "seeds": list(cfg.seeds),
        "config_hash": cfg.config_hash(),
        "source": {"metric": data.source_metric, "methods": {}},
        "target": {"metric": data.target_metric,
                   "higher_is_better": data.target_metric_higher_is_better,
                   "methods": {}},
        "baselines": baselines,
        "runs": {},
    }
    for method in cfg.methods:
        alpha = cfg.alpha if method == "reconstruction" else 0.0
        vals = [source_runs[(s, alpha)].test_metrics["metric"]
                for s in cfg.seeds]
        table["source"]["methods"][method] = _mean_std(vals)
        best = [target_runs[(s, method)].test_best["metric"] for s in cfg.seeds]
        final = [target_runs[(s, method)].test_final["metric"]
                 for s in cfg.seeds]
        table["target"]["methods"][method] = {
            "early_stopped": _mean_std(best),
            "final_epoch": _mean_std(final),
        }
        for s in cfg.seeds:
            run_id = f"{cfg.suite}-{method}-seed{s}"
            table["runs"][run_id] = {
                "seed": s, "method": method,
                "source_epochs": source_runs[(s, alpha)].report.epochs_run,
                "target_epochs": target_runs[(s, method)].report.epochs_run,
                "target_best_epoch": target_runs[(s, method)].report.best_epoch,
            }
    return table


def run_experiment(cfg: ExperimentConfig, data: SuiteData = None,
                   emit: bool = True, verbose: bool = False) -> ExperimentResult:
    data = data or build_suite_data(cfg)
    source_runs, target_runs = {}, {}
    needed_alphas = sorted({0.0 if m != "reconstruction" else cfg.alpha
                            for m in cfg.methods})
    for seed in cfg.seeds:
        for alpha in needed_alphas:
            if (seed, alpha) not in source_runs:
                source_runs[(seed, alpha)] = _train_source_phase(
                    cfg, data, alpha, seed)
                if verbose:
                    run = source_runs[(seed, alpha)]
                    print(f"[seed {seed}] source alpha={alpha}: "
                          f"{data.source_metric}="
                          f"{run.test_metrics['metric']:.4f} "
                          f"({run.report.epochs_run} epochs)")
        for method in cfg.methods:
            alpha = cfg.alpha if method == "reconstruction" else 0.0
            target_runs[(seed, method)] = _train_target_phase(
                cfg, data, method, seed, source_runs[(seed, alpha)])
            if verbose:
                run = target_runs[(seed, method)]
                print(f"[seed {seed}] target {method}: "
                      f"{data.target_metric}={run.test_best['metric']:.4f} "
                      f"(final {run.test_final['metric']:.4f}, "
                      f"best epoch {run.report.best_epoch})")
    baselines = suite_baselines(data, seed=cfg.master_seed)
    table = build_results_table(cfg, data, source_runs, target_runs, baselines)
    result = ExperimentResult(cfg, data, source_runs, target_runs, baselines,
                              table)
    if emit:
        emit_reports(result, Path(cfg.output_dir))
    return result


# ---------------------------------------------------------------------------
# artifacts


def write_curves_csv(path, report) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_loss,train_utility,val_utility\n")
        for row in report.curves_rows():
            fh.write(",".join(f"{v}" for v in row) + "\n")


def save_staged_model(directory: Path, model: StagedModel) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, stage in model.stages():
        save_mlp(directory / f"{name}.rtlm", stage)


def load_staged_model(directory: Path) -> StagedModel:
    directory = Path(directory)
    feature = load_mlp(directory / "feature.rtlm")
    optimization = load_mlp(directory / "optimization.rtlm")
    recon_path = directory / "reconstruction.rtlm"
    reconstruction = load_mlp(recon_path) if recon_path.exists() else None
    return StagedModel(feature, optimization, reconstruction)


def emit_reports(result: ExperimentResult, outdir: Path) -> None:
    cfg = result.config
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
    with open(outdir / "results.json", "w") as fh:
        json.dump(result.table, fh, indent=2, sort_keys=True)
    for (seed, alpha), run in result.source_runs.items():
        tag = f"seed{seed}/source-alpha{alpha:g}"
        (outdir / "curves" / f"seed{seed}").mkdir(parents=True, exist_ok=True)
        write_curves_csv(outdir / "curves" / f"{tag}.csv", run.report)
        save_staged_model(outdir / "checkpoints" / tag, run.model)
    for (seed, method), run in result.target_runs.items():
        tag = f"seed{seed}/target-{method}"
        (outdir / "curves" / f"seed{seed}").mkdir(parents=True, exist_ok=True)
        write_curves_csv(outdir / "curves" / f"{tag}.csv", run.report)
        save_staged_model(outdir / "checkpoints" / tag / "best", run.model_best)
        save_staged_model(outdir / "checkpoints" / tag / "final",
                          run.model_final)
        if "errors_m" in run.test_best:
            cdf_dir = outdir / "cdf"
            cdf_dir.mkdir(parents=True, exist_ok=True)
            errors = np.sort(run.test_best["errors_m"])
            with open(cdf_dir / f"localization-{method}-seed{seed}.csv",
                      "w") as fh:
                fh.write("error_m,cdf\n")
                for i, e in enumerate(errors):
                    fh.write(f"{e},{(i + 1) / len(errors)}\n")
    write_table_csv(outdir / "table.csv", result.table)


def write_table_csv(path, table: dict) -> None:
    """Flat per-method summary mirroring the results tables."""
    rows = []
    src_metric = table["source"]["metric"]
    for method, cell in table["source"]["methods"].items():
        rows.append(("source", src_metric, method, cell["mean"], cell["std"],
                     ""))
    for method, cell in table["target"]["methods"].items():
        rows.append(("target", table["target"]["metric"], method,
                     cell["early_stopped"]["mean"],
                     cell["early_stopped"]["std"],
                     cell["final_epoch"]["mean"]))
    for name, value in table["baselines"].items():
        rows.append(("baseline", name, "", value, "", ""))
    with open(path, "w") as fh:
        fh.write("phase,metric,method,mean_early_stopped,std,mean_final_epoch\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# architecture verification


EXPECTED_COUNTS = {
    "d2d": {"feature": 52900, "optimization": 5070, "reconstruction": 40300},
    "miso": {"feature": 64150, "optimization": 29896,
             "target_optimization": 36702, "reconstruction": 8059},
}
MNIST_COUNTS = {"feature": 6325, "optimization": 271, "reconstruction": 6400}


def verify_architecture(suite: str = None) -> dict:
    """Build each suite's staged model and check stage parameter counts
    against the published architecture. Exact, zero tolerance."""
    suites = [suite] if suite else ["d2d", "miso", "mnist"]
    report = {}
    for name in suites:
        if name == "d2d":
            model = build_staged_model(d2d_task.d2d_architecture(10), True, 0)
            got = model.stage_parameter_counts()
            expected = EXPECTED_COUNTS["d2d"]
        elif name == "miso":
            model = build_staged_model(miso_task.miso_architecture("beamforming"),
                                       True, 0)
            got = model.stage_parameter_counts()
            loc = build_staged_model(miso_task.miso_architecture("localization"),
                                     False, 0)
            got["target_optimization"] = loc.stage_parameter_counts()[
                "optimization"]
            expected = EXPECTED_COUNTS["miso"]
        elif name == "mnist":
            model = build_staged_model(mnist_task.mnist_architecture(), True, 0)
            got = model.stage_parameter_counts()
            expected = MNIST_COUNTS
        else:
            raise ConfigurationError(f"unknown suite {name!r}")
        mismatches = {k: (got.get(k), v) for k, v in expected.items()
                      if got.get(k) != v}
        report[name] = {"counts": got, "expected": expected, "ok": not mismatches}
        if mismatches and name != "mnist":
            raise ConfigurationError(
                f"{name} stage parameter counts {got} do not match the "
                f"published architecture {expected}")
    return report
