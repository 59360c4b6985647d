"""End-to-end MNIST pipeline on a synthetic IDX corpus.

The real corpus is not always available, so this builds a small fake one
(blob-shaped digits for 0/1/8 plus distractors), writes genuine IDX files,
and runs the full three-method experiment through the harness. It checks
pipeline mechanics and learnability on the synthetic classes, not the
published accuracy numbers (those live in the acceptance suite).
"""

import gzip
import struct

import numpy as np
import pytest

from reconxfer.experiments import ExperimentConfig, run_experiment


def draw_digit(rng, digit):
    img = rng.uniform(0.0, 0.15, size=(28, 28))
    yy, xx = np.mgrid[0:28, 0:28]
    if digit == 1:
        c = rng.integers(10, 18)
        img[(np.abs(xx - c) < 2) & (yy > 4) & (yy < 24)] += 0.8
    elif digit == 0:
        r = ((yy - 14) ** 2 + (xx - 14) ** 2) ** 0.5
        img[np.abs(r - 8) < 1.8] += 0.8
    elif digit == 8:
        for cy in (9, 19):
            r = ((yy - cy) ** 2 + (xx - 14) ** 2) ** 0.5
            img[np.abs(r - 4.5) < 1.6] += 0.8
    else:
        img[(yy + xx) % 9 < 2] += 0.5
    return np.clip(img + rng.normal(0, 0.05, size=(28, 28)), 0, 1)


def write_corpus(directory, n_train=900, n_eval=240, seed=0):
    rng = np.random.default_rng(seed)

    def emit(n, stem):
        digits = rng.choice([0, 1, 8, 3], size=n,
                            p=[0.3, 0.3, 0.3, 0.1]).astype(np.uint8)
        images = np.stack([draw_digit(rng, d) for d in digits])
        blob = struct.pack(">IIII", 2051, n, 28, 28)
        blob += (images * 255).astype(np.uint8).tobytes()
        (directory / f"{stem}-images-idx3-ubyte.gz").write_bytes(
            gzip.compress(blob))
        lab = struct.pack(">II", 2049, n) + digits.tobytes()
        (directory / f"{stem}-labels-idx1-ubyte.gz").write_bytes(
            gzip.compress(lab))

    emit(n_train, "train")
    emit(n_eval, "t10k")


def test_mnist_pipeline_on_synthetic_corpus(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_corpus(corpus, n_train=2400, n_eval=400)
    cfg = ExperimentConfig(
        suite="mnist",
        seeds=[1],
        data=dict(spec="B", dir=str(corpus), download=False),
        source_train=dict(max_epochs=60, patience=60, early_stopping=False),
        target_train=dict(max_epochs=60, patience=60, early_stopping=False),
        output_dir=str(tmp_path / "out"),
    )
    result = run_experiment(cfg, emit=True)
    table = result.table
    # the synthetic source classes are easy for a full model
    for method, cell in table["source"]["methods"].items():
        assert cell["mean"] > 0.95, (method, cell)
    # regular and reconstruction clearly learn the target; conventional
    # transfer is allowed to trail (its features are source-specialized)
    tgt = table["target"]["methods"]
    assert tgt["regular"]["early_stopped"]["mean"] > 0.9
    assert tgt["reconstruction"]["early_stopped"]["mean"] > 0.9
    assert tgt["reconstruction"]["early_stopped"]["mean"] >= \
        tgt["conventional"]["early_stopped"]["mean"]
    assert (tmp_path / "out" / "curves" / "seed1" / "source-alpha5.csv").exists()


def test_mnist_missing_corpus_is_actionable(tmp_path):
    from reconxfer.errors import DataError

    cfg = ExperimentConfig(
        suite="mnist", seeds=[1],
        data=dict(dir=str(tmp_path / "nowhere"), download=False),
    )
    with pytest.raises(DataError, match="MNIST corpus not found"):
        run_experiment(cfg, emit=False)
