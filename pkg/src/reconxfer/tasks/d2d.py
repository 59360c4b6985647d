"""D2D power-control suite: network generation, rates, classical solvers.

Networks are N transmitter/receiver pairs in a square region with full
frequency reuse. Channel gain g[i, j] (linear power gain, TX j -> RX i)
combines ITU-1411 LOS pathloss, lognormal shadowing and Rayleigh fast
fading; direct links get an extra antenna gain. The network input vector
for learning is the flattened gain matrix in standardized dB scale, which
is also the common-information reconstruction target.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import ConfigurationError, DataError
from ..training import LabeledDataset, TaskAdapter
from ..utils import Standardizer

SPEED_OF_LIGHT = 299792458.0


@dataclass
class D2dConfig:
    n_links: int = 10
    region_m: float = 150.0
    direct_dist_min_m: float = 5.0
    direct_dist_max_m: float = 25.0
    min_cross_sep_m: float = 5.0
    pmax_dbm: float = 30.0
    direct_gain_db: float = 6.0
    noise_dbm_hz: float = -150.0
    bandwidth_hz: float = 5e6
    carrier_hz: float = 2.4e9
    antenna_height_m: float = 1.5
    shadow_std_db: float = 8.0
    max_layout_tries: int = 200

    @property
    def pmax_w(self) -> float:
        return 10.0 ** (self.pmax_dbm / 10.0) / 1000.0

    @property
    def noise_w(self) -> float:
        return 10.0 ** (self.noise_dbm_hz / 10.0) / 1000.0 * self.bandwidth_hz

    def echo(self) -> tuple:
        return (self.region_m, self.direct_dist_min_m, self.direct_dist_max_m,
                self.min_cross_sep_m, self.pmax_dbm, self.direct_gain_db,
                self.noise_dbm_hz, self.bandwidth_hz, self.carrier_hz,
                self.antenna_height_m, self.shadow_std_db)


@dataclass
class D2dBatch:
    gains: np.ndarray  # (count, N, N)
    tx_xy: np.ndarray  # (count, N, 2)
    rx_xy: np.ndarray  # (count, N, 2)
    config: D2dConfig = field(default_factory=D2dConfig)

    def __len__(self):
        return len(self.gains)


# ---------------------------------------------------------------------------
# propagation


def pathloss_itu1411(distance, cfg: D2dConfig = None):
    """ITU-1411 short-range LOS lower-bound median loss, as a linear power
    gain. Below the breakpoint the slope is 20 dB/decade, above it 40."""
    cfg = cfg or D2dConfig()
    d = np.asarray(distance, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("pathloss needs a positive distance")
    lam = SPEED_OF_LIGHT / cfg.carrier_hz
    h2 = cfg.antenna_height_m * cfg.antenna_height_m
    r_bp = 4.0 * h2 / lam
    l_bp = abs(20.0 * np.log10(lam * lam / (8.0 * np.pi * h2)))
    ratio = d / r_bp
    loss_db = l_bp + 6.0 + np.where(ratio <= 1.0,
                                    20.0 * np.log10(ratio),
                                    40.0 * np.log10(ratio))
    return 10.0 ** (-loss_db / 10.0)


def _draw_layouts(count, rng, cfg: D2dConfig):
    n = cfg.n_links
    tx = rng.uniform(0.0, cfg.region_m, size=(count, n, 2))
    dist = rng.uniform(cfg.direct_dist_min_m, cfg.direct_dist_max_m, size=(count, n))
    rx = np.empty_like(tx)
    pending = np.ones((count, n), dtype=bool)
    # keep the drawn distance, resample only the bearing until inside region
    while pending.any():
        k = int(pending.sum())
        bearing = rng.uniform(0.0, 2.0 * np.pi, size=k)
        offs = dist[pending][:, None] * np.stack(
            [np.cos(bearing), np.sin(bearing)], axis=1)
        cand = tx[pending] + offs
        ok = ((cand >= 0.0) & (cand <= cfg.region_m)).all(axis=1)
        idx = np.flatnonzero(pending.ravel())
        rx.reshape(-1, 2)[idx[ok]] = cand[ok]
        pending.ravel()[idx[ok]] = False
    return tx, rx, dist


def _cross_distances(tx, rx):
    # (count, N, N): distance from TX j to RX i
    diff = rx[:, :, None, :] - tx[:, None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def generate_networks(count, seed, cfg: D2dConfig = None) -> D2dBatch:
    """Seeded batch of D2D networks with min cross-pair separation enforced
    by whole-layout rejection."""
    cfg = cfg or D2dConfig()
    rng = np.random.default_rng(seed)
    n = cfg.n_links
    tx = np.empty((count, n, 2))
    rx = np.empty((count, n, 2))
    need = np.arange(count)
    for _ in range(cfg.max_layout_tries):
        t, r, _ = _draw_layouts(len(need), rng, cfg)
        pair = _cross_distances(t, r)
        off = ~np.eye(n, dtype=bool)
        ok = (pair[:, off] >= cfg.min_cross_sep_m).all(axis=1)
        tx[need[ok]] = t[ok]
        rx[need[ok]] = r[ok]
        need = need[~ok]
        if len(need) == 0:
            break
    else:
        raise ConfigurationError(
            f"layout rejection budget exhausted with {len(need)} layouts left; "
            "reseed or relax min_cross_sep_m"
        )
    dist = _cross_distances(tx, rx)
    gain_db = 10.0 * np.log10(pathloss_itu1411(dist, cfg))
    gain_db += rng.normal(0.0, cfg.shadow_std_db, size=dist.shape)
    eye = np.eye(n, dtype=bool)
    gain_db[:, eye] += cfg.direct_gain_db
    fading = rng.exponential(1.0, size=dist.shape)  # |CN(0,1)|^2
    gains = 10.0 ** (gain_db / 10.0) * fading
    return D2dBatch(gains, tx, rx, cfg)


def generate_network(seed, cfg: D2dConfig = None):
    """Single network; returns its (N, N) gain matrix plus coordinates."""
    batch = generate_networks(1, seed, cfg)
    return D2dBatch(batch.gains, batch.tx_xy, batch.rx_xy, batch.config)


# ---------------------------------------------------------------------------
# rates and solvers (thin config-aware wrappers over the kernels)


def _batched(gains):
    gains = np.asarray(gains, dtype=np.float64)
    single = gains.ndim == 2
    return (gains[None] if single else gains), single


def link_rates(gains, x, cfg: D2dConfig = None):
    """Per-link achievable rates in bit/s under power fractions x."""
    cfg = cfg or D2dConfig()
    g, single = _batched(gains)
    x = np.asarray(x, dtype=np.float64)
    p = (x[None] if single else x) * cfg.pmax_w
    rates = kernels.link_rates(g, p, cfg.noise_w) * cfg.bandwidth_hz
    return rates[0] if single else rates


def sum_rate(rates):
    return np.asarray(rates).sum(axis=-1)


def min_rate(rates):
    return np.asarray(rates).min(axis=-1)


def fp_sum_rate(gains, cfg: D2dConfig = None, iters: int = 100):
    """Sum-rate power control by the quadratic-transform iteration."""
    cfg = cfg or D2dConfig()
    g, single = _batched(gains)
    pmax = np.full(g.shape[1], cfg.pmax_w)
    x = kernels.fp_solve(g, pmax, cfg.noise_w, iters=iters)
    return x[0] if single else x


def maxmin_rate(gains, cfg: D2dConfig = None, rate_tol: float = 1e3):
    """Max-min rate power control; rate_tol is in bit/s."""
    cfg = cfg or D2dConfig()
    g, single = _batched(gains)
    pmax = np.full(g.shape[1], cfg.pmax_w)
    x = kernels.maxmin_solve(g, pmax, cfg.noise_w,
                             rate_tol=rate_tol / cfg.bandwidth_hz)
    return x[0] if single else x


# ---------------------------------------------------------------------------
# learning interface


def d2d_architecture(n_links: int = 10):
    from ..training import Architecture
    from ..nn import SIGMOID

    n2 = n_links * n_links
    return Architecture(
        feature_dims=[n2, int(1.5 * n2), int(1.5 * n2), n2],
        optimization_dims=[n2, 4 * n_links, 2 * n_links, n_links],
        reconstruction_dims=[n2, 2 * n2, n2],
        output_activation=SIGMOID,
    )


def fit_input_standardizer(batch: D2dBatch) -> Standardizer:
    flat_db = 10.0 * np.log10(batch.gains.reshape(len(batch), -1))
    return Standardizer.fit(flat_db)


def build_dataset(batch: D2dBatch, stats: Standardizer, name="") -> LabeledDataset:
    """Inputs are standardized dB gains; the reconstruction target is the
    input itself (common information = the problem input)."""
    flat_db = 10.0 * np.log10(batch.gains.reshape(len(batch), -1))
    inputs = stats.transform(flat_db)
    return LabeledDataset(inputs, recon_targets=inputs,
                          extras={"gains": batch.gains}, name=name)


class SumRateAdapter(TaskAdapter):
    """Unsupervised source task: minimize the negated sum rate.

    The training loss is the negated per-link mean rate in bit/s/Hz (not
    the raw bit/s sum), so the suite's published alpha trades off on the
    same footing as the standardized reconstruction MSE.
    """

    utility_name = "sum_rate_mbps"

    def __init__(self, cfg: D2dConfig = None):
        self.cfg = cfg or D2dConfig()

    def loss_and_grad(self, outputs, batch):
        cfg = self.cfg
        n = outputs.shape[1]
        powers = outputs * cfg.pmax_w
        rates, grad_p = kernels.sum_rate_grad(batch.extras["gains"], powers,
                                              cfg.noise_w)
        loss = -float(rates.sum(axis=1).mean()) / n
        dout = -grad_p * (cfg.pmax_w / (len(outputs) * n))
        return loss, dout

    def utility(self, outputs, batch):
        cfg = self.cfg
        rates = kernels.link_rates(batch.extras["gains"], outputs * cfg.pmax_w,
                                   cfg.noise_w)
        return float(rates.sum(axis=1).mean()) * cfg.bandwidth_hz / 1e6


class MinRateAdapter(TaskAdapter):
    """Unsupervised target task: minimize the negated worst-link rate."""

    utility_name = "min_rate_mbps"

    def __init__(self, cfg: D2dConfig = None):
        self.cfg = cfg or D2dConfig()

    def loss_and_grad(self, outputs, batch):
        cfg = self.cfg
        powers = outputs * cfg.pmax_w
        rates, grad_p = kernels.min_rate_grad(batch.extras["gains"], powers,
                                              cfg.noise_w)
        loss = -float(rates.min(axis=1).mean())
        dout = -grad_p * (cfg.pmax_w / len(outputs))
        return loss, dout

    def utility(self, outputs, batch):
        cfg = self.cfg
        rates = kernels.link_rates(batch.extras["gains"], outputs * cfg.pmax_w,
                                   cfg.noise_w)
        return float(rates.min(axis=1).mean()) * cfg.bandwidth_hz / 1e6


# ---------------------------------------------------------------------------
# dataset files: header (magic, version, N, count, config echo) + row-major
# f64 gain matrices, little-endian

_MAGIC = b"RXD2"
_ECHO_FIELDS = 11


def save_networks(path, batch: D2dBatch) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIQ", 1, batch.config.n_links, len(batch)))
        fh.write(struct.pack(f"<{_ECHO_FIELDS}d", *batch.config.echo()))
        fh.write(np.ascontiguousarray(batch.gains, dtype="<f8").tobytes())


def load_networks(path, cfg: D2dConfig = None) -> D2dBatch:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise DataError(f"{path}: not a D2D dataset (magic {blob[:4]!r})")
    version, n, count = struct.unpack_from("<IIQ", blob, 4)
    if version != 1:
        raise DataError(f"{path}: unsupported dataset version {version}")
    echo = struct.unpack_from(f"<{_ECHO_FIELDS}d", blob, 20)
    offset = 20 + _ECHO_FIELDS * 8
    expect = count * n * n * 8
    if len(blob) - offset < expect:
        raise DataError(f"{path}: truncated gains payload")
    gains = np.frombuffer(blob, dtype="<f8", count=count * n * n,
                          offset=offset).reshape(count, n, n).copy()
    cfg = cfg or D2dConfig(n_links=n)
    if tuple(np.round(cfg.echo(), 9)) != tuple(np.round(echo, 9)):
        raise DataError(
            f"{path}: stored channel config {echo} differs from the active "
            f"config {cfg.echo()}"
        )
    coords = np.full((count, n, 2), np.nan)
    return D2dBatch(gains, coords, coords.copy(), cfg)
