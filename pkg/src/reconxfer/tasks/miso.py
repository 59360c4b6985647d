"""MISO beamforming-to-localization suite.

Three fixed base stations with 4x4 planar arrays serve one ground-level
UE at an unknown position. Channels are Rician: a steering-vector LOS
component determined by the UE geometry plus Rayleigh NLOS, scaled by a
log-distance pathloss. The network never sees the channels; its input is
the uplink pilot measurements taken through a corpus-wide fixed pilot
block. The common information is the per-BS geometry (distance and the
two steering-phase trig terms), 9 values total.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, DataError, ShapeError
from ..training import Architecture, LabeledDataset, TaskAdapter
from ..utils import Standardizer


@dataclass
class MisoConfig:
    bs_xyz: np.ndarray = field(default_factory=lambda: np.array(
        [[0.0, 0.0, 50.0], [0.0, 100.0, 50.0], [100.0, 0.0, 50.0]]))
    ue_low_m: float = 10.0
    ue_high_m: float = 90.0
    n_bs: int = 3
    n_antennas: int = 16
    array_cols: int = 4
    n_pilots: int = 4
    rician: float = 10.0
    steer_coef: float = 1.0  # 2 pi (antenna spacing) / wavelength
    pathloss_const_db: float = -32.6
    pathloss_slope_db: float = -36.7
    p_bs_dbm: float = 40.0
    p_ue_dbm: float = 30.0
    noise_dbm_hz: float = -150.0
    bandwidth_hz: float = 1e7

    @property
    def p_bs_w(self):
        return 10.0 ** (self.p_bs_dbm / 10.0) / 1000.0

    @property
    def p_ue_w(self):
        return 10.0 ** (self.p_ue_dbm / 10.0) / 1000.0

    @property
    def noise_w(self):
        return 10.0 ** (self.noise_dbm_hz / 10.0) / 1000.0 * self.bandwidth_hz

    @property
    def input_dim(self):
        return 2 * self.n_bs * self.n_pilots

    @property
    def beam_dim(self):
        return 2 * self.n_bs * self.n_antennas

    @property
    def common_info_dim(self):
        return 3 * self.n_bs

    # region standardization for the localization head
    @property
    def coord_center(self):
        return 0.5 * (self.ue_low_m + self.ue_high_m)

    @property
    def coord_scale(self):
        return 0.5 * (self.ue_high_m - self.ue_low_m)


@dataclass
class PilotBlock:
    pilots: np.ndarray  # (T,) complex, |c_t|^2 = P_UE
    sensing: np.ndarray  # (M, T, K) complex, unit-norm rows
    seed: int = 0


@dataclass
class MisoSceneBatch:
    ue_xy: np.ndarray  # (count, 2)
    distances: np.ndarray  # (count, M)
    azimuth: np.ndarray  # (count, M)
    elevation: np.ndarray  # (count, M)
    channels: np.ndarray  # (count, M, K) complex
    measurements: np.ndarray  # (count, M, T) complex
    config: MisoConfig = field(default_factory=MisoConfig)

    def __len__(self):
        return len(self.ue_xy)


# ---------------------------------------------------------------------------
# pilots / geometry / channels


def _standard_cn(rng, shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)


def make_pilot_block(seed, cfg: MisoConfig = None) -> PilotBlock:
    """Drawn once per corpus; every scene shares these pilots and sensing
    vectors so the input statistics are stationary."""
    cfg = cfg or MisoConfig()
    rng = np.random.default_rng(seed)
    raw = _standard_cn(rng, cfg.n_pilots)
    pilots = np.sqrt(cfg.p_ue_w) * raw / np.abs(raw)
    raw_v = _standard_cn(rng, (cfg.n_bs, cfg.n_pilots, cfg.n_antennas))
    sensing = raw_v / np.linalg.norm(raw_v, axis=-1, keepdims=True)
    return PilotBlock(pilots, sensing, seed=int(seed))


def geometry(ue_xy, cfg: MisoConfig = None):
    """Distances, azimuth and elevation of the BS->UE rays.

    Azimuth is atan2 over the horizontal offset; elevation is the angle
    between the ray and the horizontal plane, so cos(elevation) >= 0.
    """
    cfg = cfg or MisoConfig()
    ue_xy = np.asarray(ue_xy, dtype=np.float64)
    ue = np.concatenate([ue_xy, np.zeros(ue_xy.shape[:-1] + (1,))], axis=-1)
    delta = ue[..., None, :] - cfg.bs_xyz  # (..., M, 3)
    dist = np.linalg.norm(delta, axis=-1)
    azimuth = np.arctan2(delta[..., 1], delta[..., 0])
    horiz = np.hypot(delta[..., 0], delta[..., 1])
    elevation = np.arctan2(np.abs(delta[..., 2]), horiz)
    return dist, azimuth, elevation


def steering_vector(theta, phi, cfg: MisoConfig = None):
    """Planar-array response; every entry has unit modulus."""
    cfg = cfg or MisoConfig()
    k = np.arange(cfg.n_antennas)
    rows = k // cfg.array_cols
    cols = k % cfg.array_cols
    theta = np.asarray(theta, dtype=np.float64)[..., None]
    phi = np.asarray(phi, dtype=np.float64)[..., None]
    phase = cfg.steer_coef * (rows * np.sin(theta) * np.cos(phi)
                              + cols * np.cos(theta) * np.cos(phi))
    return np.exp(1j * phase)


def pathloss_amplitude(dist, cfg: MisoConfig = None):
    cfg = cfg or MisoConfig()
    db = cfg.pathloss_const_db + cfg.pathloss_slope_db * np.log10(dist)
    return 10.0 ** (db / 20.0)


def common_info(dist, azimuth, elevation) -> np.ndarray:
    """Per-BS (distance, sin(az)cos(el), cos(az)cos(el)) triples, BS-major."""
    trig_s = np.sin(azimuth) * np.cos(elevation)
    trig_c = np.cos(azimuth) * np.cos(elevation)
    return np.stack([dist, trig_s, trig_c], axis=-1).reshape(dist.shape[0], -1)


def generate_scenes(count, seed, pilot_block: PilotBlock,
                    cfg: MisoConfig = None, noise: bool = True) -> MisoSceneBatch:
    cfg = cfg or MisoConfig()
    rng = np.random.default_rng(seed)
    ue_xy = rng.uniform(cfg.ue_low_m, cfg.ue_high_m, size=(count, 2))
    dist, azimuth, elevation = geometry(ue_xy, cfg)
    h_los = steering_vector(azimuth, elevation, cfg)
    h_nlos = _standard_cn(rng, (count, cfg.n_bs, cfg.n_antennas))
    eps = cfg.rician
    amp = pathloss_amplitude(dist, cfg)[..., None]
    channels = amp * (np.sqrt(eps / (1 + eps)) * h_los
                      + np.sqrt(1 / (1 + eps)) * h_nlos)
    measurements = np.einsum("mtk,bmk->bmt", pilot_block.sensing.conj(),
                             channels) * pilot_block.pilots
    if noise:
        measurements = measurements + np.sqrt(cfg.noise_w) * _standard_cn(
            rng, measurements.shape)
    return MisoSceneBatch(ue_xy, dist, azimuth, elevation, channels,
                          measurements, cfg)


def measurement_features(measurements) -> np.ndarray:
    """(count, 2MT) real vector: (Re, Im) interleaved per (BS, pilot)."""
    flat = measurements.reshape(len(measurements), -1)
    feats = np.empty((len(flat), 2 * flat.shape[1]))
    feats[:, 0::2] = flat.real
    feats[:, 1::2] = flat.imag
    return feats


# ---------------------------------------------------------------------------
# beamformers


def vec_to_beamformers(vec, cfg: MisoConfig = None):
    """(.., 2MK) real -> (.., M, K) complex; per BS the first K entries are
    the real parts, the next K the imaginary parts."""
    cfg = cfg or MisoConfig()
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape[-1] != cfg.beam_dim:
        raise ShapeError(f"expected {cfg.beam_dim} reals, got {vec.shape[-1]}")
    blocks = vec.reshape(vec.shape[:-1] + (cfg.n_bs, 2, cfg.n_antennas))
    return blocks[..., 0, :] + 1j * blocks[..., 1, :]


def beamformers_to_vec(beams, cfg: MisoConfig = None):
    cfg = cfg or MisoConfig()
    beams = np.asarray(beams)
    stacked = np.stack([beams.real, beams.imag], axis=-2)
    return stacked.reshape(beams.shape[:-2] + (cfg.beam_dim,))


def perfect_beamformers(channels):
    norms = np.linalg.norm(channels, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ConfigurationError("zero channel has no aligned beamformer")
    return channels / norms


def random_beamformers(seed, count, cfg: MisoConfig = None):
    cfg = cfg or MisoConfig()
    rng = np.random.default_rng(seed)
    raw = _standard_cn(rng, (count, cfg.n_bs, cfg.n_antennas))
    return raw / np.linalg.norm(raw, axis=-1, keepdims=True)


def beamform_snr(beams, channels, cfg: MisoConfig = None):
    """Received downlink SNR in dB.

    Per-BS signal powers add: SNR = P_BS * sum_m |b_m^H h_m|^2 / sigma^2.
    The phase-coherent reading |sum_m b_m^H h_m|^2 would credit the three
    base stations with array gain across sites; with this geometry that
    inflates the perfect-vs-random gap to ~16-19 dB instead of the
    published ~13 dB, so the incoherent combination is used throughout.
    """
    cfg = cfg or MisoConfig()
    inner = np.einsum("...mk,...mk->...m", beams.conj(), channels)
    snr = cfg.p_bs_w * (np.abs(inner) ** 2).sum(axis=-1) / cfg.noise_w
    return 10.0 * np.log10(snr)


def miso_source_loss(beam_vec, channels, cfg: MisoConfig = None):
    """Squared distance between the (per-BS normalized) proposal and the
    perfect beamformers, summed over base stations."""
    cfg = cfg or MisoConfig()
    beams = vec_to_beamformers(np.atleast_2d(beam_vec), cfg)
    beams = beams / np.linalg.norm(beams, axis=-1, keepdims=True)
    target = perfect_beamformers(np.atleast_3d(channels).reshape(beams.shape))
    err = np.abs(beams - target) ** 2
    out = err.sum(axis=(-2, -1))
    return float(out[0]) if np.ndim(beam_vec) == 1 else out


# ---------------------------------------------------------------------------
# adapters


class BeamformingAdapter(TaskAdapter):
    """Supervised source task: match the channel-aligned beamformers after
    projecting each per-BS block onto the unit sphere."""

    utility_name = "snr_db"

    def __init__(self, cfg: MisoConfig = None):
        self.cfg = cfg or MisoConfig()

    def _blocks(self, outputs):
        cfg = self.cfg
        u = outputs.reshape(len(outputs), cfg.n_bs, 2 * cfg.n_antennas)
        norms = np.linalg.norm(u, axis=-1, keepdims=True)
        norms = np.maximum(norms, 1e-12)
        return u, norms, u / norms

    def loss_and_grad(self, outputs, batch):
        cfg = self.cfg
        target = batch.extras["perfect_vec"].reshape(
            len(outputs), cfg.n_bs, 2 * cfg.n_antennas)
        u, norms, unit = self._blocks(outputs)
        diff = unit - target
        loss = float((diff ** 2).sum(axis=(1, 2)).mean())
        dot = (unit * target).sum(axis=-1, keepdims=True)
        grad_blocks = 2.0 * (unit * dot - target) / norms / len(outputs)
        return loss, grad_blocks.reshape(outputs.shape)

    def utility(self, outputs, batch):
        cfg = self.cfg
        _, _, unit = self._blocks(outputs)
        beams = vec_to_beamformers(unit.reshape(outputs.shape), cfg)
        snr = beamform_snr(beams, batch.extras["channels"], cfg)
        return float(snr.mean())


class LocalizationAdapter(TaskAdapter):
    """Supervised target task: squared position error in meters; the
    network emits region-standardized coordinates."""

    utility_name = "neg_loc_error_m"

    def __init__(self, cfg: MisoConfig = None):
        self.cfg = cfg or MisoConfig()

    def _to_meters(self, outputs):
        return outputs * self.cfg.coord_scale + self.cfg.coord_center

    def loss_and_grad(self, outputs, batch):
        truth = batch.extras["ue_xy"]
        pred = self._to_meters(outputs)
        err = pred - truth
        loss = float((err ** 2).sum(axis=1).mean())
        grad = 2.0 * err * self.cfg.coord_scale / len(outputs)
        return loss, grad

    def utility(self, outputs, batch):
        truth = batch.extras["ue_xy"]
        pred = self._to_meters(outputs)
        return -float(np.sqrt(((pred - truth) ** 2).sum(axis=1)).mean())

    def errors_m(self, outputs, batch):
        pred = self._to_meters(outputs)
        return np.sqrt(((pred - batch.extras["ue_xy"]) ** 2).sum(axis=1))


def localization_utility(estimate, truth):
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    return -float(np.sqrt(((estimate - truth) ** 2).sum(axis=-1)))


# ---------------------------------------------------------------------------
# learning interface


def miso_architecture(task: str, cfg: MisoConfig = None) -> Architecture:
    from ..nn import LINEAR

    cfg = cfg or MisoConfig()
    feature = [cfg.input_dim, 150, 150, 150, 100]
    recon = [100, 50, 50, cfg.common_info_dim]
    if task == "beamforming":
        opt = [100, 100, 100, cfg.beam_dim]
    elif task == "localization":
        opt = [100, 125, 100, 75, 50, 2]
    else:
        raise ConfigurationError(f"unknown MISO task {task!r}")
    return Architecture(feature, opt, recon, output_activation=LINEAR)


def fit_standardizers(batch: MisoSceneBatch):
    feats = measurement_features(batch.measurements)
    info = common_info(batch.distances, batch.azimuth, batch.elevation)
    return Standardizer.fit(feats), Standardizer.fit(info)


def build_dataset(batch: MisoSceneBatch, input_stats: Standardizer,
                  info_stats: Standardizer, name="") -> LabeledDataset:
    inputs = input_stats.transform(measurement_features(batch.measurements))
    info = info_stats.transform(
        common_info(batch.distances, batch.azimuth, batch.elevation))
    perfect_vec = beamformers_to_vec(perfect_beamformers(batch.channels),
                                     batch.config)
    return LabeledDataset(
        inputs,
        recon_targets=info,
        extras={
            "channels": batch.channels,
            "perfect_vec": perfect_vec,
            "ue_xy": batch.ue_xy,
        },
        name=name,
    )


# ---------------------------------------------------------------------------
# dataset files: pilot block section, then per-scene records (UE truth,
# common info, measurements and channels as interleaved f64), little-endian

_MAGIC = b"RXMI"


def save_scenes(path, batch: MisoSceneBatch, pilot_block: PilotBlock) -> None:
    cfg = batch.config
    m, t, k = cfg.n_bs, cfg.n_pilots, cfg.n_antennas
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIIQq", 1, m, t, k, len(batch),
                             pilot_block.seed))
        fh.write(_complex_bytes(pilot_block.pilots))
        fh.write(_complex_bytes(pilot_block.sensing))
        for i in range(len(batch)):
            fh.write(np.ascontiguousarray(batch.ue_xy[i], dtype="<f8").tobytes())
            info = np.stack([batch.distances[i], batch.azimuth[i],
                             batch.elevation[i]], axis=-1)
            fh.write(np.ascontiguousarray(info, dtype="<f8").tobytes())
            fh.write(_complex_bytes(batch.measurements[i]))
            fh.write(_complex_bytes(batch.channels[i]))


def _complex_bytes(arr):
    inter = np.empty(arr.shape + (2,))
    inter[..., 0] = arr.real
    inter[..., 1] = arr.imag
    return np.ascontiguousarray(inter, dtype="<f8").tobytes()


def _read_complex(blob, offset, shape):
    count = 2 * int(np.prod(shape))
    flat = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
    inter = flat.reshape(shape + (2,))
    return inter[..., 0] + 1j * inter[..., 1], offset + count * 8


def load_scenes(path, cfg: MisoConfig = None):
    cfg = cfg or MisoConfig()
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise DataError(f"{path}: not a MISO dataset (magic {blob[:4]!r})")
    version, m, t, k, count, pilot_seed = struct.unpack_from("<IIIIQq", blob, 4)
    if version != 1:
        raise DataError(f"{path}: unsupported dataset version {version}")
    if (m, t, k) != (cfg.n_bs, cfg.n_pilots, cfg.n_antennas):
        raise DataError(f"{path}: geometry {(m, t, k)} does not match config")
    offset = 4 + struct.calcsize("<IIIIQq")
    pilots, offset = _read_complex(blob, offset, (t,))
    sensing, offset = _read_complex(blob, offset, (m, t, k))
    ue = np.empty((count, 2))
    dist = np.empty((count, m))
    azim = np.empty((count, m))
    elev = np.empty((count, m))
    meas = np.empty((count, m, t), dtype=complex)
    chan = np.empty((count, m, k), dtype=complex)
    for i in range(count):
        ue[i] = np.frombuffer(blob, dtype="<f8", count=2, offset=offset)
        offset += 16
        info = np.frombuffer(blob, dtype="<f8", count=3 * m,
                             offset=offset).reshape(m, 3)
        dist[i], azim[i], elev[i] = info[:, 0], info[:, 1], info[:, 2]
        offset += 3 * m * 8
        meas[i], offset = _read_complex(blob, offset, (m, t))
        chan[i], offset = _read_complex(blob, offset, (m, k))
    batch = MisoSceneBatch(ue, dist, azim, elev, chan, meas, cfg)
    return batch, PilotBlock(pilots, sensing, seed=pilot_seed)
