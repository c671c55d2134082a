"""Experiment orchestration: generation, training runs, sweeps, oracles.

Dataset generation walks devices and frames with seeds derived from a
single master seed, so a configuration determines its dataset bytes,
the trained model, and every reported metric.  Runs train the
convolutional classifier on the train split and report per-SNR accuracy
on the held-out frames; sweeps repeat a run along one axis and merge
the curves.  The theorem check and variance probe drive the extractor
against closed-form references instead of trained models.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from . import channel as chan
from . import cnn as cnn_mod
from . import dataset as ds_mod
from . import extractor as ext
from . import impairments as imp
from . import link as link_mod

LOGGER = logging.getLogger(__name__)

METHODS = ("lldr", "dolos", "raw_iq", "no_subband")
CHANNEL_PRESETS = ("tdl4", "tdl20", "tdl24")
DEFAULT_SNR_GRID_DB = tuple(float(s) for s in range(-10, 35, 5))
SWEEP_AXES = ("subband_width", "n_devices", "channel_preset")
CURVE_COLUMNS = ("method", "axis_value", "snr_db", "accuracy", "n_test")

# frozen after the first oracle run of the theorem suite
THEOREM_MEDIAN_TOL = 0.05


@dataclass(frozen=True, kw_only=True)
class ExperimentConfig:
    """One experiment: population, frame counts, SNR grid, extractor."""

    master_seed: int
    n_devices: int = 30
    frames_train: int = 9000
    frames_test: int = 900
    snr_grid_db: tuple = DEFAULT_SNR_GRID_DB
    channel_preset: str = "tdl20"
    subband_width: int = 16
    method: str = "lldr"
    normalization_mode: str = "oracle-cfr-mean"

    def __post_init__(self):
        if self.n_devices < 1 or self.frames_train < 1 or self.frames_test < 0:
            raise ValueError("device and frame counts must be positive")
        if not self.snr_grid_db:
            raise ValueError("SNR grid must be non-empty")
        if self.channel_preset not in CHANNEL_PRESETS:
            raise ValueError(f"unknown channel preset {self.channel_preset!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.subband_width not in ext.SUBBAND_WIDTHS:
            raise ValueError(f"unsupported sub-band width {self.subband_width}")
        if self.normalization_mode not in ext.NORMALIZATION_MODES:
            raise ValueError(
                f"unknown normalization mode {self.normalization_mode!r}")
        object.__setattr__(self, "snr_grid_db",
                           tuple(float(s) for s in self.snr_grid_db))

    @property
    def frames_per_device(self) -> int:
        return self.frames_train + self.frames_test


def desk_config(master_seed: int, **overrides) -> ExperimentConfig:
    """Desk-scale preset: 10 devices, 600/100 frames, single 20 dB point."""
    base = dict(n_devices=10, frames_train=600, frames_test=100,
                snr_grid_db=(20.0,))
    base.update(overrides)
    return ExperimentConfig(master_seed=master_seed, **base)


def config_echo(cfg: ExperimentConfig) -> dict:
    echo = dataclasses.asdict(cfg)
    echo["snr_grid_db"] = list(cfg.snr_grid_db)
    return echo


def _profile_seed(master_seed: int, device_id: int) -> int:
    return master_seed * 1000 + device_id


def _frame_seeds(master_seed: int, device_id: int, frame_idx: int):
    """Six derived seed words: two channel, two noise, two second-symbol."""
    ss = np.random.SeedSequence((master_seed, device_id, frame_idx))
    return [int(w) for w in ss.generate_state(6)]


def _extract(method, capture, pilot, pilot2, calibration, subband):
    if method == "raw_iq":
        return ext.extract_raw_iq(capture)
    est = link_mod.estimate_channels(capture, pilot)
    if method == "lldr":
        oracle = None
        if subband.normalization_mode == "oracle-cfr-mean":
            oracle = (capture.metadata["h1"], capture.metadata["h2"])
        return ext.extract_lldr(est, calibration, subband, oracle_cfrs=oracle)
    if method == "no_subband":
        return ext.extract_no_subband(est, calibration)
    if method == "dolos":
        est2 = link_mod.estimate_channels_sym2(capture, pilot2)
        return ext.extract_dolos(est, est2)
    raise ValueError(f"unknown method {method!r}")


def generate_dataset(cfg: ExperimentConfig, out_path=None) -> ds_mod.Dataset:
    """Simulate every frame of the experiment and pack the feature rows.

    Rows are ordered device-major, frame-minor; each device's first
    `frames_train` frames form the train split and the rest the test
    split.  Frame i carries SNR grid[i % len(grid)], distributing the
    grid evenly over frames.  Every per-frame random quantity derives
    from (master seed, device, frame index), so the same config writes
    byte-identical files.  Frames with degenerate (guard-muted) bands
    are counted in the header and retained.
    """
    link_cfg = link_mod.LinkConfig()
    spec = chan.load_preset(cfg.channel_preset)
    pilot = link_mod.generate_pilot(link_cfg, cfg.master_seed)
    pilot2 = None
    if cfg.method == "dolos":
        pilot2 = link_mod.generate_pilot(link_cfg, cfg.master_seed + 1)
    base_pa = imp.load_base_pa_coeffs()
    calibration = ext.CalibrationR.from_rx_profiles(
        *link_mod.DEFAULT_RX_PROFILES, n_subcarriers=link_cfg.n_subcarriers)
    subband = ext.SubbandConfig(width=cfg.subband_width,
                                normalization_mode=cfg.normalization_mode)
    grid = cfg.snr_grid_db
    rows = []
    labels = []
    snr_tags = []
    n_degenerate = 0
    for d in range(cfg.n_devices):
        profile = imp.sample_profile(_profile_seed(cfg.master_seed, d),
                                     base_pa, device_id=d)
        for i in range(cfg.frames_per_device):
            s = _frame_seeds(cfg.master_seed, d, i)
            snr_db = grid[i % len(grid)]
            kwargs = {}
            if pilot2 is not None:
                kwargs = dict(pilot_sym2=pilot2,
                              noise_seeds_sym2=(s[4], s[5]))
            capture = link_mod.simulate_frame(
                pilot, profile, link_mod.DEFAULT_RX_PROFILES, spec,
                (s[0], s[1]), (s[2], s[3]), link_cfg, snr_db, **kwargs)
            feature = _extract(cfg.method, capture, pilot, pilot2,
                               calibration, subband)
            if np.any(feature.degenerate_bands):
                n_degenerate += 1
                LOGGER.debug("degenerate bands: device %d frame %d", d, i)
            rows.append(ext.feature_to_vector(feature))
            labels.append(d)
            snr_tags.append(snr_db)
        LOGGER.info("device %d/%d simulated", d + 1, cfg.n_devices)
    features = np.asarray(rows, dtype=np.float32)
    header = ds_mod.make_header(
        config_echo(cfg), link_cfg.n_subcarriers, features.shape[1],
        len(features), cfg.n_devices,
        extras={"n_degenerate_rows": n_degenerate},
    )
    data = ds_mod.Dataset(features=features,
                          labels=np.asarray(labels, dtype=np.int32),
                          snr_tags=np.asarray(snr_tags, dtype=np.float32),
                          header=header)
    if out_path is not None:
        ds_mod.save_dataset(out_path, data.features, data.labels,
                            data.snr_tags, header)
    return data


def split_dataset(data: ds_mod.Dataset):
    """Split device-major rows into the train and test frame ranges."""
    cfg = data.header["config"]
    per_dev = int(cfg["frames_train"]) + int(cfg["frames_test"])
    frame_idx = np.arange(data.n_rows) % per_dev
    train_mask = frame_idx < int(cfg["frames_train"])

    def view(mask, name):
        header = dict(data.header)
        header["split"] = name
        header["n_rows"] = int(np.count_nonzero(mask))
        return ds_mod.Dataset(features=data.features[mask],
                              labels=data.labels[mask],
                              snr_tags=data.snr_tags[mask], header=header)

    return view(train_mask, "train"), view(~train_mask, "test")


def _confusion_at(predictions, labels, mask, n_classes):
    m = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(m, (labels[mask], predictions[mask]), 1)
    return m


def run_experiment(cfg: ExperimentConfig, train_cfg=None, out_dir=None,
                   dataset_path=None) -> dict:
    """Generate, train, evaluate; return (and optionally write) a report.

    The report carries overall and per-SNR accuracy, the confusion
    matrix at the highest SNR of the grid, the training log, and
    timings.  With `out_dir` set, metrics.json, curve.csv, training
    log, and the model checkpoint are written there.
    """
    if cfg.frames_test < 1:
        raise ValueError("running an experiment needs test frames")
    if dataset_path is not None and os.path.dirname(dataset_path):
        os.makedirs(os.path.dirname(dataset_path), exist_ok=True)
    t0 = time.perf_counter()
    data = generate_dataset(cfg, out_path=dataset_path)
    t_gen = time.perf_counter() - t0
    train, test = split_dataset(data)
    spec = cnn_mod.CnnSpec(n_classes=cfg.n_devices,
                           input_len=data.feature_len)
    train_cfg = train_cfg or cnn_mod.TrainConfig(seed=cfg.master_seed)
    t0 = time.perf_counter()
    model, log = cnn_mod.train(train.features.astype(np.float64),
                               train.labels.astype(int), spec, train_cfg)
    t_train = time.perf_counter() - t0
    metrics = cnn_mod.evaluate(model, test.features.astype(np.float64),
                               test.labels.astype(int),
                               snr_tags=test.snr_tags)
    top_snr = max(cfg.snr_grid_db)
    confusion_top = _confusion_at(metrics["predictions"],
                                  test.labels.astype(int),
                                  np.isclose(test.snr_tags, top_snr),
                                  cfg.n_devices)
    per_snr = {
        f"{snr:g}": {"accuracy": acc,
                     "n": int(np.count_nonzero(test.snr_tags == snr))}
        for snr, acc in metrics["per_snr"].items()
    }
    report = {
        "config": config_echo(cfg),
        "accuracy": metrics["accuracy"],
        "per_snr": per_snr,
        "top_snr_db": top_snr,
        "confusion_top_snr": confusion_top.tolist(),
        "n_degenerate_rows": data.header["n_degenerate_rows"],
        "train_log": log,
        "seconds_generate": t_gen,
        "seconds_train": t_train,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
        write_curve_csv(curve_rows(report), os.path.join(out_dir, "curve.csv"))
        cnn_mod.write_training_log(log, os.path.join(out_dir, "training_log.csv"))
        cnn_mod.save_model(model, os.path.join(out_dir, "model.bin"))
    return report


def curve_rows(report: dict, axis_value="") -> list:
    """Per-SNR accuracy rows in the curve CSV column order."""
    cfg = report["config"]
    rows = []
    for snr in cfg["snr_grid_db"]:
        cell = report["per_snr"].get(f"{snr:g}")
        if cell is None:
            continue
        rows.append({"method": cfg["method"], "axis_value": axis_value,
                     "snr_db": snr, "accuracy": cell["accuracy"],
                     "n_test": cell["n"]})
    return rows


def write_curve_csv(rows: list, path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CURVE_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def sweep(base_cfg: ExperimentConfig, axis: str, values, train_cfg=None,
          out_dir=None) -> dict:
    """Repeat run_experiment along one axis, merging curves.

    A failing point is recorded with its error message and the sweep
    continues with the remaining values.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
    rows = []
    results = []
    failures = []
    for value in values:
        LOGGER.info("sweep point %s=%r", axis, value)
        try:
            cfg = dataclasses.replace(base_cfg, **{axis: value})
            report = run_experiment(cfg, train_cfg=train_cfg)
        except Exception as exc:
            LOGGER.warning("sweep point %s=%r failed: %s", axis, value, exc)
            failures.append({"axis_value": value, "error": str(exc)})
            continue
        results.append(report)
        rows.extend(curve_rows(report, axis_value=value))
    summary = {"axis": axis, "rows": rows, "results": results,
               "failures": failures}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_curve_csv(rows, os.path.join(out_dir, "sweep_curve.csv"))
        with open(os.path.join(out_dir, "sweep.json"), "w") as fh:
            json.dump({"axis": axis,
                       "failures": failures,
                       "points": [r["config"] | {"accuracy": r["accuracy"]}
                                  for r in results]}, fh, indent=2)
    return summary


def theorem_check(channel_preset: str = "tdl20", width: int = 16,
                  trials: int = 200, master_seed: int = 42) -> dict:
    """Noiseless closed-form check of the two-antenna ratio identity.

    Each trial draws independent channels for the two antennas, forms
    exact estimates z_i = T H_i R_i, extracts the sub-band feature in
    oracle-cfr-mean mode, and measures |T_hat - R_1 T| / |R_1 T| per
    subcarrier.  The median over all trials and subcarriers is compared
    against the frozen tolerance.
    """
    link_cfg = link_mod.LinkConfig()
    K = link_cfg.n_subcarriers
    pilot = link_mod.generate_pilot(link_cfg, master_seed)
    profile = imp.sample_profile(_profile_seed(master_seed, 0),
                                 imp.load_base_pa_coeffs(), device_id=0)
    t_resp = imp.oracle_tx_response(pilot, profile, link_cfg)
    r_resp = [imp.rx_response(p, K) for p in link_mod.DEFAULT_RX_PROFILES]
    target = r_resp[0] * t_resp
    spec = chan.load_preset(channel_preset)
    calibration = ext.CalibrationR.from_rx_profiles(
        *link_mod.DEFAULT_RX_PROFILES, n_subcarriers=K)
    subband = ext.SubbandConfig(width=width,
                                normalization_mode="oracle-cfr-mean")
    errs = []
    for t in range(trials):
        seeds = np.random.SeedSequence((master_seed, 7, t)).generate_state(2)
        h = [chan.cfr(chan.realize(spec, int(s)), spec, K,
                      link_cfg.subcarrier_spacing_hz).h for s in seeds]
        est = link_mod.ChannelEstimate(z1=t_resp * h[0] * r_resp[0],
                                       z2=t_resp * h[1] * r_resp[1],
                                       snr_db=float("inf"))
        feature = ext.extract_lldr(est, calibration, subband,
                                   oracle_cfrs=(h[0], h[1]))
        errs.append(np.abs(feature.t_hat - target) / np.abs(target))
    median = float(np.median(np.concatenate(errs)))
    return {
        "channel_preset": channel_preset,
        "width": width,
        "trials": trials,
        "median_rel_err": median,
        "tolerance": THEOREM_MEDIAN_TOL,
        "pass": median <= THEOREM_MEDIAN_TOL,
    }


def theorem_suite(channel_preset: str = "tdl20", trials: int = 200,
                  master_seed: int = 42, widths=(4, 16, 32)) -> dict:
    """Theorem check across widths plus the narrow-band ordering."""
    checks = {w: theorem_check(channel_preset, w, trials, master_seed)
              for w in widths}
    medians = {w: checks[w]["median_rel_err"] for w in widths}
    ordered = all(medians[a] < medians[b]
                  for a, b in zip(widths, widths[1:]))
    return {"checks": checks, "widths": tuple(widths),
            "medians": medians, "strictly_ordered": ordered}


def variance_report(master_seed: int = 42,
                    sigma_h_levels=(0.5, 1.0, 2.0),
                    sigma_n_levels=(0.0, 0.05, 0.1, 0.2),
                    trials: int = 1000, width: int = 16) -> dict:
    """Feature-variance grid over noise and channel power levels.

    Reports the variance matrix and whether each fixed-channel-power
    row increases strictly along the noise axis.
    """
    link_cfg = link_mod.LinkConfig()
    profile = imp.sample_profile(_profile_seed(master_seed, 0),
                                 imp.load_base_pa_coeffs(), device_id=0)
    subband = ext.SubbandConfig(width=width,
                                normalization_mode="oracle-cfr-mean")
    probe = ext.variance_probe(profile, link_cfg, sigma_h_levels,
                               sigma_n_levels, trials, master_seed,
                               subband=subband)
    var = probe["var"]
    rows_monotone = [bool(np.all(np.diff(row) > 0)) for row in var]
    return {
        "sigma_h_levels": [float(s) for s in probe["sigma_h"]],
        "sigma_n_levels": [float(s) for s in probe["sigma_n"]],
        "variance": var.tolist(),
        "trials": trials,
        "rows_strictly_increasing": rows_monotone,
        "all_rows_increasing": all(rows_monotone),
    }
