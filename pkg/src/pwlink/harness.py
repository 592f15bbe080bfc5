"""Batch experiment driver for power and reach sweeps.

One RunConfig fully determines a run.  Every sweep point derives its
random streams from the master seed and the point's physical parameters,
so points are independent of grid order, execution order, and worker
count, and identical configs give byte-identical CSV output.
"""

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.fft import next_fast_len

from .channel import AmpParams, FiberParams, LinkSpec, amplify, propagate_link, propagate_span
from .constellation import build_qam, map_bits
from .detectors import med_classify, train_pw_detector
from .dsp import (
    IqWaveform,
    RrcSpec,
    cd_compensate,
    estimate_phase_rotation,
    matched_filter_downsample,
    rrc_shape,
)
from .errors import ConfigError, InputError
from .metrics import ErrorReport, count_errors, finalize_report

logger = logging.getLogger(__name__)

_DATA_STREAM = 0
_AMP_STREAM = 1

MIN_BIT_ERRORS = 100  # below this a point's Q estimate is statistically weak

CSV_COLUMNS = [
    "mode",
    "symbol_rate_gbaud",
    "dm",
    "reach_km",
    "power_dbm",
    "detector",
    "ser",
    "ber",
    "q_db",
    "n_test",
    "seed",
    "radius",
]


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one simulation campaign."""

    symbol_rate_gbaud: float = 10.0
    n_spans: int = 15
    span_length_km: float = 80.0
    alpha_db_per_km: float = 0.2
    dispersion_ps_nm_km: float = 16.0
    gamma_per_w_km: float = 1.4
    wavelength_nm: float = 1550.0
    gain_db: float = 16.0
    noise_figure_db: float = 5.5
    ase_enabled: bool = True
    dispersion_managed: bool = False
    ssfm_step_km: float = 1.0
    samples_per_symbol: int = 8
    rrc_roll_off: float = 0.1
    rrc_span_symbols: int = 64
    launch_powers_dbm: tuple = (-8.0, -7.0, -6.0, -5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0)
    reaches_km: tuple = ()
    n_train: int = 2000
    n_test: int = 32768
    seed: int = 20260810
    detectors: tuple = ("pw", "med")
    polarization_model: str = "scalar"  # "manakov" for the 8/9 cross-polarization model
    sim_dtype: str = "complex64"
    workers: int = 1

    def __post_init__(self):
        if self.symbol_rate_gbaud <= 0:
            raise ConfigError("symbol_rate_gbaud must be positive")
        if self.n_test < 4096:
            raise ConfigError("n_test below 4096 gives too few errors per point")
        if self.n_train < 32:
            raise ConfigError("n_train must cover every class at least twice")
        if not self.detectors or not set(self.detectors) <= {"pw", "med"}:
            raise ConfigError(f"detectors must be a nonempty subset of pw/med, got {self.detectors}")
        if self.sim_dtype not in ("complex64", "complex128"):
            raise ConfigError(f"sim_dtype must be complex64 or complex128, got {self.sim_dtype}")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def symbol_rate_hz(self) -> float:
        return self.symbol_rate_gbaud * 1e9

    def fiber(self) -> FiberParams:
        return FiberParams(
            alpha_db_per_km=self.alpha_db_per_km,
            dispersion_ps_nm_km=self.dispersion_ps_nm_km,
            gamma_per_w_km=self.gamma_per_w_km,
            length_km=self.span_length_km,
            wavelength_nm=self.wavelength_nm,
            polarization_model=self.polarization_model,
        )

    def link(self, reach_km: Optional[float] = None) -> LinkSpec:
        n_spans = self.n_spans
        if reach_km is not None:
            n_spans = reach_km / self.span_length_km
            if abs(n_spans - round(n_spans)) > 1e-9:
                raise ConfigError(
                    f"reach {reach_km} km is not a multiple of the {self.span_length_km} km span"
                )
            n_spans = int(round(n_spans))
        return LinkSpec(
            span=self.fiber(),
            amp=AmpParams(self.gain_db, self.noise_figure_db, self.ase_enabled),
            n_spans=n_spans,
            dispersion_managed=self.dispersion_managed,
            ssfm_step_km=self.ssfm_step_km,
        )

    def rrc(self) -> RrcSpec:
        return RrcSpec(
            roll_off=self.rrc_roll_off,
            span_symbols=self.rrc_span_symbols,
            samples_per_symbol=self.samples_per_symbol,
        )

    def dtype(self):
        return np.complex64 if self.sim_dtype == "complex64" else np.complex128


@dataclass
class PointResult:
    """Detection outcome of one sweep point."""

    power_dbm: float
    reach_km: float
    reports: dict  # detector name -> ErrorReport
    radii: Optional[tuple] = None  # per-polarization PW radii
    y_test: Optional[np.ndarray] = None  # (2, n_test) post-DSP symbols
    test_labels: Optional[np.ndarray] = None
    detectors: Optional[dict] = None  # polarization index -> PwDetector

    @property
    def radius_mean(self) -> Optional[float]:
        return None if self.radii is None else float(np.mean(self.radii))


@dataclass
class SweepRow:
    mode: str
    symbol_rate_gbaud: float
    dm: bool
    reach_km: float
    power_dbm: float
    detector: str
    ser: float
    ber: float
    q_db: float
    n_test: int
    seed: int
    radius: Optional[float]

    def to_csv(self) -> list:
        return [
            self.mode,
            repr(float(self.symbol_rate_gbaud)),
            int(self.dm),
            repr(float(self.reach_km)),
            repr(float(self.power_dbm)),
            self.detector,
            repr(float(self.ser)),
            repr(float(self.ber)),
            repr(float(self.q_db)),
            self.n_test,
            self.seed,
            "n/a" if self.radius is None else repr(float(self.radius)),
        ]


def guard_symbols(cfg: RunConfig, total_length_km: float) -> int:
    """Edge symbols excluded from accounting: filter span plus CD walk-off."""
    rs = cfg.symbol_rate_hz
    beta2_s2_km = abs(cfg.fiber().beta2_ps2_km) * 1e-24
    spread_s = beta2_s2_km * total_length_km * 2.0 * np.pi * rs * (1.0 + cfg.rrc_roll_off)
    return cfg.rrc_span_symbols + int(np.ceil(1.5 * spread_s * rs))


def _point_entropy(
    cfg: RunConfig, power_dbm: float, reach_km: float, stream: int, replicate: int
) -> list:
    """Seed material tied to the point's parameters, not its grid position.

    Permuting a sweep grid therefore permutes output rows without changing
    any row's values.  Negative parameter values map through two's
    complement to stay valid SeedSequence entropy.
    """
    p_key = int(np.uint64(np.int64(round(power_dbm * 1e6))))
    r_key = int(np.uint64(np.int64(round(reach_km * 1e3))))
    return [cfg.seed, stream, replicate, p_key, r_key]


def run_point(
    cfg: RunConfig,
    power_dbm: float,
    reach_km: Optional[float] = None,
    replicate: int = 0,
    collect_symbols: bool = False,
    collect_detectors: bool = False,
) -> PointResult:
    """Simulate one launch-power/reach point and detect with both detectors.

    The training block is transmitted contiguously ahead of the test block
    through the same channel realization; the PW radius is re-optimized on
    the received training data of each point and each polarization.
    Replicates (same point, fresh noise and data) are selected via the
    replicate index.
    """
    link = cfg.link(reach_km)
    alphabet = build_qam(16)
    rrc = cfg.rrc()

    n_guard = guard_symbols(cfg, link.total_length_km)
    n_payload = cfg.n_train + cfg.n_test
    total_sym = next_fast_len(2 * n_guard + n_payload)

    entropy = _point_entropy(cfg, power_dbm, link.total_length_km, _DATA_STREAM, replicate)
    rng_data = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
    bits = rng_data.integers(0, 2, size=2 * alphabet.bits_per_symbol * total_sym, dtype=np.uint8)
    block = map_bits(bits, alphabet)

    wave = rrc_shape(block, rrc, power_dbm, cfg.symbol_rate_hz, dtype=cfg.dtype())
    amp_seed = _point_entropy(cfg, power_dbm, link.total_length_km, _AMP_STREAM, replicate)
    wave = propagate_link(wave, link, seed=amp_seed)
    wave = cd_compensate(wave, link.span.beta2_ps2_km, link.residual_cd_km)
    rx = matched_filter_downsample(wave, rrc).astype(np.complex128)

    train = slice(n_guard, n_guard + cfg.n_train)
    test = slice(n_guard + cfg.n_train, n_guard + cfg.n_train + cfg.n_test)
    y_train, y_test = rx[:, train], rx[:, test]
    x_train, lab_train = block.symbols[:, train], block.labels[:, train]
    lab_true = block.labels[:, test]

    reports: dict[str, ErrorReport] = {}
    radii = None
    detectors_out = {}
    if "med" in cfg.detectors:
        detected = np.empty_like(lab_true)
        for p in (0, 1):
            theta = estimate_phase_rotation(y_train[p], x_train[p])
            derot = np.exp(-1j * theta)
            scale = float(
                np.abs(np.sum(y_train[p] * np.conj(x_train[p])))
                / np.sum(np.abs(x_train[p]) ** 2)
            )
            detected[p] = med_classify(y_test[p] * derot, alphabet, scale)
        reports["med"] = finalize_report(count_errors(detected, lab_true, alphabet))
    if "pw" in cfg.detectors:
        detected = np.empty_like(lab_true)
        rs = []
        for p in (0, 1):
            det = train_pw_detector(y_train[p], lab_train[p], alphabet)
            detected[p], _ = det.classify(y_test[p])
            rs.append(det.radius)
            if collect_detectors:
                detectors_out[p] = det
        reports["pw"] = finalize_report(count_errors(detected, lab_true, alphabet))
        radii = tuple(rs)

    for name, rep in reports.items():
        if rep.n_bit_errors < MIN_BIT_ERRORS:
            logger.warning(
                "point (%.1f dBm, %.0f km) detector %s: only %d bit errors; "
                "Q confidence is below +/-0.4 dB",
                power_dbm,
                link.total_length_km,
                name,
                rep.n_bit_errors,
            )

    result = PointResult(
        power_dbm=power_dbm,
        reach_km=link.total_length_km,
        reports=reports,
        radii=radii,
    )
    if collect_symbols:
        result.y_test = y_test
        result.test_labels = lab_true
    if collect_detectors:
        result.detectors = detectors_out
    return result


def _point_task(cfg: RunConfig, index: int, power_dbm: float, reach_km):
    return index, run_point(cfg, power_dbm, reach_km)


def _execute_points(cfg: RunConfig, jobs: list) -> list:
    """Run (index, power, reach) jobs, preserving index order in the output."""
    if cfg.workers <= 1:
        results = [_point_task(cfg, *job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_point_task, cfg, *job) for job in jobs]
            results = [f.result() for f in futures]
    results.sort(key=lambda pair: pair[0])
    return [r for _, r in results]


def _rows_for(cfg: RunConfig, mode: str, result: PointResult) -> list[SweepRow]:
    rows = []
    for det in cfg.detectors:
        if det not in result.reports:
            continue
        rep = result.reports[det]
        rows.append(
            SweepRow(
                mode=mode,
                symbol_rate_gbaud=cfg.symbol_rate_gbaud,
                dm=cfg.dispersion_managed,
                reach_km=result.reach_km,
                power_dbm=result.power_dbm,
                detector=det,
                ser=rep.ser,
                ber=rep.ber,
                q_db=rep.q_factor_db,
                n_test=cfg.n_test,
                seed=cfg.seed,
                radius=result.radius_mean if det == "pw" else None,
            )
        )
    return rows


def sweep_power(cfg: RunConfig) -> list[SweepRow]:
    """Q versus launch power at the configured reach."""
    if not cfg.launch_powers_dbm:
        raise ConfigError("launch_powers_dbm is empty")
    jobs = [(i, float(p), None) for i, p in enumerate(cfg.launch_powers_dbm)]
    rows = []
    for result in _execute_points(cfg, jobs):
        rows.extend(_rows_for(cfg, "power", result))
    return rows


def sweep_reach(cfg: RunConfig) -> list[SweepRow]:
    """Q versus transmission reach at a single fixed launch power."""
    if not cfg.reaches_km:
        raise ConfigError("reaches_km is empty")
    if len(cfg.launch_powers_dbm) != 1:
        raise ConfigError("reach mode requires exactly one launch power")
    power = float(cfg.launch_powers_dbm[0])
    jobs = [(i, power, float(r)) for i, r in enumerate(cfg.reaches_km)]
    rows = []
    for result in _execute_points(cfg, jobs):
        rows.extend(_rows_for(cfg, "reach", result))
    return rows


def reach_at_q_threshold(
    rows: list[SweepRow], detector: str, q_threshold_db: float = 10.0
) -> Optional[float]:
    """Reach where Q crosses the threshold, log-linear in reach.

    Interpolates between the last point at or above threshold and the first
    below it; returns None when the sweep never brackets the threshold.
    """
    pts = sorted(
        [(r.reach_km, r.q_db) for r in rows if r.detector == detector], key=lambda t: t[0]
    )
    for (r1, q1), (r2, q2) in zip(pts, pts[1:]):
        if q1 >= q_threshold_db >= q2 and q1 != q2:
            lr = np.log(r1) + (q_threshold_db - q1) * (np.log(r2) - np.log(r1)) / (q2 - q1)
            return float(np.exp(lr))
    return None


def write_sweep_csv(rows: list[SweepRow], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.to_csv())


def write_config_sidecar(cfg: RunConfig, csv_path: str) -> str:
    """JSON sidecar with the fully resolved config, for provenance."""
    sidecar = str(csv_path) + ".config.json"
    with open(sidecar, "w") as f:
        json.dump(asdict(cfg), f, indent=2)
        f.write("\n")
    return sidecar


def dump_constellation(cfg: RunConfig, power_dbm: float, path: str, reach_km=None) -> None:
    """Post-DSP test-symbol cloud of one point, one CSV row per symbol."""
    result = run_point(cfg, power_dbm, reach_km, collect_symbols=True)
    y = result.y_test
    if y is None or y.shape[1] == 0:
        raise InputError("empty test set; nothing to dump")
    lab = result.test_labels
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "re_x", "im_x", "re_y", "im_y", "label_x", "label_y"])
        for i in range(y.shape[1]):
            writer.writerow(
                [
                    i,
                    repr(float(y[0, i].real)),
                    repr(float(y[0, i].imag)),
                    repr(float(y[1, i].real)),
                    repr(float(y[1, i].imag)),
                    int(lab[0, i]),
                    int(lab[1, i]),
                ]
            )


def dump_regions(
    cfg: RunConfig,
    power_dbm: float,
    path: str,
    reach_km=None,
    n_cells: int = 64,
    polarization: str = "x",
) -> None:
    """PW decision-region raster of one point as (grid_x, grid_y, label) rows."""
    from .detectors import rasterize_regions

    if polarization not in ("x", "y"):
        raise ConfigError("polarization must be 'x' or 'y'")
    if "pw" not in cfg.detectors:
        raise ConfigError("region dump requires the pw detector")
    result = run_point(cfg, power_dbm, reach_km, collect_detectors=True)
    det = result.detectors[0 if polarization == "x" else 1]
    grid_x, grid_y, labels = rasterize_regions(det, n_cells=n_cells)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["grid_x", "grid_y", "label"])
        for i in range(grid_y.size):
            for j in range(grid_x.size):
                writer.writerow([repr(float(grid_x[j])), repr(float(grid_y[i])), int(labels[i, j])])


def validate_channel(cfg: Optional[RunConfig] = None) -> tuple[bool, list]:
    """Analytic sanity checks of the propagation physics.

    Runs in complex128 regardless of the configured sweep dtype.  Returns
    (all_passed, [(name, passed, detail), ...]).
    """
    cfg = cfg or RunConfig()
    fiber = cfg.fiber()
    checks = []
    rng = np.random.default_rng(1234)

    # Dispersion inverse pair: propagation then compensation is the identity.
    n = 4096 * 8
    x = (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))) * np.sqrt(5e-4)
    wave = IqWaveform(x.astype(np.complex128), 8e10, 1e10, 8)
    lossless = FiberParams(0.0, fiber.dispersion_ps_nm_km, 0.0, 80.0, fiber.wavelength_nm)
    out = cd_compensate(propagate_span(wave, lossless, 80.0), lossless.beta2_ps2_km, 80.0)
    err = np.sqrt(np.mean(np.abs(out.samples - wave.samples) ** 2))
    rel = err / np.sqrt(np.mean(np.abs(wave.samples) ** 2))
    checks.append(("dispersion_inverse_pair", rel < 1e-9, f"relative rms {rel:.3e}"))

    # CW SPM phase against the closed-form effective length.
    p0 = 1e-3
    cw = np.zeros((2, 4096), dtype=np.complex128)
    cw[0] = np.sqrt(p0)
    wave = IqWaveform(cw, 8e10, 1e10, 8)
    spm_fiber = FiberParams(
        fiber.alpha_db_per_km, 0.0, fiber.gamma_per_w_km, 80.0, fiber.wavelength_nm
    )
    out = propagate_span(wave, spm_fiber, cfg.ssfm_step_km)
    phase = float(np.angle(out.samples[0, 0] * np.conj(wave.samples[0, 0])))
    expected = (8.0 / 9.0) * spm_fiber.gamma_per_w_km * p0 * spm_fiber.effective_length_km
    rel = abs(phase - expected) / expected
    checks.append(("cw_spm_phase", rel < 1e-9, f"phase {phase:.9f} vs {expected:.9f} rad"))

    # Lossless, noise-free nonlinear link conserves energy.
    sym = rng.integers(0, 16, size=2048)
    blk = build_qam(16).points[np.vstack([sym, sym[::-1]])]
    wave = rrc_shape(blk, cfg.rrc(), 0.0, cfg.symbol_rate_hz, dtype=np.complex128)
    lossless_nl = FiberParams(0.0, fiber.dispersion_ps_nm_km, 1.4, 80.0, fiber.wavelength_nm)
    out = propagate_span(wave, lossless_nl, cfg.ssfm_step_km)
    e_in, e_out = wave.mean_power(), out.mean_power()
    rel = abs(e_out - e_in) / e_in
    checks.append(("lossless_energy_conservation", rel < 1e-9, f"relative drift {rel:.3e}"))

    # Step halving barely changes the propagated field.
    full = propagate_span(wave, fiber, cfg.ssfm_step_km)
    half = propagate_span(wave, fiber, cfg.ssfm_step_km / 2.0)
    diff = np.sqrt(np.mean(np.abs(full.samples - half.samples) ** 2))
    rel = diff / np.sqrt(np.mean(np.abs(full.samples) ** 2))
    checks.append(("step_halving_field", rel < 1e-4, f"relative rms change {rel:.3e}"))

    # Measured ASE variance matches the EDFA formula.
    amp = AmpParams(cfg.gain_db, cfg.noise_figure_db, True)
    zeros = IqWaveform(np.zeros((2, 500_000), dtype=np.complex128), 8e10, 1e10, 8)
    noisy = amplify(zeros, amp, np.random.default_rng(7), cfg.wavelength_nm)
    var_meas = float(np.mean(np.abs(noisy.samples) ** 2))
    var_expect = amp.ase_psd(fiber.carrier_hz) * zeros.sample_rate
    rel = abs(var_meas - var_expect) / var_expect
    checks.append(("ase_variance", rel < 0.01, f"measured/expected-1 = {rel:.3e}"))

    return all(ok for _, ok, _ in checks), checks
