"""Grid experiments: per-pair miss rates, grid averages, sweeps and Monte Carlo checks.

Transmitters sit on a horizontal grid inside the building and the access
point is fixed. Every unordered pair of grid points is one (legitimate,
spoofer) scenario. Channels are traced once per grid point and shared by all
pairs; pair results are always reduced in pair order, so the outcome does not
depend on how many worker processes were used.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .detector import (
    RadioConfig,
    per_tone_snr,
    UnboundedGainError,
    analytic_miss_rate,
    batch_statistics,
    degrees_of_freedom,
    noise_variance,
    noncentrality,
    security_gain,
    threshold_for_alpha,
)
from .raychannel import AntennaArray, BuildingBox, ChannelResponse, GeometryError, ToneGrid, channel_matrix

__all__ = [
    "ScenarioGrid",
    "SweepSpec",
    "CurveRow",
    "CurveResult",
    "PairSummary",
    "SWEEP_PARAMETERS",
    "grid_points",
    "enumerate_pairs",
    "point_channel",
    "grid_channels",
    "pair_summary",
    "pair_miss_rate",
    "pair_miss_rates",
    "average_miss_rate",
    "monte_carlo_rates",
    "run_sweep",
    "desk_scenario",
    "full_scenario",
    "grid_snr_db",
    "calibrate_excess_loss",
]

log = logging.getLogger(__name__)

MC_BLOCK = 8192


@dataclass(frozen=True)
class ScenarioGrid:
    building: BuildingBox
    ap_position: tuple[float, float, float]
    region_origin: tuple[float, float, float]
    region_extent_m: tuple[float, float]
    grid_spacing_m: float = 1.5
    tx_height_m: float = 2.0
    max_order: int = 3
    antenna_spacing_m: float = 0.03
    antenna_axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.grid_spacing_m > 0:
            raise GeometryError(f"grid_spacing_m must be positive, got {self.grid_spacing_m}")
        if not self.tx_height_m > 0:
            raise GeometryError(f"tx_height_m must be positive, got {self.tx_height_m}")
        if any(e < 0 for e in self.region_extent_m):
            raise GeometryError(f"region extents must be nonnegative, got {self.region_extent_m}")
        if not self.building.contains(self.ap_position):
            raise GeometryError(f"access point {list(self.ap_position)} is outside the building")
        pts = grid_points(self)
        outside = [p for p in pts if not self.building.contains(p)]
        if outside:
            raise GeometryError(f"{len(outside)} grid points lie outside the building, e.g. {outside[0].tolist()}")

    @property
    def shape(self) -> tuple[int, int]:
        """Grid points along (x, y)."""
        # the small slack keeps exact multiples such as 12/1.5 from rounding down
        nx = int(math.floor(self.region_extent_m[0] / self.grid_spacing_m + 1e-9)) + 1
        ny = int(math.floor(self.region_extent_m[1] / self.grid_spacing_m + 1e-9)) + 1
        return nx, ny


def desk_scenario(**overrides) -> ScenarioGrid:
    """30 m x 14 m x 4 m box with a 9 x 9 grid (81 points, 3240 pairs).

    The 26 dB excess loss puts the median SISO per-tone SNR at 16 dB for
    P_T = 0.1 mW and b = 0.25 MHz (see :func:`calibrate_excess_loss`).
    """
    kw = dict(
        building=BuildingBox(30.0, 14.0, 4.0, -0.7, excess_loss_db=26.0),
        ap_position=(15.6, 6.2, 3.0),
        region_origin=(9.0, 1.0, 0.0),
        region_extent_m=(12.0, 12.0),
        grid_spacing_m=1.5,
        tx_height_m=2.0,
    )
    kw.update(overrides)
    return ScenarioGrid(**kw)


def full_scenario(**overrides) -> ScenarioGrid:
    """120 m x 14 m x 4 m box with the 9 x 45 grid of 405 points, calibrated to a 16 dB median SNR."""
    kw = dict(
        building=BuildingBox(120.0, 14.0, 4.0, -0.7, excess_loss_db=17.4),
        ap_position=(45.6, 6.2, 3.0),
        region_origin=(12.0, 1.0, 0.0),
        region_extent_m=(67.0, 12.0),
        grid_spacing_m=1.5,
        tx_height_m=2.0,
    )
    kw.update(overrides)
    return ScenarioGrid(**kw)


def grid_points(scenario: ScenarioGrid) -> np.ndarray:
    """Grid points, shape (n, 3), rows of constant y enumerated in order of increasing y."""
    nx, ny = scenario.shape
    x0, y0 = scenario.region_origin[0], scenario.region_origin[1]
    s = scenario.grid_spacing_m
    pts = [(x0 + i * s, y0 + j * s, scenario.tx_height_m) for j in range(ny) for i in range(nx)]
    return np.array(pts, dtype=float)


def enumerate_pairs(points) -> list[tuple[int, int]]:
    """All unordered index pairs (i, j), i < j, in lexicographic order.

    ``points`` may be a sequence of points or a point count.
    """
    n = points if isinstance(points, int) else len(points)
    if n < 2:
        raise ValueError(f"need at least 2 points to form a pair, got {n}")
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _tones(config):
    return ToneGrid(config.center_freq_hz, config.system_bandwidth_hz, config.num_tones)


def point_channel(point, scenario: ScenarioGrid, config: RadioConfig) -> ChannelResponse:
    """Response from an N_T-element array at ``point`` to the N_R-element access point."""
    tx = AntennaArray(tuple(float(v) for v in point), config.n_tx, scenario.antenna_spacing_m, scenario.antenna_axis)
    rx = AntennaArray(scenario.ap_position, config.n_rx, scenario.antenna_spacing_m, scenario.antenna_axis)
    return channel_matrix(scenario.building, tx, rx, _tones(config), scenario.max_order)


def grid_channels(scenario: ScenarioGrid, config: RadioConfig, points=None) -> np.ndarray:
    """Stacked responses for every grid point, shape (n_points, N_T*N_R*M)."""
    if points is None:
        points = grid_points(scenario)
    return np.array([point_channel(p, scenario, config).gains for p in points])


def grid_snr_db(scenario: ScenarioGrid, config: RadioConfig) -> np.ndarray:
    """Per-tone estimation SNR (dB) of every grid point taken on its own."""
    return np.array([10.0 * math.log10(per_tone_snr(config, [h])) for h in grid_channels(scenario, config)])


def calibrate_excess_loss(scenario: ScenarioGrid, target_median_db: float = 16.0, config: RadioConfig | None = None) -> float:
    """Excess loss (dB) that puts the median grid SNR at ``target_median_db``.

    A constant loss shifts every point's SNR by the same number of dB, so the
    answer is the current median minus the target. The default reference
    link is SISO, one tone, P_T = 0.1 mW and b = 0.25 MHz.
    """
    config = config or RadioConfig()
    unloaded = replace(scenario, building=replace(scenario.building, excess_loss_db=0.0))
    return float(np.median(grid_snr_db(unloaded, config))) - target_median_db


@dataclass(frozen=True)
class PairSummary:
    sigma_sq: float
    dof: int
    threshold: float
    mu: float
    beta: float


def pair_summary(point_a, point_b, scenario: ScenarioGrid, config: RadioConfig) -> PairSummary:
    """Everything the analytic test says about one (legitimate, spoofer) pair."""
    noise = noise_variance(config)
    dof = degrees_of_freedom(config)
    ha = point_channel(point_a, scenario, config)
    hb = point_channel(point_b, scenario, config)
    mu = noncentrality(ha, hb, noise)
    k = threshold_for_alpha(config.false_alarm_target, dof)
    beta = analytic_miss_rate(config.false_alarm_target, dof, mu)
    return PairSummary(noise.sigma_sq, dof, k, mu, beta)


def pair_miss_rate(point_a, point_b, scenario: ScenarioGrid, config: RadioConfig) -> float:
    """Analytic miss rate at the configured false alarm target for one pair."""
    return pair_summary(point_a, point_b, scenario, config).beta


def _pair_noncentralities(channels, pairs, sigma_sq):
    idx = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    a = channels[idx[:, 0]]
    b = channels[idx[:, 1]]
    # same residual as detector.noncentrality, batched over pairs
    return batch_statistics(a, b, sigma_sq)


def _betas_chunk(args):
    alpha, dof, mus = args
    return [analytic_miss_rate(alpha, dof, float(m)) for m in mus]


def _chunks(seq, n):
    size = max(1, math.ceil(len(seq) / n))
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def pair_miss_rates(scenario: ScenarioGrid, config: RadioConfig, workers: int = 1, pairs=None) -> np.ndarray:
    """Analytic miss rate for every grid pair, in :func:`enumerate_pairs` order."""
    points = grid_points(scenario)
    if pairs is None:
        pairs = enumerate_pairs(points)
    channels = grid_channels(scenario, config, points)
    sigma_sq = noise_variance(config).sigma_sq
    mus = _pair_noncentralities(channels, pairs, sigma_sq)
    alpha = config.false_alarm_target
    dof = degrees_of_freedom(config)
    if workers <= 1:
        return np.array(_betas_chunk((alpha, dof, mus)))
    # 4 chunks per worker keeps the pool busy; chunking never changes the values
    jobs = [(alpha, dof, c) for c in _chunks(mus, 4 * workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_betas_chunk, jobs))
    return np.array([b for part in parts for b in part])


def average_miss_rate(scenario: ScenarioGrid, config: RadioConfig, workers: int = 1) -> float:
    """Unweighted mean of the analytic miss rate over all grid pairs."""
    return float(np.mean(pair_miss_rates(scenario, config, workers)))


def monte_carlo_rates(
    point_a,
    point_b,
    scenario: ScenarioGrid,
    config: RadioConfig,
    trials: int,
    seed: int = 0,
    pair_index: int = 0,
) -> tuple[float, float]:
    """Empirical (false alarm, miss) rates from simulated frame pairs.

    Each trial draws fresh receiver phases and thermal noise for four frames:
    two from ``point_a`` (the same-transmitter case) and one each from
    ``point_a`` and ``point_b`` (the spoofing case). Trials are generated in
    blocks of ``MC_BLOCK``; block ``k`` uses the seed sequence
    ``(seed, pair_index, k)``, so results are reproducible and independent of
    scheduling.
    """
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials}")
    ha = point_channel(point_a, scenario, config).gains
    hb = point_channel(point_b, scenario, config).gains
    sigma_sq = noise_variance(config).sigma_sq
    k = threshold_for_alpha(config.false_alarm_target, degrees_of_freedom(config))
    scale = math.sqrt(sigma_sq / 2.0)
    n = ha.size

    false_alarms = 0
    misses = 0
    done = 0
    block = 0
    while done < trials:
        t = min(MC_BLOCK, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([seed, pair_index, block]))
        phases = rng.uniform(0.0, 2.0 * math.pi, size=(4, t, 1))
        noise = scale * (rng.standard_normal((4, t, n)) + 1j * rng.standard_normal((4, t, n)))
        frames = np.stack([ha, ha, ha, hb])[:, None, :] * np.exp(1j * phases) + noise
        l_h0 = batch_statistics(frames[0], frames[1], sigma_sq)
        l_h1 = batch_statistics(frames[2], frames[3], sigma_sq)
        false_alarms += int(np.count_nonzero(l_h0 > k))
        misses += int(np.count_nonzero(l_h1 <= k))
        done += t
        block += 1
    return false_alarms / trials, misses / trials


SWEEP_PARAMETERS = {
    "M": "num_tones",
    "W": "system_bandwidth_hz",
    "b": "subband_bandwidth_hz",
    "P_T": "tx_power_per_tone_mw",
    "N_T": "n_tx",
    "N_R": "n_rx",
}


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter over ``values``, all else taken from ``base_config``.

    With ``narrowband`` set, sweeping ``b`` also sets ``W = b`` at every point.
    """

    parameter: str
    values: tuple
    base_config: RadioConfig
    narrowband: bool = False

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}; expected one of {sorted(SWEEP_PARAMETERS)}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.narrowband and self.parameter != "b":
            raise ValueError("narrowband coupling only applies to a sweep over b")
        object.__setattr__(self, "values", tuple(self.values))
        for v in self.values:
            self.config_at(v)

    def config_at(self, value, n_tx: int | None = None, n_rx: int | None = None) -> RadioConfig:
        changes = {SWEEP_PARAMETERS[self.parameter]: value}
        if self.narrowband:
            changes["system_bandwidth_hz"] = value
        if n_tx is not None and self.parameter != "N_T":
            changes["n_tx"] = n_tx
        if n_rx is not None and self.parameter != "N_R":
            changes["n_rx"] = n_rx
        try:
            return replace(self.base_config, **changes)
        except ValueError as exc:
            raise ValueError(f"sweep value {self.parameter}={value!r} is invalid: {exc}") from exc


@dataclass(frozen=True)
class CurveRow:
    parameter: str
    value: float
    config_label: str
    avg_miss_rate: float
    security_gain: float


@dataclass
class CurveResult:
    rows: list[CurveRow] = field(default_factory=list)

    def lookup(self, value, label) -> CurveRow:
        for r in self.rows:
            if r.value == value and r.config_label == label:
                return r
        raise KeyError((value, label))

    def series(self, label) -> list[tuple[float, float]]:
        """(value, avg_miss_rate) pairs of one antenna configuration."""
        return [(r.value, r.avg_miss_rate) for r in self.rows if r.config_label == label]


def _gain_or_limit(beta_siso, beta_mimo):
    try:
        return security_gain(beta_siso, beta_mimo)
    except UnboundedGainError:
        return math.inf if beta_siso > 0 else math.nan


def _label(cfg):
    return f"{cfg.n_tx}x{cfg.n_rx}"


def run_sweep(
    scenario: ScenarioGrid,
    sweep: SweepSpec,
    configurations=((1, 1), (2, 1), (1, 2), (2, 2)),
    workers: int = 1,
) -> CurveResult:
    """Average miss rate and security gain over SISO for each (value, configuration).

    Configurations are ``(N_T, N_R)`` tuples and are labelled ``"N_TxN_R"``.
    When the swept parameter is itself ``N_T`` or ``N_R``, that count comes
    from the sweep value instead of the configuration.
    """
    result = CurveResult()
    configurations = list(dict.fromkeys(tuple(c) for c in configurations))
    for value in sweep.values:
        cache = {}

        def beta_for(cfg):
            key = (cfg.n_tx, cfg.n_rx)
            if key not in cache:
                cache[key] = average_miss_rate(scenario, cfg, workers)
                log.info("%s=%s %s avg_beta=%.6g", sweep.parameter, value, _label(cfg), cache[key])
            return cache[key]

        beta_siso = beta_for(replace(sweep.config_at(value), n_tx=1, n_rx=1))
        seen = set()
        for n_tx, n_rx in configurations:
            cfg = sweep.config_at(value, n_tx, n_rx)
            if _label(cfg) in seen:
                continue
            seen.add(_label(cfg))
            beta = beta_for(cfg)
            result.rows.append(CurveRow(sweep.parameter, value, _label(cfg), beta, _gain_or_limit(beta_siso, beta)))
    return result
