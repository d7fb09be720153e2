"""Channel estimation model and the pairwise spoofing test.

Two frames claiming the same identity are compared through their estimated
channel vectors. The estimate of frame i is the true response rotated by an
unknown receiver phase plus complex Gaussian thermal noise, and the test
statistic is the noise-normalized distance between the two estimates after
the best common phase alignment. Spoofing is flagged when that statistic
exceeds the central chi-square quantile that yields the target false alarm
rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import chi2_inv_cdf, noncentral_chi2_cdf

__all__ = [
    "BOLTZMANN_290K_MW_PER_HZ",
    "ConfigError",
    "UnboundedGainError",
    "RadioConfig",
    "NoiseModel",
    "EstimatedResponse",
    "TestOutcome",
    "noise_variance",
    "per_tone_snr",
    "estimate_channel",
    "optimal_rotation",
    "test_statistic",
    "degrees_of_freedom",
    "aligned_degrees_of_freedom",
    "threshold_for_alpha",
    "noncentrality",
    "analytic_miss_rate",
    "security_gain",
    "decide",
    "batch_statistics",
]

# k*T at 290 K, in mW/Hz (about -174 dBm/Hz)
BOLTZMANN_290K_MW_PER_HZ = 4.004e-18


class ConfigError(ValueError):
    """A radio configuration violates one of its invariants."""


class UnboundedGainError(ZeroDivisionError):
    """The MIMO miss rate is zero, so the relative gain has no finite value."""


@dataclass(frozen=True)
class RadioConfig:
    n_tx: int = 1
    n_rx: int = 1
    num_tones: int = 1
    system_bandwidth_hz: float = 20e6
    subband_bandwidth_hz: float = 0.25e6
    center_freq_hz: float = 5e9
    tx_power_per_tone_mw: float = 0.1
    noise_figure_linear: float = 10.0
    thermal_noise_density_mw_per_hz: float = BOLTZMANN_290K_MW_PER_HZ
    false_alarm_target: float = 0.01

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "num_tones"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v}")
        for name in (
            "system_bandwidth_hz",
            "subband_bandwidth_hz",
            "center_freq_hz",
            "tx_power_per_tone_mw",
            "noise_figure_linear",
            "thermal_noise_density_mw_per_hz",
        ):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if not 0.0 < self.false_alarm_target < 1.0:
            raise ConfigError(f"false_alarm_target must lie in (0, 1), got {self.false_alarm_target}")
        per_tone = self.system_bandwidth_hz / self.num_tones
        # relative slack so that b == W/M survives rounding
        if self.subband_bandwidth_hz > per_tone * (1.0 + 1e-12):
            raise ConfigError(
                f"subband bandwidth b={self.subband_bandwidth_hz:g} Hz exceeds "
                f"W/M={per_tone:g} Hz (W={self.system_bandwidth_hz:g}, M={self.num_tones})"
            )

    @property
    def length(self) -> int:
        return self.n_tx * self.n_rx * self.num_tones


@dataclass(frozen=True)
class NoiseModel:
    sigma_sq: float
    noise_power_per_tone_mw: float


@dataclass(frozen=True, eq=False)
class EstimatedResponse:
    gains: np.ndarray
    true_phase_used: float = float("nan")


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    threshold: float
    spoof_flagged: bool


def noise_variance(config: RadioConfig) -> NoiseModel:
    """Per-tone noise power P_N = kT*N_F*b and the normalized variance N_T*P_N/P_T."""
    p_n = config.thermal_noise_density_mw_per_hz * config.noise_figure_linear * config.subband_bandwidth_hz
    return NoiseModel(sigma_sq=config.n_tx * p_n / config.tx_power_per_tone_mw, noise_power_per_tone_mw=p_n)


def _gains(h):
    return np.asarray(getattr(h, "gains", h), dtype=complex).reshape(-1)


def per_tone_snr(config: RadioConfig, ensemble) -> float:
    """Linear per-tone estimation SNR, ``P_T * mean|H|^2 / (P_N * N_T**2 * N_R * M)``."""
    ensemble = list(ensemble)
    if not ensemble:
        raise ValueError("ensemble must not be empty")
    n = config.length
    energies = []
    for h in ensemble:
        g = _gains(h)
        if g.size != n:
            raise ValueError(f"response of length {g.size} does not match N_T*N_R*M = {n}")
        energies.append(float(np.vdot(g, g).real))
    p_n = noise_variance(config).noise_power_per_tone_mw
    denom = p_n * config.n_tx**2 * config.n_rx * config.num_tones
    return config.tx_power_per_tone_mw * float(np.mean(energies)) / denom


def estimate_channel(h, phase: float, noise: NoiseModel, rng_seed) -> EstimatedResponse:
    """Rotate ``h`` by ``phase`` and add CN(0, sigma^2) noise drawn from ``rng_seed``."""
    g = _gains(h)
    rng = np.random.default_rng(rng_seed)
    scale = math.sqrt(noise.sigma_sq / 2.0)
    n = scale * (rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size))
    return EstimatedResponse(g * np.exp(1j * phase) + n, true_phase_used=phase)


def optimal_rotation(h1, h2, *, return_flag: bool = False):
    """Phase x minimizing ``||h1 - h2*exp(jx)||``, i.e. ``Arg(sum h1 * conj(h2))``.

    When the inner product is exactly zero every x is optimal; 0.0 is returned
    and, with ``return_flag=True``, the flag in ``(phase, undefined)`` is set.
    """
    a, b = _gains(h1), _gains(h2)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    inner = np.vdot(b, a)
    undefined = inner == 0
    phase = 0.0 if undefined else float(np.angle(inner))
    return (phase, bool(undefined)) if return_flag else phase


def _aligned_distance_sq(a, b):
    inner = np.vdot(b, a)
    phi = 0.0 if inner == 0 else np.angle(inner)
    r = a - b * np.exp(1j * phi)
    return float(np.vdot(r, r).real)


def test_statistic(h1, h2, noise: NoiseModel) -> float:
    """Normalized aligned distance ``||h1 - h2 e^{j phi}||^2 / sigma^2``."""
    if not noise.sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    a, b = _gains(h1), _gains(h2)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return _aligned_distance_sq(a, b) / noise.sigma_sq


# pytest would otherwise try to collect it when imported into a test module
test_statistic.__test__ = False


def batch_statistics(h1: np.ndarray, h2: np.ndarray, sigma_sq: float) -> np.ndarray:
    """Row-wise :func:`test_statistic` for stacked estimates of shape (trials, n)."""
    a = np.atleast_2d(h1)
    b = np.atleast_2d(h2)
    inner = np.einsum("ij,ij->i", b.conj(), a)
    phi = np.angle(inner)
    r = a - b * np.exp(1j * phi)[:, None]
    return np.einsum("ij,ij->i", r.conj(), r).real / sigma_sq


def degrees_of_freedom(config: RadioConfig) -> int:
    """S = 2 * N_T * N_R * M real dimensions."""
    return 2 * config.n_tx * config.n_rx * config.num_tones


def aligned_degrees_of_freedom(config: RadioConfig) -> int:
    """S - 1: the high-SNR dimension count once the common phase has been fitted.

    Fitting the rotation removes the tangential noise component, so at high SNR
    the statistic behaves like a chi-square with one fewer degree of freedom
    than :func:`degrees_of_freedom` reports.
    """
    return degrees_of_freedom(config) - 1


def threshold_for_alpha(alpha: float, dof: int) -> float:
    """Threshold k with ``Pr(chi2_dof > k) = alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return chi2_inv_cdf(1.0 - alpha, dof)


def noncentrality(h1, h2, noise: NoiseModel) -> float:
    """Noncentrality of the statistic for true responses ``h1`` and ``h2``."""
    return test_statistic(h1, h2, noise)


def analytic_miss_rate(alpha: float, dof: int, mu: float) -> float:
    """Miss probability at false alarm ``alpha``: noncentral CDF at the central threshold."""
    return noncentral_chi2_cdf(threshold_for_alpha(alpha, dof), dof, mu)


def security_gain(beta_siso: float, beta_mimo: float) -> float:
    """Relative miss-rate reduction ``(beta_siso - beta_mimo) / beta_mimo``; may be negative."""
    if beta_mimo == 0:
        raise UnboundedGainError("gain unbounded: the multi-antenna miss rate is zero")
    return (beta_siso - beta_mimo) / beta_mimo


def decide(h1, h2, config: RadioConfig, noise: NoiseModel | None = None) -> TestOutcome:
    """Run the test on two estimates; spoofing is flagged when L > k."""
    a, b = _gains(h1), _gains(h2)
    if a.size != config.length or b.size != config.length:
        raise ValueError(f"estimates must have length N_T*N_R*M = {config.length}")
    noise = noise or noise_variance(config)
    stat = test_statistic(a, b, noise)
    k = threshold_for_alpha(config.false_alarm_target, degrees_of_freedom(config))
    return TestOutcome(statistic=stat, threshold=k, spoof_flagged=stat > k)

