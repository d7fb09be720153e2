"""Image-source multipath channel inside a rectangular building.

The building is the box [0, length] x [0, width] x [0, height]. Every wall,
the floor and the ceiling reflect with the same real coefficient. Image
sources are indexed by an integer triple (nx, ny, nz); along one axis index
n places the image at ``n*L + p`` for even n and ``n*L + (L - p)`` for odd n,
which costs ``|n|`` reflections.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT",
    "GeometryError",
    "BuildingBox",
    "Ray",
    "AntennaArray",
    "ToneGrid",
    "ChannelResponse",
    "element_positions",
    "trace_rays",
    "frequency_response",
    "channel_matrix",
]

SPEED_OF_LIGHT = 299_792_458.0


class GeometryError(ValueError):
    """Positions or shapes that the tracer cannot handle."""


@dataclass(frozen=True)
class BuildingBox:
    length_m: float
    width_m: float
    height_m: float
    reflection_coeff: float = -0.7
    # location-independent loss applied to every ray (clutter the box does not model)
    excess_loss_db: float = 0.0

    def __post_init__(self):
        for name in ("length_m", "width_m", "height_m"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)}")
        if not -1.0 < self.reflection_coeff < 1.0:
            raise GeometryError(f"reflection_coeff must lie in (-1, 1), got {self.reflection_coeff}")
        if not (self.excess_loss_db >= 0 and math.isfinite(self.excess_loss_db)):
            raise GeometryError(f"excess_loss_db must be finite and nonnegative, got {self.excess_loss_db}")

    @property
    def dims(self) -> np.ndarray:
        return np.array([self.length_m, self.width_m, self.height_m])

    def contains(self, point) -> bool:
        """True if ``point`` is strictly inside the box."""
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > 0.0) and np.all(p < self.dims))


@dataclass(frozen=True)
class Ray:
    amplitude: float
    phase: float
    delay_s: float


@dataclass(frozen=True)
class AntennaArray:
    reference_position: tuple[float, float, float]
    num_elements: int = 1
    spacing_m: float = 0.03
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise GeometryError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.spacing_m > 0:
            raise GeometryError(f"spacing_m must be positive, got {self.spacing_m}")
        if len(self.reference_position) != 3 or len(self.axis) != 3:
            raise GeometryError("reference_position and axis must be 3-vectors")
        norm = math.sqrt(sum(a * a for a in self.axis))
        if not math.isclose(norm, 1.0, rel_tol=1e-9):
            raise GeometryError(f"axis must be a unit vector, got norm {norm}")


@dataclass(frozen=True)
class ToneGrid:
    f0_hz: float
    bandwidth_hz: float
    num_tones: int

    def __post_init__(self):
        if int(self.num_tones) != self.num_tones or self.num_tones < 1:
            raise ValueError(f"num_tones must be a positive integer, got {self.num_tones}")
        if not self.bandwidth_hz > 0:
            raise ValueError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if not self.frequencies[0] > 0:
            raise ValueError("all tone frequencies must be positive")

    @property
    def frequencies(self) -> np.ndarray:
        """Tone m (1-based) sits at f0 + W*(m/M - 0.5)."""
        m = np.arange(1, self.num_tones + 1, dtype=float)
        return self.f0_hz + self.bandwidth_hz * (m / self.num_tones - 0.5)


@dataclass(frozen=True, eq=False)
class ChannelResponse:
    """Complex gains flattened with Tx antenna outermost, Rx middle, tone innermost."""

    gains: np.ndarray
    dims: tuple[int, int, int]

    def __post_init__(self):
        gains = np.ascontiguousarray(self.gains, dtype=complex).reshape(-1)
        object.__setattr__(self, "gains", gains)
        n_tx, n_rx, m = self.dims
        if gains.size != n_tx * n_rx * m:
            raise GeometryError(f"{gains.size} gains do not fit dims {self.dims}")
        if not np.all(np.isfinite(gains)):
            raise GeometryError("channel gains must be finite")

    def as_tensor(self) -> np.ndarray:
        return self.gains.reshape(self.dims)

    @property
    def energy(self) -> float:
        return float(np.vdot(self.gains, self.gains).real)


def element_positions(array: AntennaArray, box: BuildingBox | None = None) -> np.ndarray:
    """Element positions of a uniform linear array, shape (num_elements, 3).

    If ``box`` is given every element must lie strictly inside it.
    """
    ref = np.asarray(array.reference_position, dtype=float)
    axis = np.asarray(array.axis, dtype=float)
    offsets = np.arange(array.num_elements, dtype=float) * array.spacing_m
    positions = ref + offsets[:, None] * axis
    if box is not None:
        for p in positions:
            if not box.contains(p):
                raise GeometryError(f"antenna element {p.tolist()} lies outside the building")
    return positions


@lru_cache(maxsize=16)
def _image_indices(max_order):
    r = range(-max_order, max_order + 1)
    idx = [(a, b, c) for a in r for b in r for c in r if abs(a) + abs(b) + abs(c) <= max_order]
    return np.array(idx, dtype=np.int64).reshape(-1, 3)


def _image_paths(box, tx, rx, max_order):
    """Path lengths and bounce counts for every image of ``tx`` seen from ``rx``."""
    idx = _image_indices(max_order)
    dims = box.dims
    odd = (idx % 2).astype(bool)
    images = idx * dims + np.where(odd, dims - tx, tx)
    dist = np.sqrt(np.sum((images - rx) ** 2, axis=1))
    bounces = np.abs(idx).sum(axis=1)
    return dist, bounces, idx


def _validate_endpoints(box, tx, rx):
    if tx.shape != (3,) or rx.shape != (3,):
        raise GeometryError("tx and rx must be 3-vectors")
    if not box.contains(tx):
        raise GeometryError(f"transmitter {tx.tolist()} is not strictly inside the building")
    if not box.contains(rx):
        raise GeometryError(f"receiver {rx.tolist()} is not strictly inside the building")
    if np.array_equal(tx, rx):
        raise GeometryError("transmitter and receiver coincide")


def trace_rays(box: BuildingBox, tx, rx, max_order: int = 3, f0_hz: float = 5e9) -> list[Ray]:
    """All image-source rays with at most ``max_order`` reflections, sorted by delay.

    Amplitude follows the Friis factor ``(c/f0) / (4*pi*d)`` times
    ``|reflection_coeff|**bounces``, scaled down by the box's excess loss; each
    bounce adds ``arg(reflection_coeff)`` of phase.
    """
    if int(max_order) != max_order or max_order < 0:
        raise GeometryError(f"max_order must be a nonnegative integer, got {max_order}")
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    _validate_endpoints(box, tx, rx)

    dist, bounces, idx = _image_paths(box, tx, rx, int(max_order))
    wavelength = SPEED_OF_LIGHT / f0_hz
    gamma = box.reflection_coeff
    amp = wavelength / (4.0 * math.pi * dist) * abs(gamma) ** bounces * 10.0 ** (-box.excess_loss_db / 20.0)
    phase = bounces * cmath.phase(gamma)
    delay = dist / SPEED_OF_LIGHT
    # ties in delay are broken by image index so the order is reproducible
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0], delay))
    return [Ray(float(amp[k]), float(phase[k]), float(delay[k])) for k in order]


def frequency_response(rays, tones: ToneGrid) -> np.ndarray:
    """Sum of rays at each tone: ``H(f) = sum a * exp(j*phase) * exp(-j*2*pi*f*delay)``."""
    if len(rays) == 0:
        raise ValueError("cannot synthesize a response from an empty ray list")
    amp = np.array([r.amplitude for r in rays])
    phase = np.array([r.phase for r in rays])
    delay = np.array([r.delay_s for r in rays])
    f = tones.frequencies
    return _synthesize(amp, phase, delay, f)


def _synthesize(amp, phase, delay, freqs):
    arg = phase[None, :] - 2.0 * math.pi * freqs[:, None] * delay[None, :]
    return np.exp(1j * arg) @ amp


def channel_matrix(
    box: BuildingBox,
    tx_array: AntennaArray,
    rx_array: AntennaArray,
    tones: ToneGrid,
    max_order: int = 3,
) -> ChannelResponse:
    """MIMO response between two arrays, traced independently per antenna pair."""
    tx_pos = element_positions(tx_array, box)
    rx_pos = element_positions(rx_array, box)
    n_tx, n_rx, m = len(tx_pos), len(rx_pos), tones.num_tones
    out = np.empty((n_tx, n_rx, m), dtype=complex)
    for jt, t in enumerate(tx_pos):
        for jr, r in enumerate(rx_pos):
            rays = trace_rays(box, t, r, max_order, tones.f0_hz)
            out[jt, jr] = frequency_response(rays, tones)
    return ChannelResponse(out.reshape(-1), (n_tx, n_rx, m))

