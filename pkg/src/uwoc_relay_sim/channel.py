"""Monte Carlo photon tracing for the underwater optical channel.

A transmitted pulse is traced photon by photon through absorbing and
scattering water to the receiver plane, producing the fading-free
impulse response h0(t) of one hop as a time-binned fraction of the
transmitted energy. The response is then reduced to per-bit-slot energy
fractions (desired signal plus intersymbol leakage) for the receiver
models.

Scattering is Henyey-Greenstein; absorption is handled by survival
weighting (each interaction multiplies the photon weight by the single-
scattering albedo b/c) so no photon is lost to an absorption roulette.
The never-scattered (ballistic) component is accounted analytically by
default, which removes the dominant variance term on long paths where
exp(-c d) arrivals are too rare to sample.

References
----------
L. G. Henyey and J. L. Greenstein, "Diffuse radiation in the galaxy,"
Astrophys. J. 93 (1941).
C. Mobley, "Light and Water: Radiative Transfer in Natural Waters,"
Academic Press, 1994 (inherent optical properties of sea water).
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import SPEED_OF_LIGHT

__all__ = [
    "WaterProperties",
    "LinkGeometry",
    "ImpulseResponse",
    "BitEnergies",
    "WATER_PRESETS",
    "simulate_impulse_response",
    "bit_frame_energies",
    "channel_memory",
]

logger = logging.getLogger(__name__)

WATER_PRESETS = {
    "clear": (0.114, 0.037),
    "coastal": (0.179, 0.219),
    "harbor": (0.295, 1.875),
}
"""Absorption/scattering coefficient pairs (1/m) for standard water types."""

DEFAULT_HG_ASYMMETRY = 0.924
DEFAULT_REFRACTIVE_INDEX = 1.331

DEFAULT_WEIGHT_FLOOR = 1e-6
"""Photon weight below which tracing stops; bounds runtime in turbid water."""


@dataclass(frozen=True)
class WaterProperties:
    """Inherent optical properties of the water column.

    Parameters
    ----------
    absorption : float
        Absorption coefficient a (1/m).
    scattering : float
        Scattering coefficient b (1/m).
    hg_asymmetry : float
        Henyey-Greenstein asymmetry parameter g in (-1, 1).
    refractive_index : float
        Group refractive index used for time of flight.
    """

    absorption: float
    scattering: float
    hg_asymmetry: float = DEFAULT_HG_ASYMMETRY
    refractive_index: float = DEFAULT_REFRACTIVE_INDEX

    def __post_init__(self) -> None:
        if not (math.isfinite(self.absorption) and self.absorption >= 0.0):
            raise ValueError(f"absorption must be >= 0, got {self.absorption}")
        if not (math.isfinite(self.scattering) and self.scattering >= 0.0):
            raise ValueError(f"scattering must be >= 0, got {self.scattering}")
        if not (math.isfinite(self.hg_asymmetry) and -1.0 < self.hg_asymmetry < 1.0):
            raise ValueError(f"hg_asymmetry must be in (-1, 1), got {self.hg_asymmetry}")
        if not (math.isfinite(self.refractive_index) and self.refractive_index >= 1.0):
            raise ValueError(f"refractive_index must be >= 1, got {self.refractive_index}")

    @property
    def extinction(self) -> float:
        """Beam attenuation coefficient c = a + b (1/m)."""
        return self.absorption + self.scattering

    @property
    def albedo(self) -> float:
        """Single-scattering albedo b / c (0 when the water is lossless)."""
        c = self.extinction
        return self.scattering / c if c > 0.0 else 0.0

    @classmethod
    def preset(cls, name: str, **overrides) -> "WaterProperties":
        """Standard water type by name: 'clear', 'coastal', or 'harbor'."""
        try:
            a, b = WATER_PRESETS[name]
        except KeyError:
            known = ", ".join(sorted(WATER_PRESETS))
            raise ValueError(f"unknown water preset {name!r}; expected one of: {known}") from None
        return cls(absorption=a, scattering=b, **overrides)


@dataclass(frozen=True)
class LinkGeometry:
    """Transmitter/receiver geometry of a single hop.

    The receiver sits on the beam axis at `distance`, facing the
    transmitter, with a circular aperture and a conical field of view.

    Parameters
    ----------
    distance : float
        Hop length d (m).
    aperture_diameter : float
        Receiver aperture diameter D0 (m).
    half_angle_fov : float
        Receiver field-of-view half angle (degrees), in (0, 90].
    beam_divergence_full : float
        Full divergence angle of the transmit beam (degrees), >= 0.
    wavelength : float
        Optical wavelength (m).
    """

    distance: float
    aperture_diameter: float = 0.2
    half_angle_fov: float = 40.0
    beam_divergence_full: float = 0.02
    wavelength: float = 532e-9

    def __post_init__(self) -> None:
        if not (math.isfinite(self.distance) and self.distance > 0.0):
            raise ValueError(f"distance must be > 0, got {self.distance}")
        if not (math.isfinite(self.aperture_diameter) and self.aperture_diameter > 0.0):
            raise ValueError(f"aperture_diameter must be > 0, got {self.aperture_diameter}")
        if not (math.isfinite(self.half_angle_fov) and 0.0 < self.half_angle_fov <= 90.0):
            raise ValueError(f"half_angle_fov must be in (0, 90], got {self.half_angle_fov}")
        if not (math.isfinite(self.beam_divergence_full) and self.beam_divergence_full >= 0.0):
            raise ValueError(f"beam_divergence_full must be >= 0, got {self.beam_divergence_full}")
        if not (math.isfinite(self.wavelength) and self.wavelength > 0.0):
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")


@dataclass(frozen=True)
class ImpulseResponse:
    """Time-binned fraction of transmitted energy reaching the receiver.

    Bin k covers [t_start + k*bin_width, t_start + (k+1)*bin_width), with
    t_start = d*n/c the earliest physically possible arrival, so causality
    holds by construction.
    """

    bin_width: float
    t_start: float
    energy_fraction: np.ndarray

    def __post_init__(self) -> None:
        if not (math.isfinite(self.bin_width) and self.bin_width > 0.0):
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if not (math.isfinite(self.t_start) and self.t_start >= 0.0):
            raise ValueError(f"t_start must be >= 0, got {self.t_start}")
        frac = np.asarray(self.energy_fraction, dtype=float)
        if frac.ndim != 1 or frac.size == 0:
            raise ValueError("energy_fraction must be a nonempty 1-d array")
        if np.any(~np.isfinite(frac)) or np.any(frac < 0.0):
            raise ValueError("energy_fraction entries must be finite and >= 0")
        if frac.sum() > 1.0 + 1e-9:
            raise ValueError(f"total energy fraction {frac.sum()} exceeds 1")
        object.__setattr__(self, "energy_fraction", frac)

    @property
    def total_fraction(self) -> float:
        """Captured fraction of the transmitted energy."""
        return float(self.energy_fraction.sum())

    @property
    def is_empty(self) -> bool:
        """True when no photon energy reached the receiver."""
        return self.total_fraction == 0.0

    def to_csv(self) -> str:
        """Serialize as `bin_start_s,energy_fraction` rows (one per bin)."""
        buf = io.StringIO()
        buf.write("bin_start_s,energy_fraction\n")
        for k, frac in enumerate(self.energy_fraction):
            buf.write(f"{self.t_start + k * self.bin_width!r},{float(frac)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ImpulseResponse":
        """Parse the `to_csv` format back into an ImpulseResponse."""
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0].strip() != "bin_start_s,energy_fraction":
            raise ValueError("expected header 'bin_start_s,energy_fraction'")
        starts = []
        fracs = []
        for ln in lines[1:]:
            s, f = ln.split(",")
            starts.append(float(s))
            fracs.append(float(f))
        if len(starts) < 1:
            raise ValueError("impulse response CSV has no bins")
        if len(starts) == 1:
            raise ValueError("impulse response CSV needs at least 2 bins to recover bin_width")
        width = starts[1] - starts[0]
        return cls(bin_width=width, t_start=starts[0], energy_fraction=np.array(fracs))


@dataclass(frozen=True)
class BitEnergies:
    """Per-bit-slot energy fractions seen by an integrate-and-dump receiver.

    e_signal is the fraction of one bit's transmitted energy that lands in
    its own slot; e_isi[k-1] is the fraction leaking into the k-th later
    slot, for k = 1..memory.
    """

    e_signal: float
    e_isi: np.ndarray
    memory: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.e_signal) and self.e_signal >= 0.0):
            raise ValueError(f"e_signal must be >= 0, got {self.e_signal}")
        isi = np.asarray(self.e_isi, dtype=float)
        if np.any(~np.isfinite(isi)) or np.any(isi < 0.0):
            raise ValueError("e_isi entries must be finite and >= 0")
        if self.memory < 0 or len(isi) != self.memory:
            raise ValueError(f"memory must equal len(e_isi), got {self.memory} vs {len(isi)}")
        object.__setattr__(self, "e_isi", isi)

    @property
    def total(self) -> float:
        """e_signal plus all ISI leakage."""
        return float(self.e_signal + self.e_isi.sum())


def _henyey_greenstein_cos(g: float, u: np.ndarray) -> np.ndarray:
    """Scattering-angle cosines from uniform deviates u in [0, 1)."""
    if abs(g) < 1e-12:
        return 1.0 - 2.0 * u
    frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
    return (1.0 + g * g - frac * frac) / (2.0 * g)


def _rotate_directions(ux, uy, uz, cos_t, phi):
    """Rotate unit vectors by polar angle theta (cos_t) and azimuth phi."""
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    cos_p = np.cos(phi)
    sin_p = np.sin(phi)
    denom = np.sqrt(np.maximum(1e-24, 1.0 - uz * uz))
    near_pole = np.abs(uz) > 0.999999
    nx = sin_t * (ux * uz * cos_p - uy * sin_p) / denom + ux * cos_t
    ny = sin_t * (uy * uz * cos_p + ux * sin_p) / denom + uy * cos_t
    nz = -sin_t * cos_p * denom + uz * cos_t
    nx = np.where(near_pole, sin_t * cos_p, nx)
    ny = np.where(near_pole, sin_t * sin_p, ny)
    nz = np.where(near_pole, np.sign(uz) * cos_t, nz)
    norm = np.sqrt(nx * nx + ny * ny + nz * nz)
    return nx / norm, ny / norm, nz / norm


def _trace_batch(
    rng: np.random.Generator,
    n: int,
    geometry: LinkGeometry,
    water: WaterProperties,
    bin_width: float,
    weight_floor: float,
    ballistic_splitting: bool,
) -> np.ndarray:
    """Trace one photon batch; returns the summed weight histogram (not normalized)."""
    d = geometry.distance
    r_ap = geometry.aperture_diameter / 2.0
    cos_fov = math.cos(math.radians(geometry.half_angle_fov))
    theta_half = math.radians(geometry.beam_divergence_full / 2.0)
    c = water.extinction
    albedo = water.albedo
    n_water = water.refractive_index
    t_start = d * n_water / SPEED_OF_LIGHT
    hist = np.zeros(1)

    def deposit(weights: np.ndarray, arrival_times: np.ndarray) -> None:
        nonlocal hist
        bins = np.floor((arrival_times - t_start) / bin_width).astype(np.int64)
        # Guard against -1 from float cancellation right at t_start.
        bins = np.maximum(bins, 0)
        counts = np.bincount(bins, weights=weights, minlength=hist.size)
        if counts.size > hist.size:
            counts[: hist.size] += hist
            hist = counts
        else:
            hist[: counts.size] += counts

    # Launch: uniform cone of half angle theta_half around +z.
    cos_l = 1.0 - rng.random(n) * (1.0 - math.cos(theta_half))
    sin_l = np.sqrt(np.maximum(0.0, 1.0 - cos_l ** 2))
    phi_l = rng.random(n) * (2.0 * np.pi)
    ux = sin_l * np.cos(phi_l)
    uy = sin_l * np.sin(phi_l)
    uz = cos_l
    x = np.zeros(n)
    y = np.zeros(n)
    z = np.zeros(n)
    w = np.ones(n)
    path = np.zeros(n)

    first_flight = True
    while x.size:
        s_plane = np.where(uz > 0.0, (d - z) / np.where(uz > 0.0, uz, 1.0), np.inf)
        if first_flight and ballistic_splitting:
            # Never-scattered contribution integrated analytically, then the
            # first interaction is forced to happen before the plane with
            # the complementary weight. Unbiased; kills the exp(-c d)
            # rare-arrival variance that dominates long hops.
            p_ballistic = np.exp(-c * s_plane) if c > 0.0 else np.ones_like(s_plane)
            xc = x + s_plane * ux
            yc = y + s_plane * uy
            ok = (
                np.isfinite(s_plane)
                & (xc * xc + yc * yc <= r_ap * r_ap)
                & (uz >= cos_fov)
            )
            if ok.any():
                deposit(
                    w[ok] * p_ballistic[ok],
                    (path[ok] + s_plane[ok]) * n_water / SPEED_OF_LIGHT,
                )
            if c == 0.0:
                break
            u = rng.random(x.size)
            p_interact = -np.expm1(-c * s_plane)
            step = -np.log1p(-u * p_interact) / c
            w = w * p_interact
            crossed = np.zeros(x.size, dtype=bool)
        elif c == 0.0:
            # Lossless straight flight: only the plane crossing matters.
            crossed = np.isfinite(s_plane)
            sc = s_plane[crossed]
            xc = x[crossed] + sc * ux[crossed]
            yc = y[crossed] + sc * uy[crossed]
            ok = (xc * xc + yc * yc <= r_ap * r_ap) & (uz[crossed] >= cos_fov)
            if ok.any():
                deposit(
                    w[crossed][ok],
                    (path[crossed][ok] + sc[ok]) * n_water / SPEED_OF_LIGHT,
                )
            break
        else:
            step = rng.exponential(1.0 / c, x.size)
            crossed = s_plane <= step
            if crossed.any():
                sc = s_plane[crossed]
                xc = x[crossed] + sc * ux[crossed]
                yc = y[crossed] + sc * uy[crossed]
                ok = (xc * xc + yc * yc <= r_ap * r_ap) & (uz[crossed] >= cos_fov)
                if ok.any():
                    deposit(
                        w[crossed][ok],
                        (path[crossed][ok] + sc[ok]) * n_water / SPEED_OF_LIGHT,
                    )
        first_flight = False

        # Photons that hit the plane terminate there; the rest interact.
        alive = ~crossed
        x = x[alive] + step[alive] * ux[alive]
        y = y[alive] + step[alive] * uy[alive]
        z = z[alive] + step[alive] * uz[alive]
        path = path[alive] + step[alive]
        w = w[alive] * albedo
        live = w >= weight_floor
        x = x[live]
        y = y[live]
        z = z[live]
        w = w[live]
        path = path[live]
        ux = ux[alive][live]
        uy = uy[alive][live]
        uz = uz[alive][live]
        if not x.size:
            break
        cos_t = _henyey_greenstein_cos(water.hg_asymmetry, rng.random(x.size))
        phi = rng.random(x.size) * (2.0 * np.pi)
        ux, uy, uz = _rotate_directions(ux, uy, uz, cos_t, phi)
    return hist


def simulate_impulse_response(
    geometry: LinkGeometry,
    water: WaterProperties,
    n_photons: int,
    bin_width: float,
    rng_seed: int,
    *,
    ballistic_splitting: bool = True,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    batch_size: int = 1_000_000,
) -> ImpulseResponse:
    """Monte Carlo estimate of the fading-free impulse response of one hop.

    Photons launch at the origin into a cone of the configured beam
    divergence, fly exponential free paths with rate c = a + b, scatter
    through Henyey-Greenstein angles, and lose weight by the albedo b/c at
    each interaction (weights below `weight_floor` terminate). A photon is
    recorded when it crosses the receiver plane inside the aperture with
    arrival direction within the field-of-view cone; any plane crossing
    terminates the photon.

    Photons are traced in batches of `batch_size`, each driven by a child
    seed spawned from `rng_seed` in a fixed order, so results are
    reproducible and independent of how batches are executed. The same
    (seed, batch_size) pair always yields bit-identical output.

    With `ballistic_splitting` (default) the never-scattered energy is
    added analytically and the traced photons importance-sample the
    scattered field; disabling it gives the plain analog estimator, which
    needs of order exp(+c d) photons to resolve the ballistic arrival.

    Returns
    -------
    ImpulseResponse
        Binned energy fractions; all-zero (and logged) if nothing arrived.
    """
    if not isinstance(n_photons, (int, np.integer)) or n_photons < 1:
        raise ValueError(f"n_photons must be a positive integer, got {n_photons!r}")
    if not (math.isfinite(bin_width) and bin_width > 0.0):
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    if not (math.isfinite(weight_floor) and 0.0 < weight_floor < 1.0):
        raise ValueError(f"weight_floor must be in (0, 1), got {weight_floor}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")

    n_batches = (int(n_photons) + batch_size - 1) // batch_size
    child_seeds = np.random.SeedSequence(rng_seed).spawn(n_batches)
    hist = np.zeros(1)
    remaining = int(n_photons)
    for child in child_seeds:
        n_batch = min(batch_size, remaining)
        remaining -= n_batch
        part = _trace_batch(
            np.random.default_rng(child),
            n_batch,
            geometry,
            water,
            bin_width,
            weight_floor,
            ballistic_splitting,
        )
        if part.size > hist.size:
            part[: hist.size] += hist
            hist = part
        else:
            hist[: part.size] += part

    frac = hist / float(n_photons)
    # Trim trailing zero bins but always keep at least one.
    nonzero = np.nonzero(frac)[0]
    if nonzero.size:
        frac = frac[: nonzero[-1] + 1]
    else:
        frac = frac[:1]
        logger.warning(
            "no photons received (d=%g m, %d photons); impulse response is all zero",
            geometry.distance,
            n_photons,
        )
    t_start = geometry.distance * water.refractive_index / SPEED_OF_LIGHT
    return ImpulseResponse(bin_width=bin_width, t_start=t_start, energy_fraction=frac)


def _unit_triangle_cdf(x: np.ndarray) -> np.ndarray:
    """Antiderivative of the unit triangle max(0, 1 - |x|), from -inf."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    rising = (x > -1.0) & (x <= 0.0)
    falling = (x > 0.0) & (x <= 1.0)
    out[rising] = 0.5 * (x[rising] + 1.0) ** 2
    out[falling] = 1.0 - 0.5 * (1.0 - x[falling]) ** 2
    out[x > 1.0] = 1.0
    return out


def bit_frame_energies(
    ir: ImpulseResponse,
    pulse_shape: str = "rectangular",
    bit_duration: float = 1e-9,
    tail_epsilon: float = 1e-6,
) -> BitEnergies:
    """Reduce an impulse response to per-bit-slot energy fractions.

    Convolving a full-slot rectangular pulse with the response and
    integrating the result over the 0th receive slot, for each transmit
    offset of k bit periods, amounts to averaging a unit triangle of base
    2*bit_duration centered at k*bit_duration over each response bin. That
    average has a closed form, so slot energies are exact for the binned
    response (no quadrature grid), and the slot sum telescopes to the
    captured fraction exactly.

    Slots are indexed from t_start: slot m covers
    [t_start + m*T_b, t_start + (m+1)*T_b).

    Parameters
    ----------
    ir : ImpulseResponse
    pulse_shape : str
        Only "rectangular" (full-slot OOK NRZ) is supported.
    bit_duration : float
        Bit period T_b (s).
    tail_epsilon : float
        Relative tail mass excluded when picking the channel memory.

    Returns
    -------
    BitEnergies
    """
    if pulse_shape != "rectangular":
        raise ValueError(f"unsupported pulse_shape {pulse_shape!r}; only 'rectangular'")
    if not (math.isfinite(bit_duration) and bit_duration > 0.0):
        raise ValueError(f"bit_duration must be > 0, got {bit_duration}")
    if not (0.0 < tail_epsilon < 1.0):
        raise ValueError(f"tail_epsilon must be in (0, 1), got {tail_epsilon}")
    frac = ir.energy_fraction
    if frac.sum() == 0.0:
        raise ValueError("impulse response is empty; no received energy to partition")

    edges = np.arange(frac.size + 1) * ir.bin_width
    n_slots = int(math.ceil(edges[-1] / bit_duration)) + 1
    slot_energy = np.empty(n_slots + 1)
    scale = bit_duration / ir.bin_width
    for m in range(n_slots + 1):
        g = _unit_triangle_cdf((edges - m * bit_duration) / bit_duration)
        slot_energy[m] = float(frac @ (g[1:] - g[:-1])) * scale

    memory = channel_memory(slot_energy, bit_duration, tail_epsilon)
    return BitEnergies(
        e_signal=float(slot_energy[0]),
        e_isi=slot_energy[1 : memory + 1],
        memory=memory,
    )


def channel_memory(response_energy_per_slot, bit_duration: float, tail_epsilon: float) -> int:
    """Number of bit slots whose leakage matters: the ISI depth L.

    Returns the smallest L such that the energy beyond slot L is below
    tail_epsilon times the total slot energy. `bit_duration` is part of
    the slotting convention and is validated but not otherwise used; the
    input array is already per-slot.
    """
    if not (math.isfinite(bit_duration) and bit_duration > 0.0):
        raise ValueError(f"bit_duration must be > 0, got {bit_duration}")
    if not (0.0 < tail_epsilon < 1.0):
        raise ValueError(f"tail_epsilon must be in (0, 1), got {tail_epsilon}")
    energies = np.asarray(response_energy_per_slot, dtype=float)
    if energies.ndim != 1 or energies.size == 0:
        raise ValueError("slot energies must be a nonempty 1-d array")
    if np.any(~np.isfinite(energies)) or np.any(energies < 0.0):
        raise ValueError("slot energies must be finite and >= 0")
    total = energies.sum()
    if total == 0.0:
        return 0
    tail = total - np.cumsum(energies)
    below = tail < tail_epsilon * total
    # cumsum makes the tail nonincreasing, so the first True is the answer.
    return int(np.argmax(below))
