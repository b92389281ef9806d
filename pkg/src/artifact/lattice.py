"""Paired spatial/frequency lattices and transform conventions.

The Fourier convention is (Fh)(xi) = integral of exp(-i 2 pi xi.x) h(x) dx
and its inverse carries exp(+i 2 pi x.xi).  A grid couples a spatial lattice
of M points with spacing h to the frequency lattice of M points with spacing
1/(M h); both are stored in FFT order (index 0 is the origin).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class FrequencyGrid:
    """Frequency lattice of size M per axis covering [-extent, extent).

    extent is the per-axis frequency half-width in cycles per unit length;
    the paired spatial lattice has spacing h = 1/(2 extent) and covers
    [-M h / 2, M h / 2) per axis.
    """

    dim: int
    size: int
    extent: float

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("grid dim must be >= 1")
        if self.size < 2 or self.size % 2 != 0:
            raise ConfigError("grid size must be even and >= 2")
        if (self.size & (self.size - 1)) != 0:
            raise ConfigError("grid size must be a power of two")
        if not self.extent > 0:
            raise ConfigError("grid extent must be positive")

    @property
    def freq_spacing(self) -> float:
        return 2.0 * self.extent / self.size

    @property
    def spacing(self) -> float:
        """Spatial lattice spacing h = 1/(2 extent)."""
        return 1.0 / (2.0 * self.extent)

    @property
    def box_halfwidth(self) -> float:
        """Half-width of the spatial box, M h / 2."""
        return 0.5 * self.size * self.spacing

    @cached_property
    def _signed_index(self) -> np.ndarray:
        return np.fft.fftfreq(self.size) * self.size

    def freq_axis(self) -> np.ndarray:
        """One axis of frequency nodes in FFT order."""
        return self._signed_index * self.freq_spacing

    def space_axis(self) -> np.ndarray:
        """One axis of spatial nodes in FFT order."""
        return self._signed_index * self.spacing

    def freq_nodes(self) -> list[np.ndarray]:
        """Per-axis frequency coordinates broadcast over the full lattice."""
        ax = self.freq_axis()
        return list(np.meshgrid(*([ax] * self.dim), indexing="ij", sparse=True))

    def space_nodes(self) -> list[np.ndarray]:
        ax = self.space_axis()
        return list(np.meshgrid(*([ax] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def freq_radius(self) -> np.ndarray:
        """Euclidean |xi| on the full lattice."""
        nodes = self.freq_nodes()
        out = np.zeros(self.shape)
        for c in nodes:
            out = out + c * c
        return np.sqrt(out)

    @cached_property
    def space_radius(self) -> np.ndarray:
        nodes = self.space_nodes()
        out = np.zeros(self.shape)
        for c in nodes:
            out = out + c * c
        return np.sqrt(out)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def freq_cell_volume(self) -> float:
        return self.freq_spacing ** self.dim

    # transforms ----------------------------------------------------------

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Continuum Fourier transform sampled on the frequency lattice."""
        return np.fft.fftn(values) * self.cell_volume

    def inverse(self, spectrum: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(spectrum) / self.cell_volume

    def density_from_char(self, char_values: np.ndarray) -> np.ndarray:
        """Invert a characteristic function to its density on the lattice.

        Uses p(x) = integral exp(-i 2 pi x.xi) char(xi) dxi, so the forward
        FFT applies.
        """
        return np.fft.fftn(char_values) * self.freq_cell_volume

    def apply_multiplier(self, multiplier: np.ndarray, values: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(multiplier * np.fft.fftn(values))

    def convolve(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Approximate continuum convolution of two lattice functions."""
        return np.fft.ifftn(np.fft.fftn(g) * np.fft.fftn(h)) * self.cell_volume

    def reflect(self, values: np.ndarray) -> np.ndarray:
        """values(-x) on the lattice (FFT-order index negation)."""
        out = values
        for ax in range(values.ndim):
            out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
        return out

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume)

    def lp_norm(self, values: np.ndarray, p: float) -> float:
        if p == np.inf:
            return float(np.max(np.abs(values)))
        return float(np.sum(np.abs(values) ** p) * self.cell_volume) ** (1.0 / p)

    def shift_phase(self, y) -> np.ndarray:
        """Multiplier of the shift f(. - y): exp(-i 2 pi xi.y)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (self.dim,):
            raise ConfigError("shift vector has wrong dimension")
        phase = np.zeros(self.shape)
        for c, yc in zip(self.freq_nodes(), y):
            phase = phase + c * yc
        return np.exp(-2j * np.pi * phase)
