"""Periodic tensor grids and Fourier-pseudospectral calculus on the flat torus.

Conventions (fixed, so stored fields are portable):

* samples ``x_j = j * L / n`` for ``j = 0..n-1`` on every axis;
* arrays are C-ordered with axis 0 slowest (lexicographic);
* wavenumbers ``k_m = 2 pi m / L`` with ``m`` in ``[-n/2, n/2)``;
* the Nyquist mode ``m = -n/2`` gets a zero derivative coefficient, on every
  derivative operator including the Laplacian, so that ``laplacian`` is
  exactly ``sum_j D_j D_j`` and the discrete integration-by-parts identities
  hold to rounding.

Pointwise products of fields are formed in physical space without
dealiasing; :func:`check_resolution` is the guard instead.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, ResolutionError

MAX_POINTS = 2**24
RESOLUTION_TOL = 1e-10


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    n: int
    length: float = 2.0 * np.pi

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError("length must be positive")
        if self.n**self.dim > MAX_POINTS:
            raise ValueError(f"{self.n}^{self.dim} points exceeds the budget of {MAX_POINTS}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def volume(self) -> float:
        return self.length**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def mesh(self) -> tuple[np.ndarray, ...]:
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    # -- spectral multipliers (rfftn layout: last axis is half-spectrum) --

    @cached_property
    def _mode_numbers(self) -> tuple[np.ndarray, ...]:
        out = []
        for j in range(self.dim):
            if j == self.dim - 1:
                m = np.fft.rfftfreq(self.n, 1.0 / self.n)
            else:
                m = np.fft.fftfreq(self.n, 1.0 / self.n)
            shape = [1] * self.dim
            shape[j] = m.size
            out.append(m.reshape(shape))
        return tuple(out)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable ``k_j`` arrays in rfftn layout, Nyquist included."""
        return tuple(2.0 * np.pi * m / self.length for m in self._mode_numbers)

    @cached_property
    def _dk(self) -> tuple[np.ndarray, ...]:
        # derivative wavenumbers: Nyquist zeroed
        out = []
        for m, k in zip(self._mode_numbers, self.wavenumbers):
            kd = k.copy()
            kd[np.abs(m) == self.n // 2] = 0.0
            out.append(kd)
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        """``|k|^2`` with the true Nyquist wavenumber (used for heat decay)."""
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def lap_multiplier(self) -> np.ndarray:
        return -sum(k**2 for k in self._dk)

    @cached_property
    def _top_third(self) -> np.ndarray:
        mask = np.zeros(tuple(np.broadcast_shapes(*[m.shape for m in self._mode_numbers])), bool)
        for m in self._mode_numbers:
            mask = mask | (np.abs(m) > self.n / 3.0)
        return mask

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values)

    def inverse(self, hat: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(hat, s=self.shape, axes=tuple(range(self.dim)))

    def ik(self, j: int) -> np.ndarray:
        return 1j * self._dk[j]

    def dk(self, j: int) -> np.ndarray:
        return self._dk[j]

    def derivative_hat(self, hat: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
        out = hat
        for j in axes:
            out = out * (1j * self._dk[j])
        return out


@dataclass(frozen=True)
class ScalarField:
    """Samples of a real function on a :class:`TorusGrid`.

    ``is_density`` asks for strict positivity and unit mass (to 1e-10).
    """

    grid: TorusGrid
    values: np.ndarray = field(repr=False)
    is_density: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        if self.is_density:
            if vals.min() <= 0:
                raise DegenerateInputError("density field is not strictly positive")
            mass = vals.mean() * self.grid.volume
            if abs(mass - 1.0) > 1e-10:
                raise ValueError(f"density field has mass {mass!r}, expected 1")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray, is_density: bool = False) -> "ScalarField":
        return ScalarField(self.grid, values, is_density)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__


def _finite(f: ScalarField) -> np.ndarray:
    if not np.all(np.isfinite(f.values)):
        raise ValueError("field contains non-finite values")
    return f.values


def gradient(f: ScalarField) -> list[ScalarField]:
    g = f.grid
    hat = g.forward(_finite(f))
    return [ScalarField(g, g.inverse(g.derivative_hat(hat, (j,)))) for j in range(g.dim)]


def laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    hat = g.forward(_finite(f))
    return ScalarField(g, g.inverse(hat * g.lap_multiplier))


def hessian(f: ScalarField) -> list[list[ScalarField]]:
    """d x d nested list; ``H[i][j] is H[j][i]`` (each pair computed once)."""
    g = f.grid
    hat = g.forward(_finite(f))
    H: list[list[ScalarField | None]] = [[None] * g.dim for _ in range(g.dim)]
    for i in range(g.dim):
        for j in range(i, g.dim):
            comp = ScalarField(g, g.inverse(g.derivative_hat(hat, (i, j))))
            H[i][j] = comp
            H[j][i] = comp
    return H  # type: ignore[return-value]


def integrate(f: ScalarField | np.ndarray, grid: TorusGrid | None = None) -> float:
    """Mean of samples times ``L^d``."""
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f)
    return float(vals.mean() * grid.volume)


def spectral_tail_ratio(values: np.ndarray, grid: TorusGrid) -> float:
    """Largest Fourier magnitude with some ``|m_j| > n/3``, relative to the peak."""
    hat = np.abs(grid.forward(values))
    peak = hat.max()
    if peak == 0:
        return 0.0
    return float(hat[grid._top_third].max() / peak)


def check_resolution(values: np.ndarray, grid: TorusGrid, what: str = "field",
                     tol: float = RESOLUTION_TOL) -> float:
    ratio = spectral_tail_ratio(values, grid)
    if not ratio <= tol:
        raise ResolutionError(
            f"{what} under-resolved on n={grid.n}, d={grid.dim}: "
            f"top-third spectral tail {ratio:.3e} > {tol:.1e}"
        )
    return ratio


# -- field serialization --------------------------------------------------
#
# Binary layout, all little-endian:
#   4 bytes  magic b"TSLF"
#   uint32   format version (1)
#   int32    dim
#   int32    n
#   float64  length
#   float64  n**dim samples, lexicographic (axis 0 slowest)

_MAGIC = b"TSLF"
_HEADER = struct.Struct("<4sIiid")


def save_field(f: ScalarField, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, f.grid.dim, f.grid.n, f.grid.length))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path: str | Path) -> ScalarField:
    raw = Path(path).read_bytes()
    magic, version, dim, n, length = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a field file")
    grid = TorusGrid(dim, n, length)
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} samples, found {vals.size}")
    return ScalarField(grid, vals.reshape(grid.shape))
