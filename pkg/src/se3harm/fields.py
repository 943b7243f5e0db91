"""Coefficient-field containers on regular voxel grids.

A ``SphericalField`` stores f^j_n(r) for functions R^3 x S2 -> C synthesized as

    phi(r, n) = 1/(8 pi^2) * sum_j (2j+1) sum_n Y^j_n(n) f^j_n(r)

and a ``WignerField`` stores f^j_{nm}(r) for functions SE(3) -> C synthesized
with conj(D^j_{nm}) in place of Y^j_n.  Coefficients live in a complex array of
shape (n_channels, nx, ny, nz), one contiguous volume per channel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .harmonic import EulerZYZ, sh_matrix, wigner_D

__all__ = [
    "DirectionSet",
    "GridSpec",
    "PackedRealEvenField",
    "SphericalField",
    "WignerField",
    "evaluate_on_directions",
    "field_inner",
    "pack_real_even",
    "project_to_sh",
    "read_shv",
    "rotate_coeffs",
    "sph_channels",
    "unpack_real_even",
    "wig_channels",
    "write_shv",
]

SYNTH_CONST = 1.0 / (8.0 * np.pi**2)


@dataclass(frozen=True)
class GridSpec:
    """Regular voxel grid: dims (nx, ny, nz), isotropic voxel size."""

    dims: tuple[int, int, int]
    voxel_size: float = 1.0

    def __post_init__(self):
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ValueError(f"bad grid dims {self.dims}")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz


@lru_cache(maxsize=None)
def sph_channels(L: int, parity: str = "all") -> tuple[tuple[int, int], ...]:
    """Channel list (j, n) for a spherical field; parity 'all' or 'even'."""
    js = range(0, L + 1) if parity == "all" else range(0, L + 1, 2)
    return tuple((j, n) for j in js for n in range(-j, j + 1))


@lru_cache(maxsize=None)
def wig_channels(L: int) -> tuple[tuple[int, int, int], ...]:
    """Channel list (j, n, m) for a Wigner field."""
    return tuple(
        (j, n, m) for j in range(L + 1) for n in range(-j, j + 1) for m in range(-j, j + 1)
    )


@dataclass
class SphericalField:
    """Voxel grid of spherical-harmonic coefficients f^j_n(r), |n| <= j <= L."""

    grid: GridSpec
    L: int
    coeffs: np.ndarray  # (n_channels, nx, ny, nz) complex128
    parity: str = "all"  # 'all' or 'even'

    def __post_init__(self):
        expected = len(sph_channels(self.L, self.parity))
        if self.coeffs.shape != (expected, *self.grid.dims):
            raise ValueError(
                f"coeffs shape {self.coeffs.shape} != ({expected}, *{self.grid.dims})"
            )

    @classmethod
    def zeros(cls, grid: GridSpec, L: int, parity: str = "all") -> "SphericalField":
        n = len(sph_channels(L, parity))
        return cls(grid, L, np.zeros((n, *grid.dims), dtype=complex), parity)

    @property
    def channels(self) -> tuple[tuple[int, int], ...]:
        return sph_channels(self.L, self.parity)

    def index(self, j: int, n: int) -> int:
        return self.channels.index((j, n))

    def copy(self) -> "SphericalField":
        return replace(self, coeffs=self.coeffs.copy())

    def to_parity_all(self) -> "SphericalField":
        """Embed an even-only field into the full channel layout."""
        if self.parity == "all":
            return self.copy()
        out = SphericalField.zeros(self.grid, self.L, "all")
        src = self.channels
        for i, (j, n) in enumerate(src):
            out.coeffs[out.index(j, n)] = self.coeffs[i]
        return out

    def extract_even(self) -> "SphericalField":
        """Keep the even-order channels only."""
        if self.parity == "even":
            return self.copy()
        chans = sph_channels(self.L, "even")
        data = np.stack([self.coeffs[self.index(j, n)] for j, n in chans])
        return SphericalField(self.grid, self.L, data, "even")


@dataclass
class WignerField:
    """Voxel grid of Wigner coefficients f^j_{nm}(r), |n|, |m| <= j <= L."""

    grid: GridSpec
    L: int
    coeffs: np.ndarray  # (n_channels, nx, ny, nz) complex128

    def __post_init__(self):
        expected = len(wig_channels(self.L))
        if self.coeffs.shape != (expected, *self.grid.dims):
            raise ValueError(
                f"coeffs shape {self.coeffs.shape} != ({expected}, *{self.grid.dims})"
            )

    @classmethod
    def zeros(cls, grid: GridSpec, L: int) -> "WignerField":
        n = len(wig_channels(L))
        return cls(grid, L, np.zeros((n, *grid.dims), dtype=complex))

    @property
    def channels(self) -> tuple[tuple[int, int, int], ...]:
        return wig_channels(self.L)

    def index(self, j: int, n: int, m: int) -> int:
        return self.channels.index((j, n, m))

    def copy(self) -> "WignerField":
        return replace(self, coeffs=self.coeffs.copy())


@dataclass
class DirectionSet:
    """Unit vectors on S2 with the Voronoi neighbor graph of the tessellation."""

    vectors: np.ndarray  # (N, 3)
    neighbors: tuple[tuple[int, ...], ...] = field(default=None)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        nrm = np.linalg.norm(self.vectors, axis=1)
        if np.any(np.abs(nrm - 1.0) > 1e-9):
            raise ValueError("directions must be unit vectors")
        if self.neighbors is None:
            self.neighbors = _voronoi_neighbors(self.vectors)

    def __len__(self) -> int:
        return len(self.vectors)


def _voronoi_neighbors(vectors: np.ndarray) -> tuple[tuple[int, ...], ...]:
    # Convex-hull triangulation of points on the sphere is the spherical
    # Delaunay graph; its edges are the Voronoi adjacencies.
    hull = ConvexHull(vectors)
    adj: list[set[int]] = [set() for _ in range(len(vectors))]
    for a, b, c in hull.simplices:
        adj[a].update((b, c))
        adj[b].update((a, c))
        adj[c].update((a, b))
    return tuple(tuple(sorted(s)) for s in adj)


# ---------------------------------------------------------------------------
# sampling / projection


def _synthesis_matrix(dirs: DirectionSet, L: int, parity: str) -> np.ndarray:
    chans = sph_channels(L, parity)
    full = sh_matrix(dirs.vectors, L)  # columns ordered (j asc, n asc) over all j
    cols = [j * j + (n + j) for (j, n) in chans]
    weights = np.array([(2 * j + 1) * SYNTH_CONST for (j, n) in chans])
    return full[:, cols] * weights[None, :]


def _projection_matrix(dirs: DirectionSet, L: int, parity: str) -> np.ndarray:
    key = ("pinv", L, parity)
    got = dirs._cache.get(key)
    if got is None:
        A = _synthesis_matrix(dirs, L, parity)
        if A.shape[0] < A.shape[1]:
            raise ValueError(
                f"{A.shape[0]} directions underdetermine {A.shape[1]} basis functions"
            )
        got = np.linalg.pinv(A)
        dirs._cache[key] = got
    return got


def evaluate_on_directions(fld: SphericalField, dirs: DirectionSet) -> np.ndarray:
    """Pointwise synthesis: (N_dirs, nx, ny, nz) array of phi(r, n_d)."""
    A = _synthesis_matrix(dirs, fld.L, fld.parity)
    return np.tensordot(A, fld.coeffs, axes=(1, 0))


def project_to_sh(
    samples: np.ndarray, dirs: DirectionSet, grid: GridSpec, L: int, parity: str = "all"
) -> SphericalField:
    """Least-squares fit of per-voxel direction samples to SH coefficients.

    `samples` has shape (N_dirs, nx, ny, nz) (a plain (N_dirs,) vector is
    treated as a single voxel on a 1x1x1 grid).
    """
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None, None, None]
        grid = GridSpec((1, 1, 1), grid.voxel_size if grid else 1.0)
    P = _projection_matrix(dirs, L, parity)
    coeffs = np.tensordot(P, samples.astype(complex), axes=(1, 0))
    return SphericalField(grid, L, coeffs, parity)


def realify(fld: SphericalField) -> SphericalField:
    """Project onto the real-function symmetry f^j_{-n} = (-1)^n conj(f^j_n)."""
    out = fld.copy()
    for j, n in fld.channels:
        if n < 0:
            continue
        a = fld.coeffs[fld.index(j, n)]
        b = fld.coeffs[fld.index(j, -n)]
        sym = 0.5 * (a + (-1) ** n * np.conj(b))
        out.coeffs[out.index(j, n)] = sym
        out.coeffs[out.index(j, -n)] = (-1) ** n * np.conj(sym)
    return out


def real_symmetry_residual(fld: SphericalField) -> float:
    """Max deviation from the real-function coefficient symmetry."""
    worst = 0.0
    for j, n in fld.channels:
        if n < 0:
            continue
        a = fld.coeffs[fld.index(j, n)]
        b = fld.coeffs[fld.index(j, -n)]
        worst = max(worst, float(np.abs(b - (-1) ** n * np.conj(a)).max()))
    return worst


# ---------------------------------------------------------------------------
# rotation


def rotate_coeffs(fld: SphericalField, g: EulerZYZ) -> SphericalField:
    """Rotate the angular part: evaluating the result at R_g n equals evaluating
    the input at n.  Per order j the coefficient vector is multiplied by D^j(g);
    the spatial grid is untouched."""
    out = fld.copy()
    for j in sorted({j for j, n in fld.channels}):
        D = wigner_D(j, g)
        idxs = [fld.index(j, n) for n in range(-j, j + 1)]
        block = fld.coeffs[idxs].reshape(2 * j + 1, -1)
        out.coeffs[idxs] = (D @ block).reshape(2 * j + 1, *fld.grid.dims)
    return out


# ---------------------------------------------------------------------------
# inner products


def field_inner(a, b) -> complex:
    """Inner product <a, b> of two coefficient fields over grid x sphere.

    Uses the (2j+1)-weighted channel sum that represents the continuous
    L2 product up to a positive constant; both arguments must share layout.
    """
    if type(a) is not type(b) or a.L != b.L or a.coeffs.shape != b.coeffs.shape:
        raise ValueError("mismatched fields")
    if isinstance(a, SphericalField):
        w = np.array([2 * j + 1 for j, n in a.channels], dtype=float)
    else:
        w = np.array([2 * j + 1 for j, n, m in a.channels], dtype=float)
    prod = (a.coeffs * np.conj(b.coeffs)).reshape(a.coeffs.shape[0], -1).sum(axis=1)
    return complex(np.dot(w, prod))


def field_norm(a) -> float:
    return float(np.sqrt(max(field_inner(a, a).real, 0.0)))


# ---------------------------------------------------------------------------
# real even-order packing


@dataclass
class PackedRealEvenField:
    """Compact storage for a real-valued, even-order field: channels (j even,
    0 <= n <= j) only, (L+2)^2/4 complex numbers per voxel for even L."""

    grid: GridSpec
    L: int
    data: np.ndarray  # (n_packed, nx, ny, nz) complex128

    @property
    def channels(self) -> tuple[tuple[int, int], ...]:
        return tuple((j, n) for j in range(0, self.L + 1, 2) for n in range(0, j + 1))


def pack_real_even(fld: SphericalField, tol: float = 1e-9) -> PackedRealEvenField:
    """Pack a real-valued even-order field; raises if the symmetry is violated."""
    if fld.parity != "even":
        raise ValueError("field must be even-order to pack")
    resid = real_symmetry_residual(fld)
    if resid > tol:
        raise ValueError(f"field is not real-valued (symmetry residual {resid:.2e})")
    packed = PackedRealEvenField(
        fld.grid, fld.L, np.empty((0,), dtype=complex)
    )
    data = np.stack([fld.coeffs[fld.index(j, n)] for j, n in packed.channels])
    packed.data = data
    return packed


def unpack_real_even(packed: PackedRealEvenField) -> SphericalField:
    """Inverse of pack_real_even (bit-exact for valid inputs)."""
    out = SphericalField.zeros(packed.grid, packed.L, "even")
    for i, (j, n) in enumerate(packed.channels):
        out.coeffs[out.index(j, n)] = packed.data[i]
        if n > 0:
            out.coeffs[out.index(j, -n)] = (-1) ** n * np.conj(packed.data[i])
    return out


# ---------------------------------------------------------------------------
# SHV binary format

_MAGIC = b"SHV1"
_FLAG_EVEN = 1
_FLAG_PACKED = 2
_FLAG_WIGNER = 4


def write_shv(path, obj) -> None:
    """Write a SphericalField, WignerField or PackedRealEvenField.

    Layout: magic "SHV1"; u32 nx, ny, nz; f64 voxel_size; u32 L; u32 flags
    (bit0 even-only, bit1 real-packed, bit2 Wigner); then one channel volume
    after another in (j asc, n asc [, m asc]) order, each voxel an f64 (re, im)
    pair, x fastest.  All little-endian.
    """
    if isinstance(obj, PackedRealEvenField):
        flags = _FLAG_EVEN | _FLAG_PACKED
        grid, L, data = obj.grid, obj.L, obj.data
    elif isinstance(obj, WignerField):
        flags = _FLAG_WIGNER
        grid, L, data = obj.grid, obj.L, obj.coeffs
    elif isinstance(obj, SphericalField):
        flags = _FLAG_EVEN if obj.parity == "even" else 0
        grid, L, data = obj.grid, obj.L, obj.coeffs
    else:
        raise TypeError(f"cannot write {type(obj)}")
    nx, ny, nz = grid.dims
    header = _MAGIC + struct.pack("<IIIdII", nx, ny, nz, grid.voxel_size, L, flags)
    # file stores x fastest: per channel transpose (x, y, z) -> (z, y, x)
    vol = np.ascontiguousarray(np.transpose(data, (0, 3, 2, 1)), dtype=complex)
    interleaved = np.empty(vol.shape + (2,), dtype="<f8")
    interleaved[..., 0] = vol.real
    interleaved[..., 1] = vol.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


def read_shv(path):
    """Read an SHV file; returns the matching container type."""
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not an SHV file")
    nx, ny, nz, voxel_size, L, flags = struct.unpack("<IIIdII", raw[4:4 + 28])
    grid = GridSpec((nx, ny, nz), voxel_size)
    if flags & _FLAG_WIGNER:
        nch = len(wig_channels(L))
    elif flags & _FLAG_PACKED:
        nch = sum(j + 1 for j in range(0, L + 1, 2))
    elif flags & _FLAG_EVEN:
        nch = len(sph_channels(L, "even"))
    else:
        nch = len(sph_channels(L, "all"))
    payload = np.frombuffer(raw, dtype="<f8", offset=32)
    expected = nch * nx * ny * nz * 2
    if payload.size != expected:
        raise ValueError(f"{path}: payload size {payload.size} != expected {expected}")
    pairs = payload.reshape(nch, nz, ny, nx, 2)
    data = np.ascontiguousarray(
        np.transpose(pairs[..., 0] + 1j * pairs[..., 1], (0, 3, 2, 1))
    )
    if flags & _FLAG_WIGNER:
        return WignerField(grid, L, data)
    if flags & _FLAG_PACKED:
        return PackedRealEvenField(grid, L, data)
    if flags & _FLAG_EVEN:
        return SphericalField(grid, L, data, "even")
    return SphericalField(grid, L, data, "all")


def scalar_field(volume: np.ndarray, voxel_size: float = 1.0) -> SphericalField:
    """Wrap a scalar volume as an L=0 SphericalField (the SHV scalar container)."""
    volume = np.asarray(volume)
    return SphericalField(
        GridSpec(volume.shape, voxel_size), 0, volume[None].astype(complex), "all"
    )
