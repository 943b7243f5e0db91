"""Forward-Euler time integration of generator specs, plus the translation
experiment profiles.

The scheme is deliberately the plainest one: f <- f + dt * A f with first-order
central differences inside A.  It is dispersive and known to oscillate for pure
advection; the experiments study exactly that behavior, so there is no
stabilization beyond divergence detection.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import DirectionSet, GridSpec, SphericalField, evaluate_on_directions
from .harmonic import sh_matrix
from .operators import Generator, GeneratorSpec, build_generator

__all__ = [
    "DivergenceError",
    "EvolutionConfig",
    "advection_reference_1d",
    "angular_delta_field",
    "euler_integrate",
    "translation_profile",
]


class DivergenceError(RuntimeError):
    """Euler integration produced non-finite values."""

    def __init__(self, step: int):
        super().__init__(f"divergence detected at step {step}")
        self.step = step


@dataclass
class EvolutionConfig:
    dt: float
    steps: int
    generator: GeneratorSpec = dc_field(default_factory=GeneratorSpec)
    snapshot_stride: int = 0

    def __post_init__(self):
        if self.dt <= 0 or self.steps <= 0:
            raise ValueError("dt and steps must be positive")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be >= 0")


def euler_integrate(
    f0: SphericalField, cfg: EvolutionConfig, generator: Generator | None = None
):
    """Iterate f <- f + dt * A f for cfg.steps steps.

    Returns (final field, snapshots) where snapshots is a list of
    (step, field) pairs taken every snapshot_stride steps (empty for stride 0).
    Raises DivergenceError as soon as a step produces non-finite values.
    """
    A = generator if generator is not None else build_generator(cfg.generator, f0.L)
    f = f0.to_parity_all() if f0.parity != "all" else f0.copy()
    snapshots = []
    for step in range(1, cfg.steps + 1):
        rhs = A(f)
        f.coeffs += cfg.dt * rhs.coeffs
        if not np.isfinite(f.coeffs.reshape(-1)[:: max(1, f.coeffs.size // 4096)]).all():
            if not np.isfinite(f.coeffs).all():
                raise DivergenceError(step)
        if cfg.snapshot_stride and step % cfg.snapshot_stride == 0:
            snapshots.append((step, f.copy()))
    return f, snapshots


def angular_delta_field(
    grid: GridSpec, L: int, direction, envelope: np.ndarray
) -> SphericalField:
    """Field whose angular part is the band-limited delta at `direction`
    scaled by a spatial envelope: f^j_n(r) = 2 pi conj(Y^j_n(dir)) envelope(r)."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    Y = sh_matrix(direction[None, :], L)[0]
    fld = SphericalField.zeros(grid, L, "all")
    for i, (j, n) in enumerate(fld.channels):
        fld.coeffs[i] = 2.0 * np.pi * np.conj(Y[j * j + (n + j)]) * envelope
    return fld


def gaussian_pulse_field(grid: GridSpec, L: int, direction=(0, 0, 1), width: float = 1.0):
    """phi_0(r, n) = exp(-|r - r_c|^2 / (2 w^2)) delta_dir(n), centered on the grid."""
    nx, ny, nz = grid.dims
    x = np.arange(nx) - (nx - 1) / 2.0
    y = np.arange(ny) - (ny - 1) / 2.0
    z = np.arange(nz) - (nz - 1) / 2.0
    r2 = (
        x[:, None, None] ** 2 + y[None, :, None] ** 2 + z[None, None, :] ** 2
    )
    env = np.exp(-r2 / (2.0 * width**2))
    return angular_delta_field(grid, L, direction, env)


def translation_profile(fld: SphericalField, dirs: DirectionSet):
    """Profiles along the z-axis through the grid center.

    Returns (z_offsets, max_phi, f0): the per-z maximum of the synthesized
    orientation distribution, and the j=0 coefficient, both on the line
    x = x_c, y = y_c.  Offsets are voxels relative to the center.
    """
    nx, ny, nz = fld.grid.dims
    cx, cy, cz = (nx - 1) // 2, (ny - 1) // 2, (nz - 1) // 2
    line_field = SphericalField(
        GridSpec((1, 1, nz), fld.grid.voxel_size),
        fld.L,
        np.ascontiguousarray(fld.coeffs[:, cx : cx + 1, cy : cy + 1, :]),
        fld.parity,
    )
    line = evaluate_on_directions(line_field, dirs)[:, 0, 0, :].real
    max_phi = line.max(axis=0)
    f0 = fld.coeffs[fld.index(0, 0), cx, cy, :].real
    z = np.arange(nz, dtype=float) - cz
    return z, max_phi, f0


def advection_reference_1d(profile: np.ndarray, dt: float, steps: int) -> np.ndarray:
    """1-D reference run: repeated first-order central-difference transport
    step phi_k <- phi_k + dt * (phi_{k-1} - phi_{k+1}) / 2, zero padded.

    Moves a pulse toward +z, matching the 3-D transport experiment."""
    phi = np.asarray(profile, dtype=float).copy()
    for _ in range(steps):
        up = np.zeros_like(phi)
        dn = np.zeros_like(phi)
        up[1:] = phi[:-1]
        dn[:-1] = phi[1:]
        phi = phi + dt * 0.5 * (up - dn)
    return phi
