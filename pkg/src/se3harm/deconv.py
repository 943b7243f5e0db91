"""Spatially regularized spherical deconvolution: crossing phantom with Rician
noise, diagonal fiber-response operator, normal equations with fiber-continuity
and background-mask regularizers, conjugate-gradient solve."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import (
    DirectionSet,
    GridSpec,
    SphericalField,
    field_inner,
    field_norm,
    project_to_sh,
    realify,
)
from .harmonic import legendre_eval
from .operators import apply_T0_s2

__all__ = [
    "FiberResponse",
    "PhantomSpec",
    "SolverConfig",
    "add_rician",
    "apply_H",
    "exp_response",
    "response_coeffs",
    "simulate_crossing",
    "solve_fod",
]


@dataclass
class FiberResponse:
    """Diagonal spherical-convolution coefficients c_j = int_-1^1 h(t) P_j(t) dt."""

    c: np.ndarray  # index j = 0..L

    @property
    def L(self) -> int:
        return len(self.c) - 1


def response_coeffs(h, L: int, nodes: int = 96) -> FiberResponse:
    """Legendre coefficients of an axially symmetric kernel h on [-1, 1].

    Gauss-Legendre quadrature, exact for polynomial h while the combined
    degree stays below 2*nodes.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    hv = np.asarray([h(t) for t in x], dtype=float)
    c = np.empty(L + 1)
    for j in range(L + 1):
        Pj = np.asarray([legendre_eval(j, t) for t in x])
        c[j] = float(np.dot(w, hv * Pj))
    return FiberResponse(c)


def exp_response(bD: float, L: int) -> FiberResponse:
    """Response of the single-fiber model h(t) = exp(-bD t^2)."""
    return response_coeffs(lambda t: np.exp(-bD * t * t), L)


def apply_H(fld: SphericalField, resp: FiberResponse) -> SphericalField:
    """Diagonal spherical convolution (H f)^j = c_j f^j."""
    if resp.L < fld.L:
        raise ValueError(f"response covers j <= {resp.L}, field needs {fld.L}")
    out = fld.copy()
    for i, ch in enumerate(fld.channels):
        out.coeffs[i] *= resp.c[ch[0]]
    return out


# ---------------------------------------------------------------------------
# phantom


@dataclass
class PhantomSpec:
    """Two straight tracts crossing at the grid center, in the x-y plane."""

    grid: GridSpec = dc_field(default_factory=lambda: GridSpec((24, 24, 1)))
    crossing_angle_deg: float = 90.0
    absolute_angle_deg: float = 0.0
    bD: float = 1.0
    tract_thickness: float = 5.0
    snr: float = 50.0

    def __post_init__(self):
        if not 0.0 < self.crossing_angle_deg <= 90.0:
            raise ValueError("crossing angle must be in (0, 90] degrees")

    def tract_directions(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit vectors of the two tracts; rotation by the absolute angle is
        clockwise in the x-y plane, tract 1 along +x at angle 0."""

        def planar(theta_deg):
            t = np.deg2rad(theta_deg)
            return np.array([np.cos(t), -np.sin(t), 0.0])

        return (
            planar(self.absolute_angle_deg),
            planar(self.absolute_angle_deg - self.crossing_angle_deg),
        )


def simulate_crossing(spec: PhantomSpec, gradients: DirectionSet):
    """Simulate the noiseless crossing signal.

    Returns (signal, truths, mask): signal has shape (n_grad, nx, ny, nz) with
    the per-voxel mean of exp(-bD (n . n_fib)^2) over the tracts present;
    truths is a per-voxel list of fiber direction vectors; mask flags tract
    voxels.  Background voxels carry zero signal.
    """
    nx, ny, nz = spec.grid.dims
    u1, u2 = spec.tract_directions()
    cx, cy = (nx - 1) / 2.0, (ny - 1) / 2.0
    X, Y = np.meshgrid(np.arange(nx) - cx, np.arange(ny) - cy, indexing="ij")
    half = spec.tract_thickness / 2.0

    def in_tract(u):
        # distance from the center line with direction u (z ignored; tracts
        # span the full plane)
        return np.abs(X * u[1] - Y * u[0]) <= half

    m1, m2 = in_tract(u1), in_tract(u2)
    mask2d = m1 | m2
    g = gradients.vectors
    e1 = np.exp(-spec.bD * (g @ u1) ** 2)
    e2 = np.exp(-spec.bD * (g @ u2) ** 2)
    sig2d = (
        e1[:, None, None] * (m1 & ~m2)
        + e2[:, None, None] * (m2 & ~m1)
        + 0.5 * (e1 + e2)[:, None, None] * (m1 & m2)
    )
    signal = np.repeat(sig2d[..., None], nz, axis=3)
    mask = np.repeat(mask2d[..., None], nz, axis=2).astype(float)
    truths = np.empty((nx, ny, nz), dtype=object)
    for ix in range(nx):
        for iy in range(ny):
            t = []
            if m1[ix, iy]:
                t.append(u1)
            if m2[ix, iy]:
                t.append(u2)
            for iz in range(nz):
                truths[ix, iy, iz] = list(t)
    return signal, truths, mask


def add_rician(signal: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """S_noisy = sqrt((S + n_real)^2 + n_imag^2), independent draws per entry."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.abs(signal)
    nr = rng.normal(0.0, sigma, size=signal.shape)
    ni = rng.normal(0.0, sigma, size=signal.shape)
    return np.sqrt((signal + nr) ** 2 + ni**2)


# ---------------------------------------------------------------------------
# solver


@dataclass
class SolverConfig:
    lam: float = 0.005
    lam_mask: float = 1.0
    cg_iterations: int = 100
    L: int = 8

    def __post_init__(self):
        if self.lam < 0 or self.lam_mask < 0:
            raise ValueError("regularization strengths must be >= 0")


class CGDivergence(RuntimeError):
    pass


def _normal_operator(resp: FiberResponse, mask: np.ndarray, cfg: SolverConfig):
    lam, lam_mask = cfg.lam, cfg.lam_mask
    bg = 1.0 - mask

    def A(f: SphericalField) -> SphericalField:
        out = apply_H(apply_H(f, resp), resp)
        if lam:
            t = apply_T0_s2(apply_T0_s2(f.to_parity_all())).extract_even()
            out.coeffs -= lam * t.coeffs
        if lam_mask:
            out.coeffs += lam_mask * bg[None] * f.coeffs
        return out

    return A


def solve_fod(
    signal: np.ndarray,
    gradients: DirectionSet,
    resp: FiberResponse,
    mask: np.ndarray,
    grid: GridSpec,
    cfg: SolverConfig,
    return_residuals: bool = False,
):
    """Solve (H^T H - lam T_0^2 + lam_mask (1 - w_m)) f = H^T S by CG.

    The signal (n_grad, nx, ny, nz) is projected once onto the real even-order
    SH basis; T_0^2 is the composition of the transport operator with itself,
    which keeps the normal operator exactly self-adjoint under the field inner
    product.  Returns the even-order FOD field (plus the CG residual-norm
    history when requested).
    """
    if resp.c[0] == 0.0:
        raise ValueError("response must be invertible at j = 0")
    s = realify(project_to_sh(signal, gradients, grid, cfg.L, "even"))
    b = apply_H(s, resp)
    A = _normal_operator(resp, mask, cfg)

    # Conjugate-residual iteration: like CG for the symmetric semi-definite
    # normal operator but minimizing the residual norm, which therefore
    # decreases monotonically.
    x = SphericalField.zeros(grid, cfg.L, "even")
    r = b.copy()
    p = r.copy()
    Ar = A(r)
    Ap = Ar.copy()
    rAr = field_inner(r, Ar).real
    res = field_norm(r)
    history = [res]
    best = res
    for _ in range(cfg.cg_iterations):
        denom = field_inner(Ap, Ap).real
        if denom <= 0.0 or rAr == 0.0:
            break
        alpha = rAr / denom
        x.coeffs += alpha * p.coeffs
        r.coeffs -= alpha * Ap.coeffs
        Ar = A(r)
        rAr_new = field_inner(r, Ar).real
        resn = field_norm(r)
        history.append(resn)
        best = min(best, resn)
        if best > 0 and resn > 10.0 * best:
            raise CGDivergence(f"residual grew 10x over its minimum ({resn:.3e})")
        beta = rAr_new / rAr
        p.coeffs = r.coeffs + beta * p.coeffs
        Ap.coeffs = Ar.coeffs + beta * Ap.coeffs
        rAr = rAr_new
    x = realify(x)
    if return_residuals:
        return x, np.asarray(history)
    return x
