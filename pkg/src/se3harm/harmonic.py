"""Exact special-function kernel: Legendre polynomials, Racah-normalized spherical
and solid harmonics, Wigner d/D matrices, Clebsch-Gordan coefficients, and the
analytic triple-product integral over SO(3).

Conventions (fixed once, used everywhere in this package):

* Rotations are parametrized by ZYZ Euler angles, ``R(gamma, beta, alpha) =
  Rz(gamma) Ry(beta) Rz(alpha)``, all counter-clockwise.
* ``wigner_D(j, g)[n, m] = exp(-i n gamma) d^j_{nm}(beta) exp(-i m alpha)`` with
  indices running -j..j.  These matrices are unitary representations:
  ``D(g h) = D(g) D(h)``.
* Spherical harmonics are Racah-normalized with Condon-Shortley phases, so that
  ``Y^j(e_z)_m = delta_{m,0}``, ``sum_m Y^j_m(a) conj(Y^j_m(b)) = P_j(a.b)`` and
  ``conj(Y^j_m) = (-1)^m Y^j_{-m}``.
* ``S_MATRIX`` is the unitary change of basis with ``wigner_D(1, g) =
  S R(g) S^H`` exactly; its rows map a Cartesian vector to components ordered
  (-1, 0, +1).
* Haar measure on SO(3) carries total mass 8 pi^2, matching the orthogonality
  constant ``<D^j_{nm}, D^j_{nm}> = 8 pi^2 / (2j+1)``.
"""

from __future__ import annotations

import threading
from functools import lru_cache
from math import lgamma
from typing import NamedTuple

import numpy as np

__all__ = [
    "EulerZYZ",
    "S_MATRIX",
    "cg",
    "euler_from_matrix",
    "legendre_eval",
    "rotation_matrix",
    "sh_eval",
    "sh_matrix",
    "so3_quadrature",
    "solid_harmonic_eval",
    "solid_harmonic_coeffs",
    "triple_product_integral",
    "wigner_D",
    "wigner_small_d",
]


class EulerZYZ(NamedTuple):
    """ZYZ Euler angles (radians); the rotation is Rz(gamma) Ry(beta) Rz(alpha)."""

    gamma: float
    beta: float
    alpha: float


#: Unitary map from Cartesian 3-vectors to spherical components (-1, 0, +1),
#: chosen so that wigner_D(1, g) == S_MATRIX @ R(g) @ S_MATRIX.conj().T exactly.
S_MATRIX = np.array(
    [
        [1.0, 1.0j, 0.0],
        [0.0, 0.0, np.sqrt(2.0)],
        [-1.0, 1.0j, 0.0],
    ]
) / np.sqrt(2.0)


def rotation_matrix(g: EulerZYZ) -> np.ndarray:
    """3x3 rotation matrix Rz(gamma) Ry(beta) Rz(alpha)."""
    gamma, beta, alpha = g

    def rz(t):
        c, s = np.cos(t), np.sin(t)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def ry(t):
        c, s = np.cos(t), np.sin(t)
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])

    return rz(gamma) @ ry(beta) @ rz(alpha)


def euler_from_matrix(R: np.ndarray) -> EulerZYZ:
    """ZYZ Euler angles of a rotation matrix (beta in [0, pi])."""
    beta = np.arccos(np.clip(R[2, 2], -1.0, 1.0))
    if np.sin(beta) > 1e-12:
        gamma = np.arctan2(R[1, 2], R[0, 2])
        alpha = np.arctan2(R[2, 1], -R[2, 0])
    else:
        # gimbal-locked: fold everything into gamma
        gamma = np.arctan2(R[1, 0], R[0, 0])
        if R[2, 2] < 0:
            gamma = -gamma
        alpha = 0.0
    return EulerZYZ(float(gamma), float(beta), float(alpha))


def _logfact(n: int) -> float:
    return lgamma(n + 1)


def legendre_eval(l: int, t: float) -> float:
    """Legendre polynomial P_l(t) by the stable three-term recurrence.

    Raises ValueError for |t| > 1 + 1e-12; values inside the roundoff collar
    are clamped to [-1, 1].
    """
    if l < 0:
        raise ValueError("order must be non-negative")
    t = float(t)
    if abs(t) > 1.0 + 1e-12:
        raise ValueError(f"argument {t} outside [-1, 1]")
    t = min(1.0, max(-1.0, t))
    if l == 0:
        return 1.0
    pm2, pm1 = 1.0, t
    for k in range(2, l + 1):
        pm2, pm1 = pm1, ((2 * k - 1) * t * pm1 - (k - 1) * pm2) / k
    return pm1


_CG_CACHE: dict[tuple[int, int, int, int, int, int], float] = {}
_CG_LOCK = threading.Lock()


def _cg_uncached(j, m, j1, m1, j2, m2):
    # Racah's single-sum closed form, log-factorial accumulation.
    logdelta = 0.5 * (
        _logfact(j1 + j2 - j)
        + _logfact(j1 - j2 + j)
        + _logfact(-j1 + j2 + j)
        - _logfact(j1 + j2 + j + 1)
    )
    logpre = 0.5 * (
        np.log(2 * j + 1)
        + _logfact(j1 + m1)
        + _logfact(j1 - m1)
        + _logfact(j2 + m2)
        + _logfact(j2 - m2)
        + _logfact(j + m)
        + _logfact(j - m)
    )
    tmin = max(0, -(j - j2 + m1), -(j - j1 - m2))
    tmax = min(j1 + j2 - j, j1 - m1, j2 + m2)
    acc = 0.0
    for t in range(tmin, tmax + 1):
        logden = (
            _logfact(t)
            + _logfact(j1 + j2 - j - t)
            + _logfact(j1 - m1 - t)
            + _logfact(j2 + m2 - t)
            + _logfact(j - j2 + m1 + t)
            + _logfact(j - j1 - m2 + t)
        )
        acc += (-1) ** t * np.exp(logdelta + logpre - logden)
    return acc


def cg(j: int, m: int, j1: int, m1: int, j2: int, m2: int) -> float:
    """Clebsch-Gordan coefficient <j m | j1 m1, j2 m2> (Condon-Shortley).

    Returns exactly 0 when a selection rule fails (m != m1+m2 or triangle
    violated).  Malformed indices |m_i| > j_i raise ValueError.
    """
    if abs(m) > j or abs(m1) > j1 or abs(m2) > j2:
        raise ValueError("|m| > j in CG coefficient")
    if m != m1 + m2 or not abs(j1 - j2) <= j <= j1 + j2:
        return 0.0
    key = (j, m, j1, m1, j2, m2)
    val = _CG_CACHE.get(key)
    if val is None:
        val = _cg_uncached(j, m, j1, m1, j2, m2)
        with _CG_LOCK:
            _CG_CACHE[key] = val
    return val


def wigner_small_d(j: int, n: int, m: int, beta: float) -> float:
    """Real Wigner small-d matrix element d^j_{nm}(beta).

    Explicit alternating sum; the sum index covers every term with
    non-negative factorial arguments, max(0, m-n) <= s <= min(j+m, j-n).
    Equals <j n| exp(-i beta Jy) |j m> in the standard ladder convention.
    """
    if abs(n) > j or abs(m) > j:
        raise ValueError("|n|, |m| must not exceed j")
    pre = 0.5 * (_logfact(j + n) + _logfact(j - n) + _logfact(j + m) + _logfact(j - m))
    smin = max(0, m - n)
    smax = min(j + m, j - n)
    c, s_ = np.cos(beta / 2.0), np.sin(beta / 2.0)
    tot = 0.0
    for s in range(smin, smax + 1):
        logden = _logfact(j + m - s) + _logfact(s) + _logfact(n - m + s) + _logfact(j - n - s)
        tot += (
            (-1) ** (n - m + s)
            * np.exp(pre - logden)
            * c ** (2 * j + m - n - 2 * s)
            * s_ ** (n - m + 2 * s)
        )
    return tot


def wigner_D(j: int, g: EulerZYZ) -> np.ndarray:
    """(2j+1)x(2j+1) Wigner-D matrix, row/column indices ordered -j..j.

    D^j_{nm}(gamma, beta, alpha) = exp(-i n gamma) d^j_{nm}(beta) exp(-i m alpha).
    """
    gamma, beta, alpha = g
    ms = np.arange(-j, j + 1)
    d = np.array([[wigner_small_d(j, n, m, beta) for m in ms] for n in ms])
    return np.exp(-1j * ms[:, None] * gamma) * d * np.exp(-1j * ms[None, :] * alpha)


@lru_cache(maxsize=None)
def _ym_norm(l: int, m: int) -> float:
    return np.exp(0.5 * (_logfact(l - m) - _logfact(l + m)))


def sh_matrix(directions: np.ndarray, L: int) -> np.ndarray:
    """Racah-normalized spherical harmonics Y^j_n for all j <= L at many points.

    Parameters
    ----------
    directions : (N, 3) array of unit vectors.
    L : band limit.

    Returns
    -------
    (N, (L+1)^2) complex array, columns ordered (j asc, n asc).

    Uses the associated-Legendre recurrences with Condon-Shortley phase; the
    negative orders follow from conj(Y^j_m) = (-1)^m Y^j_{-m}.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("directions must be unit vectors")
    x, y, z = directions[:, 0], directions[:, 1], directions[:, 2]
    ct = np.clip(z, -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct**2))
    phase = np.ones_like(x, dtype=complex)
    expphi = np.where(st > 1e-300, (x + 1j * y) / np.where(st > 0, st, 1.0), 1.0 + 0j)

    # P[m] holds P_l^m(ct) column-by-column while l sweeps upward
    out = np.zeros((directions.shape[0], (L + 1) ** 2), dtype=complex)

    def col(j, n):
        return j * j + (n + j)

    # iterate m = 0..L; for each m produce P_m^m, P_{m+1}^m, ... P_L^m
    pmm = np.ones_like(ct)
    for m in range(L + 1):
        if m > 0:
            pmm = pmm * (-(2 * m - 1)) * st
            phase = phase * expphi
        plm_prev, plm = np.zeros_like(ct), pmm
        for l in range(m, L + 1):
            if l > m:
                plm_prev, plm = plm, ((2 * l - 1) * ct * plm - (l + m - 1) * plm_prev) / (l - m)
            yval = _ym_norm(l, m) * plm * phase
            out[:, col(l, m)] = yval
            if m > 0:
                out[:, col(l, -m)] = (-1) ** m * np.conj(yval)
    return out


def sh_eval(j: int, m: int, direction) -> complex:
    """Single Racah-normalized spherical harmonic Y^j_m at a unit vector."""
    if abs(m) > j:
        raise ValueError("|m| must not exceed j")
    row = sh_matrix(np.asarray(direction, dtype=float)[None, :], j)
    return complex(row[0, j * j + (m + j)])


@lru_cache(maxsize=None)
def solid_harmonic_coeffs(j: int, m: int) -> tuple[tuple[int, int, int, complex], ...]:
    """Monomial expansion of the solid harmonic R^j_m as ((px, py, pz, coeff), ...).

    R^j_m(r) = |r|^j Y^j_m(r/|r|), a homogeneous harmonic polynomial of degree j.
    """
    pre = np.exp(0.5 * (_logfact(j + m) + _logfact(j - m)))
    mono: dict[tuple[int, int, int], complex] = {}
    for i in range(j + 1):
        for jj in range(j + 1):
            k = j - i - jj
            if k < 0 or i - jj != m:
                continue
            base = pre / (
                np.exp(_logfact(i) + _logfact(jj) + _logfact(k)) * 2.0**i * 2.0**jj
            )
            # (x - iy)^jj (-x - iy)^i z^k expanded binomially
            for a in range(jj + 1):
                for b in range(i + 1):
                    cx = (
                        np.exp(
                            _logfact(jj)
                            - _logfact(a)
                            - _logfact(jj - a)
                            + _logfact(i)
                            - _logfact(b)
                            - _logfact(i - b)
                        )
                        * (-1j) ** (jj - a)
                        * (-1.0) ** b
                        * (-1j) ** (i - b)
                    )
                    key = (a + b, (jj - a) + (i - b), k)
                    mono[key] = mono.get(key, 0.0 + 0.0j) + base * cx
    return tuple((px, py, pz, c) for (px, py, pz), c in sorted(mono.items()) if c != 0)


def solid_harmonic_eval(j: int, m: int, r) -> complex:
    """Solid harmonic R^j_m at an arbitrary (not necessarily unit) 3-vector."""
    x, y, z = np.asarray(r, dtype=float)
    tot = 0.0 + 0.0j
    for px, py, pz, c in solid_harmonic_coeffs(j, m):
        tot += c * x**px * y**py * z**pz
    return complex(tot)


def triple_product_integral(
    j: int, n: int, m: int, jp: int, np_: int, mp: int, l: int, kp: int, k: int
) -> float:
    """Integral over SO(3) of conj(D^l_{kp,k}) conj(D^jp_{np,mp}) D^j_{nm}.

    Equals 8 pi^2 / (2j+1) <j n | jp np, l kp> <j m | jp mp, l k>; zero whenever
    a CG selection rule fails.
    """
    if n != np_ + kp or m != mp + k:
        return 0.0
    return 8.0 * np.pi**2 / (2 * j + 1) * cg(j, n, jp, np_, l, kp) * cg(j, m, jp, mp, l, k)


def so3_quadrature(resolution: int) -> tuple[list[EulerZYZ], np.ndarray]:
    """Product quadrature on SO(3) with total mass 8 pi^2.

    Uniform grids of 2*resolution points in gamma and alpha, Gauss-Legendre
    with `resolution` nodes in cos(beta).  Integrates band-limited functions
    exactly while every Wigner order involved stays below the resolution.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    k = np.arange(2 * resolution)
    gam = 2.0 * np.pi * k / (2 * resolution)
    alp = 2.0 * np.pi * k / (2 * resolution)
    xb, wb = np.polynomial.legendre.leggauss(resolution)
    bet = np.arccos(xb)
    nodes: list[EulerZYZ] = []
    weights = []
    wang = (2.0 * np.pi / (2 * resolution)) ** 2
    for gi in gam:
        for bi, wi in zip(bet, wb):
            for ai in alp:
                nodes.append(EulerZYZ(float(gi), float(bi), float(ai)))
                weights.append(wi * wang)
    return nodes, np.asarray(weights)
