"""Left-invariant vector fields and their quadratic forms acting on coefficient
fields: algebraic in the angular index, finite differences in space.

Every operator is assembled once into a set of sparse coupling matrices, one
per finite-difference kernel; application then runs one shared stencil pass
per kernel over all channels and a sparse matrix product across channels.
Boundary handling is zero padding throughout, which makes the first-order
stencils exactly skew-adjoint and the diffusion generators semi-definite.

Spherical derivative components use the phase convention

    d1[-1] = (dx + i dy)/sqrt(2),   d1[0] = dz,   d1[+1] = -(dx - i dy)/sqrt(2)

(the unique choice under which the Clebsch-Gordan coupling formulas below
reproduce the geometric operators; see the oracle tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fields import SphericalField, WignerField, sph_channels, wig_channels
from .harmonic import cg

__all__ = [
    "CoefficientOperator",
    "GeneratorSpec",
    "SphericalDerivativeStencil",
    "ZBlockCoefficients",
    "apply_J_squared",
    "apply_Jpm",
    "apply_Jz",
    "apply_T0_s2",
    "apply_TT",
    "apply_Tk",
    "apply_Txy2_s2",
    "apply_Tz2_s2",
    "apply_convolved_quadratic",
    "apply_mixed_TJ",
    "build_generator",
    "fd_apply",
    "laplacian",
    "sph_deriv_stencil",
    "z_block",
]

# ---------------------------------------------------------------------------
# finite-difference kernels (zero padding, acting on the last three axes)

KERNEL_NAMES = ("id", "dx", "dy", "dz", "dxx", "dyy", "dzz", "dxy", "dxz", "dyz")


def _shift(a: np.ndarray, axis: int, s: int) -> np.ndarray:
    """out[..., i, ...] = a[..., i+s, ...] with zeros shifted in."""
    out = np.zeros_like(a)
    ax = a.ndim - 3 + axis
    n = a.shape[ax]
    if abs(s) >= n:
        return out
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if s > 0:
        dst[ax] = slice(0, n - s)
        src[ax] = slice(s, n)
    elif s < 0:
        dst[ax] = slice(-s, n)
        src[ax] = slice(0, n + s)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _central(a, axis):
    return 0.5 * (_shift(a, axis, +1) - _shift(a, axis, -1))


def _second(a, axis):
    return _shift(a, axis, +1) - 2.0 * a + _shift(a, axis, -1)


def fd_apply(kernel: str, volume: np.ndarray) -> np.ndarray:
    """Apply a named finite-difference kernel to a volume (last three axes).

    Kernels: central_x/y/z (alias dx/dy/dz, [-1 0 1]/2), d_xx/d_yy/d_zz
    (compact [1 -2 1]), d_xy/d_xz/d_yz (corner +-1/4), id.
    """
    name = kernel.replace("central_", "d").replace("d_", "d")
    if name == "id":
        return volume.copy()
    if name in ("dx", "dy", "dz"):
        return _central(volume, "xyz".index(name[1]))
    if name in ("dxx", "dyy", "dzz"):
        return _second(volume, "xyz".index(name[1]))
    if name in ("dxy", "dxz", "dyz"):
        return _central(_central(volume, "xyz".index(name[1])), "xyz".index(name[2]))
    raise ValueError(f"unknown kernel {kernel!r}")


def laplacian(volume: np.ndarray) -> np.ndarray:
    return _second(volume, 0) + _second(volume, 1) + _second(volume, 2)


# ---------------------------------------------------------------------------
# spherical derivative stencils


@dataclass(frozen=True)
class SphericalDerivativeStencil:
    """One spherical derivative component d^J_q as complex kernel weights."""

    J: int
    q: int
    terms: tuple[tuple[str, complex], ...]

    def apply(self, volume: np.ndarray) -> np.ndarray:
        out = np.zeros(volume.shape, dtype=complex)
        for name, w in self.terms:
            out += w * fd_apply(name, volume)
        return out


_SQ32 = np.sqrt(1.5)
_SQ38 = np.sqrt(3.0 / 8.0)

_D1_TERMS = {
    -1: (("dx", 1 / np.sqrt(2)), ("dy", 1j / np.sqrt(2))),
    0: (("dz", 1.0 + 0j),),
    +1: (("dx", -1 / np.sqrt(2)), ("dy", 1j / np.sqrt(2))),
}
_D2_TERMS = {
    -2: (("dxx", _SQ38), ("dyy", -_SQ38), ("dxy", 2j * _SQ38)),
    -1: (("dxz", _SQ32), ("dyz", 1j * _SQ32)),
    0: (("dzz", 1.0 + 0j), ("dxx", -0.5), ("dyy", -0.5)),
    +1: (("dxz", -_SQ32), ("dyz", 1j * _SQ32)),
    +2: (("dxx", _SQ38), ("dyy", -_SQ38), ("dxy", -2j * _SQ38)),
}


def sph_deriv_stencil(J: int, q: int) -> SphericalDerivativeStencil:
    """Spherical derivative d^J_q for J in {1, 2}, |q| <= J."""
    table = {1: _D1_TERMS, 2: _D2_TERMS}[J]
    return SphericalDerivativeStencil(J, q, tuple((k, complex(w)) for k, w in table[q]))


# ---------------------------------------------------------------------------
# Z-blocks


@dataclass(frozen=True)
class ZBlockCoefficients:
    """Sparse weight table of the order-J block coupling SH ranks j <- jp.

    weights maps (n, np, q) with n = np + q to the scalar multiplying
    d^J_q f^jp_np; at most 2J+1 entries per outgoing n.
    """

    J: int
    j: int
    jp: int
    weights: tuple[tuple[int, int, int, float], ...]


@lru_cache(maxsize=None)
def z_block(J: int, j: int, jp: int) -> ZBlockCoefficients:
    if abs(j - jp) > J:
        raise ValueError(f"triangle violation: |{j}-{jp}| > {J}")
    par = cg(j, 0, jp, 0, J, 0)
    entries = []
    if par != 0.0:
        for npr in range(-jp, jp + 1):
            for q in range(-J, J + 1):
                n = npr + q
                if abs(n) > j:
                    continue
                c = cg(j, n, jp, npr, J, q)
                if c != 0.0:
                    entries.append((n, npr, q, (2 * jp + 1) / (2 * j + 1) * c * par))
    return ZBlockCoefficients(J, j, jp, tuple(entries))


# ---------------------------------------------------------------------------
# coefficient operators as per-kernel sparse matrices


@dataclass
class CoefficientOperator:
    """Linear operator on a channel stack: sum_k W_k @ stencil_k(f)."""

    n_out: int
    n_in: int
    matrices: dict  # kernel name -> scipy sparse (n_out, n_in)

    def apply_array(self, coeffs: np.ndarray) -> np.ndarray:
        shape = coeffs.shape[1:]
        out = np.zeros((self.n_out, *shape), dtype=complex)
        flat_out = out.reshape(self.n_out, -1)
        for name, W in self.matrices.items():
            vol = fd_apply(name, coeffs) if name != "id" else coeffs
            flat_out += W @ vol.reshape(self.n_in, -1)
        return out

    def __add__(self, other: "CoefficientOperator") -> "CoefficientOperator":
        if (self.n_out, self.n_in) != (other.n_out, other.n_in):
            raise ValueError("operator shape mismatch")
        mats = dict(self.matrices)
        for k, W in other.matrices.items():
            mats[k] = mats[k] + W if k in mats else W
        return CoefficientOperator(self.n_out, self.n_in, mats)

    def __mul__(self, scalar: float) -> "CoefficientOperator":
        return CoefficientOperator(
            self.n_out, self.n_in, {k: W * scalar for k, W in self.matrices.items()}
        )

    __rmul__ = __mul__


class _MatrixBuilder:
    def __init__(self, out_ch, in_ch):
        self.out_idx = {c: i for i, c in enumerate(out_ch)}
        self.in_idx = {c: i for i, c in enumerate(in_ch)}
        self.triplets: dict[str, list] = {}

    def add(self, out_key, in_key, weight, stencil_terms=(("id", 1.0 + 0j),)):
        i = self.out_idx[out_key]
        k = self.in_idx[in_key]
        for name, w in stencil_terms:
            self.triplets.setdefault(name, []).append((i, k, weight * w))

    def build(self):
        n_out, n_in = len(self.out_idx), len(self.in_idx)
        mats = {}
        for name, trip in self.triplets.items():
            rows = [t[0] for t in trip]
            cols = [t[1] for t in trip]
            vals = [t[2] for t in trip]
            mats[name] = sp.csr_matrix(
                sp.coo_matrix((vals, (rows, cols)), shape=(n_out, n_in), dtype=complex)
            )
        return CoefficientOperator(n_out, n_in, mats)


# -- Wigner-field operators --------------------------------------------------


@lru_cache(maxsize=None)
def _op_Jz(L: int) -> CoefficientOperator:
    ch = wig_channels(L)
    b = _MatrixBuilder(ch, ch)
    for j, n, m in ch:
        if m != 0:
            b.add((j, n, m), (j, n, m), 1j * m)
    return b.build()


@lru_cache(maxsize=None)
def _op_Jpm(L: int, sign: int) -> CoefficientOperator:
    ch = wig_channels(L)
    b = _MatrixBuilder(ch, ch)
    for j, n, m in ch:
        ms = m + sign
        if abs(ms) <= j:
            b.add((j, n, m), (j, n, ms), -1j * np.sqrt(j * (j + 1) / 2 - m * ms / 2))
    return b.build()


@lru_cache(maxsize=None)
def _op_Jsq(L: int, kind: str) -> CoefficientOperator:
    ch = wig_channels(L) if kind == "wigner" else sph_channels(L, "all")
    b = _MatrixBuilder(ch, ch)
    for c in ch:
        j = c[0]
        if j:
            b.add(c, c, -float(j * (j + 1)))
    return b.build()


@lru_cache(maxsize=None)
def _op_Tk(L: int, k: int) -> CoefficientOperator:
    ch = wig_channels(L)
    b = _MatrixBuilder(ch, ch)
    for j, n, m in ch:
        mp = m - k
        for jp in (j - 1, j, j + 1):
            if jp < 0 or jp > L or abs(mp) > jp:
                continue
            cm = cg(j, m, jp, mp, 1, k)
            if cm == 0.0:
                continue
            for q in (-1, 0, 1):
                npr = n - q
                if abs(npr) > jp:
                    continue
                cn = cg(j, n, jp, npr, 1, q)
                if cn == 0.0:
                    continue
                w = (2 * jp + 1) / (2 * j + 1) * cn * cm
                b.add((j, n, m), (jp, npr, mp), w, sph_deriv_stencil(1, q).terms)
    return b.build()


@lru_cache(maxsize=None)
def _op_TT(L: int, kp: int, k: int) -> CoefficientOperator:
    """conj(T_kp) T_k.  Trace part Delta/3 delta_{kp,k} plus the rank-2 part
    with weight (-1)^kp sqrt(2/3) <2 P | 1 -kp, 1 k>, P = k - kp."""
    ch = wig_channels(L)
    b = _MatrixBuilder(ch, ch)
    P = k - kp
    front = (-1) ** kp * np.sqrt(2.0 / 3.0) * cg(2, P, 1, -kp, 1, k)
    third = 1.0 / 3.0
    for j, n, m in ch:
        if kp == k:
            for ker in ("dxx", "dyy", "dzz"):
                b.add((j, n, m), (j, n, m), third, ((ker, 1.0 + 0j),))
        if front == 0.0:
            continue
        mp = m - P
        for jp in range(max(0, j - 2), min(L, j + 2) + 1):
            if abs(mp) > jp:
                continue
            cm = cg(j, m, jp, mp, 2, P)
            if cm == 0.0:
                continue
            for q in (-2, -1, 0, 1, 2):
                npr = n - q
                if abs(npr) > jp:
                    continue
                cn = cg(j, n, jp, npr, 2, q)
                if cn == 0.0:
                    continue
                w = front * (2 * jp + 1) / (2 * j + 1) * cn * cm
                b.add((j, n, m), (jp, npr, mp), w, sph_deriv_stencil(2, q).terms)
    return b.build()


@lru_cache(maxsize=None)
def _op_mixed_TJ(L: int, variant: str, sign: int) -> CoefficientOperator:
    """Appendix-style mixed quadratic terms; variant 'TJ' is T_{-s} J_{+s},
    variant 'JT' is J_{+s} T_{-s} (s = sign).  Input channels sit at m + 2s."""
    ch = wig_channels(L)
    b = _MatrixBuilder(ch, ch)
    s = sign
    for j, n, m in ch:
        msrc = m + 2 * s
        if variant == "JT":
            lad_out = j * (j + 1) / 2 - m * (m + s) / 2
            if lad_out < 0:
                continue
        for jp in (j - 1, j, j + 1):
            if jp < 0 or jp > L or abs(msrc) > jp:
                continue
            if variant == "TJ":
                lad = jp * (jp + 1) / 2 - (m + s) * (m + 2 * s) / 2
                if lad < 0:
                    continue
                cm = cg(j, m, jp, m + s, 1, -s)
                pref = -1j * np.sqrt(lad)
            else:
                cm = cg(j, m + s, jp, m + 2 * s, 1, -s)
                pref = -1j * np.sqrt(lad_out)
            if cm == 0.0:
                continue
            for q in (-1, 0, 1):
                npr = n - q
                if abs(npr) > jp:
                    continue
                cn = cg(j, n, jp, npr, 1, q)
                if cn == 0.0:
                    continue
                w = pref * (2 * jp + 1) / (2 * j + 1) * cn * cm
                b.add((j, n, m), (jp, npr, msrc), w, sph_deriv_stencil(1, q).terms)
    return b.build()


# -- S2 (spherical-field) operators -----------------------------------------


@lru_cache(maxsize=None)
def _op_T0_s2(L: int) -> CoefficientOperator:
    ch = sph_channels(L, "all")
    b = _MatrixBuilder(ch, ch)
    for j, n in ch:
        for jp in (j - 1, j + 1):
            if jp < 0 or jp > L:
                continue
            blk = z_block(1, j, jp)
            for nn, npr, q, w in blk.weights:
                if nn == n:
                    b.add((j, n), (jp, npr), w, sph_deriv_stencil(1, q).terms)
    return b.build()


def _op_tz2_like(L: int, lap_w: float, blk_sign: float, a=None) -> CoefficientOperator:
    """Shared assembly for T_z^2, T_x^2+T_y^2 and their convolution-wrapped
    variants: lap_w * Delta/3 per channel (scaled by a1) + blk_sign * 2/3 of the
    three order-2 Z-blocks (scaled by a2, a3, a4)."""
    ch = sph_channels(L, "all")
    b = _MatrixBuilder(ch, ch)
    a1 = a["a1"] if a else None
    for j, n in ch:
        w_lap = lap_w / 3.0 * (a1[j] if a else 1.0)
        for ker in ("dxx", "dyy", "dzz"):
            b.add((j, n), (j, n), w_lap, ((ker, 1.0 + 0j),))
        for jp, akey in ((j + 2, "a2"), (j, "a3"), (j - 2, "a4")):
            if jp < 0 or jp > L:
                continue
            scale = blk_sign * 2.0 / 3.0 * (a[akey][j] if a else 1.0)
            blk = z_block(2, j, jp)
            for nn, npr, q, w in blk.weights:
                if nn == n:
                    b.add((j, n), (jp, npr), scale * w, sph_deriv_stencil(2, q).terms)
    return b.build()


@lru_cache(maxsize=None)
def _op_Tz2_s2(L: int) -> CoefficientOperator:
    return _op_tz2_like(L, 1.0, +1.0)


@lru_cache(maxsize=None)
def _op_Txy2_s2(L: int) -> CoefficientOperator:
    return _op_tz2_like(L, 2.0, -1.0)


@lru_cache(maxsize=None)
def _op_laplace(L: int, kind: str) -> CoefficientOperator:
    ch = wig_channels(L) if kind == "wigner" else sph_channels(L, "all")
    b = _MatrixBuilder(ch, ch)
    for c in ch:
        for ker in ("dxx", "dyy", "dzz"):
            b.add(c, c, 1.0, ((ker, 1.0 + 0j),))
    return b.build()


def _conv_factors(L: int, c: np.ndarray, variant: str) -> dict:
    c = np.asarray(c, dtype=complex)
    need = L + 2 if variant == "CTC" else L + 1
    if c.shape[0] < need + 1:
        raise ValueError(f"convolution coefficients must cover j <= {need}")

    def at(j):
        return c[j] if 0 <= j < c.shape[0] else 0.0

    a1 = np.zeros(L + 1)
    a2 = np.zeros(L + 1)
    a3 = np.zeros(L + 1)
    a4 = np.zeros(L + 1)
    for j in range(L + 1):
        if variant == "CTC":
            a1[j] = a3[j] = abs(at(j)) ** 2
            a2[j] = (np.conj(at(j)) * at(j + 2)).real
            a4[j] = (np.conj(at(j)) * at(j - 2)).real if j >= 2 else 0.0
        else:
            raise ValueError(f"no closed-form factors for variant {variant!r}")
    return {"a1": a1, "a2": a2, "a3": a3, "a4": a4}


# ---------------------------------------------------------------------------
# public apply wrappers


def _wrap_sph(fld: SphericalField, op: CoefficientOperator) -> SphericalField:
    full = fld.to_parity_all() if fld.parity != "all" else fld
    out = op.apply_array(full.coeffs)
    return SphericalField(fld.grid, fld.L, out, "all")


def apply_Jz(fld: WignerField) -> WignerField:
    """(Jz f)^j_{nm} = i m f^j_{nm}."""
    return WignerField(fld.grid, fld.L, _op_Jz(fld.L).apply_array(fld.coeffs))


def apply_Jpm(fld: WignerField, sign: int) -> WignerField:
    """(J_{+-1} f)^j_{nm} = -i sqrt(j(j+1)/2 - m(m+-1)/2) f^j_{n,m+-1}."""
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    return WignerField(fld.grid, fld.L, _op_Jpm(fld.L, sign).apply_array(fld.coeffs))


def apply_J_squared(fld):
    """(J^2 f)^j = -j(j+1) f^j on either field kind."""
    if isinstance(fld, WignerField):
        return WignerField(fld.grid, fld.L, _op_Jsq(fld.L, "wigner").apply_array(fld.coeffs))
    return _wrap_sph(fld, _op_Jsq(fld.L, "sph"))


def apply_Tk(fld: WignerField, k: int) -> WignerField:
    """Translation generator component T_k on a Wigner field."""
    if k not in (-1, 0, 1):
        raise ValueError("k must be in {-1, 0, 1}")
    return WignerField(fld.grid, fld.L, _op_Tk(fld.L, k).apply_array(fld.coeffs))


def apply_TT(fld: WignerField, kp: int, k: int) -> WignerField:
    """conj(T_kp) T_k on a Wigner field."""
    return WignerField(fld.grid, fld.L, _op_TT(fld.L, kp, k).apply_array(fld.coeffs))


def apply_mixed_TJ(fld: WignerField, variant: str, sign: int) -> WignerField:
    """Mixed quadratic terms: variant 'TJ' = T_{-s} J_{+s}, 'JT' = J_{+s} T_{-s}."""
    if variant not in ("TJ", "JT") or sign not in (-1, 1):
        raise ValueError("variant must be 'TJ' or 'JT', sign +-1")
    return WignerField(
        fld.grid, fld.L, _op_mixed_TJ(fld.L, variant, sign).apply_array(fld.coeffs)
    )


def apply_T0_s2(fld: SphericalField) -> SphericalField:
    """T_0 on an S2 field via the two order-1 Z-blocks (parity flips; the
    returned container uses the full channel layout)."""
    return _wrap_sph(fld, _op_T0_s2(fld.L))


def apply_Tz2_s2(fld: SphericalField) -> SphericalField:
    """T_z^2: Delta/3 plus 2/3 of the three order-2 Z-blocks."""
    return _wrap_sph(fld, _op_Tz2_s2(fld.L))


def apply_Txy2_s2(fld: SphericalField) -> SphericalField:
    """T_x^2 + T_y^2: 2 Delta/3 minus 2/3 of the three order-2 Z-blocks."""
    return _wrap_sph(fld, _op_Txy2_s2(fld.L))


def apply_convolved_quadratic(fld: SphericalField, c, variant: str) -> SphericalField:
    """Convolution-wrapped quadratic forms.

    variant 'CTC'  : C^T T_z^2 C with a1 = a3 = |c_j|^2, a2 = conj(c_j) c_{j+2},
                     a4 = conj(c_j) c_{j-2} (closed form, exact).
    variant 'TCCT' : T_0 C^T C T_0, applied as the operator composition
                     T_0 . diag(|c_j|^2) . T_0 (adjoint-consistent).
    """
    if variant == "CTC":
        op = _op_tz2_like(fld.L, 1.0, +1.0, _conv_factors(fld.L, c, "CTC"))
        return _wrap_sph(fld, op)
    if variant == "TCCT":
        c = np.asarray(c, dtype=complex)
        if c.shape[0] < fld.L + 2:
            raise ValueError(f"convolution coefficients must cover j <= {fld.L + 1}")
        mid = apply_T0_s2(fld)
        for j, n in mid.channels:
            mid.coeffs[mid.index(j, n)] *= abs(c[j]) ** 2
        return apply_T0_s2(mid)
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# generator assembly


@dataclass
class GeneratorSpec:
    """Weighted sum of named left-invariant operators.

    Known names (S2 fields): T0, T0_sq, Txy_sq, Laplace, Jsq, CT0sqC, T0CCT0.
    The convolution-wrapped names require `conv`, the kernel coefficients c_j.
    """

    terms: list = dc_field(default_factory=list)  # [(name, weight), ...]
    conv: np.ndarray | None = None


class Generator:
    """Callable evolution generator; single-pass parts are merged into one
    coefficient operator, composition-based parts are applied separately."""

    def __init__(self, merged: CoefficientOperator | None, extra):
        self._merged = merged
        self._extra = extra  # [(weight, callable), ...]

    def __call__(self, fld: SphericalField) -> SphericalField:
        parts = []
        if self._merged is not None:
            parts.append(_wrap_sph(fld, self._merged))
        for w, fn in self._extra:
            r = fn(fld)
            r.coeffs *= w
            parts.append(r)
        if not parts:
            out = fld.to_parity_all()
            out.coeffs[:] = 0.0
            return out
        acc = parts[0]
        for p in parts[1:]:
            acc.coeffs += p.coeffs
        return acc


def build_generator(spec: GeneratorSpec, L: int) -> Generator:
    """Assemble an S2 generator from a GeneratorSpec."""
    single = {
        "T0": lambda: _op_T0_s2(L),
        "T0_sq": lambda: _op_Tz2_s2(L),
        "Txy_sq": lambda: _op_Txy2_s2(L),
        "Laplace": lambda: _op_laplace(L, "sph"),
        "Jsq": lambda: _op_Jsq(L, "sph"),
    }
    merged = None
    extra = []
    for name, w in spec.terms:
        w = float(w)
        if not np.isfinite(w):
            raise ValueError(f"non-finite weight for {name}")
        if name in single:
            op = single[name]() * w
            merged = op if merged is None else merged + op
        elif name == "CT0sqC":
            if spec.conv is None:
                raise ValueError("CT0sqC requires convolution coefficients")
            op = _op_tz2_like(L, 1.0, +1.0, _conv_factors(L, spec.conv, "CTC")) * w
            merged = op if merged is None else merged + op
        elif name == "T0CCT0":
            if spec.conv is None:
                raise ValueError("T0CCT0 requires convolution coefficients")
            conv = np.asarray(spec.conv, dtype=complex)
            extra.append((w, lambda f, c=conv: apply_convolved_quadratic(f, c, "TCCT")))
        else:
            raise ValueError(f"unknown operator name {name!r}")
    return Generator(merged, extra)
