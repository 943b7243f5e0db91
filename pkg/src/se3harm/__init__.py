"""Harmonic-space convection/diffusion on R^3 x S2 and SE(3)."""

from .fields import (
    DirectionSet,
    GridSpec,
    SphericalField,
    WignerField,
    evaluate_on_directions,
    pack_real_even,
    project_to_sh,
    read_shv,
    rotate_coeffs,
    unpack_real_even,
    write_shv,
)
from .harmonic import (
    EulerZYZ,
    S_MATRIX,
    cg,
    legendre_eval,
    sh_eval,
    so3_quadrature,
    solid_harmonic_eval,
    triple_product_integral,
    wigner_D,
    wigner_small_d,
)
from .operators import GeneratorSpec, build_generator

__version__ = "0.1.0"
