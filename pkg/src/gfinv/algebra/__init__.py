"""Exact arithmetic foundation: rationals, polynomials, closed forms."""

from .closedform import (
    ClosedForm,
    ExtendedMass,
    INFINITE_MASS,
    AlgebraError,
    InvalidDenominator,
    UnknownSign,
    ZERO,
    ONE,
    const,
    equal,
    find_negative_coefficient,
    from_poly,
    has_parameters,
    instantiate,
    mass,
    normalize,
    series_expand,
    shape_nonneg,
    var,
)
from .cyclotomic import CyclotomicElement, cyclotomic_poly, euler_phi
from .gfexpr import (
    GfSyntaxError,
    format_closed_form,
    format_monomial,
    format_poly,
    indet_symbol,
    parse_closed_form,
    parse_closed_form_with_params,
)
from .poly import (
    MONO_ONE,
    Mono,
    NotDivisible,
    Polynomial,
    mono_degree,
    mono_degree_in,
    mono_key,
    mono_mul,
    poly_div_exact,
    poly_gcd,
)

__all__ = [name for name in dir() if not name.startswith("_")]
