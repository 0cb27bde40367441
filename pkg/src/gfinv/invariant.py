"""Verification of occupation invariants and the exact-posterior proof rule.

A candidate measure I is an occupation superinvariant of a loop w.r.t. an
initial measure g when Phi(I) <= I for the loop's characteristic functional
Phi(I) = g + body([guard]*I); equality makes it an invariant.  A finite-mass
superinvariant whose guard-violating restriction has the same mass as g
certifies the exact posterior (and positive almost-sure termination).

Verdicts are three-valued: Refuted only ever comes from an exact series
witness, never from a failed heuristic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .algebra import (
    ClosedForm,
    ExtendedMass,
    UnknownSign,
    equal,
    find_negative_coefficient,
    mass,
    shape_nonneg,
)
from . import program as P
from .semantics import char_functional, restrict_guard

DEFAULT_REFUTE_DEGREE = 25


class Verdict(enum.Enum):
    EXACT = "exact"
    SUPER = "super"
    UNKNOWN = "unknown"
    REFUTED = "refuted"


class CertificateKind(enum.Enum):
    EXACT_INVARIANT = "ExactInvariant"
    SUPERINVARIANT = "Superinvariant"
    EXACT_POSTERIOR = "ExactPosterior"
    PAST_WITNESS = "PastWitness"
    UPPER_BOUND_ONLY = "UpperBoundOnly"


@dataclass(frozen=True)
class Certificate:
    kind: CertificateKind
    loop: P.While
    initial: ClosedForm
    invariant: ClosedForm
    verdict: Verdict
    posterior: Optional[ClosedForm]
    mass_invariant: Optional[ExtendedMass]
    mass_initial: Optional[Fraction]
    mass_posterior: Optional[Fraction]
    ert_upper_bound: Optional[ExtendedMass]
    past: bool

    @property
    def is_full(self) -> bool:
        return self.kind == CertificateKind.EXACT_POSTERIOR


def verify(loop: P.While, g: ClosedForm, candidate: ClosedForm,
           refute_degree: int = DEFAULT_REFUTE_DEGREE) -> Verdict:
    """Classify a fully instantiated candidate against the fixed point equation.

    Exact when Phi(I) = I as rational functions; Super when the difference
    I - Phi(I) passes the nonnegativity shape check; Refuted when some series
    coefficient of the difference up to refute_degree is negative; otherwise
    Unknown.
    """
    phi = char_functional(loop, g, candidate)
    if equal(phi, candidate):
        return Verdict.EXACT
    diff = candidate - phi
    if shape_nonneg(diff):
        return Verdict.SUPER
    if find_negative_coefficient(diff, refute_degree) is not None:
        return Verdict.REFUTED
    return Verdict.UNKNOWN


def posterior_upper_bound(loop: P.While, invariant: ClosedForm) -> ClosedForm:
    """[not guard] * I: an upper bound on the loop's posterior measure."""
    return invariant - restrict_guard(invariant, loop.guard)


def ert_upper_bound(invariant: ClosedForm) -> ExtendedMass:
    """|I| bounds the expected number of guard evaluations (equals it for
    exact invariants)."""
    return mass(invariant)


def exact_posterior(loop: P.While, g: ClosedForm, invariant: ClosedForm,
                    verdict: Verdict) -> Certificate:
    """Build the strongest certificate the mass checks support.

    Requires a prior verify() verdict of EXACT or SUPER.  The exact-posterior
    rule needs |I| finite and |[not guard]*I| = |g|; a finite-mass mismatch
    still witnesses PAST, and infinite mass leaves an upper bound only.
    """
    if verdict not in (Verdict.EXACT, Verdict.SUPER):
        raise ValueError("exact_posterior needs a verified (super)invariant")
    bound = posterior_upper_bound(loop, invariant)
    mass_i = mass(invariant)        # may raise UnknownSign: caller maps to Unknown
    mass_g_ext = mass(g)
    if not mass_g_ext.finite:
        raise UnknownSign("initial measure has infinite mass")
    mass_g = mass_g_ext.value
    if mass_i.finite:
        mass_b = mass(bound)
        if mass_b.finite and mass_b.value == mass_g:
            return Certificate(
                kind=CertificateKind.EXACT_POSTERIOR,
                loop=loop, initial=g, invariant=invariant, verdict=verdict,
                posterior=bound, mass_invariant=mass_i, mass_initial=mass_g,
                mass_posterior=mass_b.value, ert_upper_bound=mass_i, past=True)
        return Certificate(
            kind=CertificateKind.PAST_WITNESS,
            loop=loop, initial=g, invariant=invariant, verdict=verdict,
            posterior=None, mass_invariant=mass_i, mass_initial=mass_g,
            mass_posterior=mass_b.value if mass_b.finite else None,
            ert_upper_bound=mass_i, past=True)
    return Certificate(
        kind=CertificateKind.UPPER_BOUND_ONLY,
        loop=loop, initial=g, invariant=invariant, verdict=verdict,
        posterior=bound, mass_invariant=mass_i, mass_initial=mass_g,
        mass_posterior=None, ert_upper_bound=mass_i, past=False)


def certify(loop: P.While, g: ClosedForm, candidate: ClosedForm,
            refute_degree: int = DEFAULT_REFUTE_DEGREE):
    """verify + exact_posterior in one step.

    Returns (verdict, certificate-or-None).  A candidate that fails the
    nonnegativity shape check is never certified (Unknown), and UnknownSign
    from mass evaluation downgrades to a plain invariant certificate rather
    than a false posterior claim.
    """
    if not shape_nonneg(candidate):
        neg = find_negative_coefficient(candidate, refute_degree)
        return (Verdict.REFUTED if neg is not None else Verdict.UNKNOWN), None
    verdict = verify(loop, g, candidate, refute_degree)
    if verdict not in (Verdict.EXACT, Verdict.SUPER):
        return verdict, None
    try:
        cert = exact_posterior(loop, g, candidate, verdict)
    except UnknownSign:
        kind = (CertificateKind.EXACT_INVARIANT if verdict == Verdict.EXACT
                else CertificateKind.SUPERINVARIANT)
        cert = Certificate(kind=kind, loop=loop, initial=g, invariant=candidate,
                           verdict=verdict, posterior=None, mass_invariant=None,
                           mass_initial=None, mass_posterior=None,
                           ert_upper_bound=None, past=False)
    return verdict, cert
