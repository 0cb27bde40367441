"""Forward measure semantics of loop-free statements on rational closed forms.

Implements the four primitive series operations (restriction, downward shift,
substitution, formal derivative) on closed forms, guard restriction including
roots-of-unity filters for modulo guards, the statement transformer, and the
loop characteristic functional  Phi(I) = g + transform(body, [guard] * I).

Forms may contain template parameters ($-prefixed indeterminates); in that
case convergence checks for marginalization are deferred, and certification
always re-runs concretely on instantiated candidates.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

from .algebra import (
    ClosedForm,
    CyclotomicElement,
    InvalidDenominator,
    Polynomial,
    ZERO,
    from_poly,
    has_parameters,
    normalize,
)
from .algebra.poly import mono_degree_in
from . import program as P


class SemanticsError(Exception):
    pass


class DivergentMarginalization(SemanticsError):
    """Substituting 1 for the variable does not converge (or cannot be
    certified to converge by the denominator-shape criterion)."""


class ConstantTermNonzero(SemanticsError):
    """Substitution target has a nonzero constant term and is not 1."""


class NestedLoop(SemanticsError):
    pass


class UnsupportedModFilter(SemanticsError):
    pass


# -- distribution PGFs ---------------------------------------------------------

def dist_pgf(d: P.DistExpr, var: str) -> ClosedForm:
    """Probability generating function of the distribution, in indeterminate var."""
    t = Polynomial.var(var)
    one = Polynomial.const(1)
    if isinstance(d, P.Bernoulli):
        return from_poly(one * (1 - d.p) + t * d.p)
    if isinstance(d, P.Geometric):
        return normalize(Polynomial.const(d.p), one - t * (1 - d.p))
    if isinstance(d, P.UniformRange):
        width = d.hi - d.lo + 1
        acc = Polynomial.zero()
        for k in range(d.lo, d.hi + 1):
            acc = acc + Polynomial.var(var, k) if k else acc + one
        return normalize(acc, Polynomial.const(width))
    if isinstance(d, P.Dirac):
        return from_poly(Polynomial.var(var, d.value) if d.value else one)
    if isinstance(d, P.RawPgf):
        f = d.form
        return ClosedForm(_rename(f.num, "t", var), _rename(f.den, "t", var))
    raise TypeError(f"unknown distribution {d!r}")


def _rename(p: Polynomial, old: str, new: str) -> Polynomial:
    out = {}
    for m, c in p.terms.items():
        mm = tuple(sorted((new if v == old else v, e) for v, e in m))
        out[mm] = c
    return Polynomial(out)


# -- primitive closed-form operations -------------------------------------------

def restrict(f: ClosedForm, var: str, bound: int) -> ClosedForm:
    """Closed form of the terms with exponent of var strictly below bound.

    Taylor sections in var: with num = sum N_i v^i and den = sum D_j v^j the
    series coefficients are A_i = B_i / D_0^(i+1) where
    B_i = N_i*D_0^i - sum_{j>=1} D_j*B_{i-j}*D_0^(j-1).
    """
    if bound <= 0:
        return ZERO
    if f.num.degree_in(var) == 0 and f.den.degree_in(var) == 0:
        return f
    num_by = _univar(f.num, var)
    den_by = _univar(f.den, var)
    d0 = den_by[0]
    b: list = []
    for i in range(bound):
        acc = (num_by[i] if i < len(num_by) else Polynomial.zero()) * d0 ** i
        for j in range(1, min(i, len(den_by) - 1) + 1):
            dj = den_by[j]
            if dj.is_zero():
                continue
            acc = acc - dj * b[i - j] * d0 ** (j - 1)
        b.append(acc)
    num_out = Polynomial.zero()
    for i in range(bound):
        if b[i].is_zero():
            continue
        term = b[i] * d0 ** (bound - 1 - i)
        num_out = num_out + term * Polynomial.var(var, i) if i else num_out + term
    return normalize(num_out, d0 ** bound)


def _univar(p: Polynomial, var: str) -> list:
    deg = p.degree_in(var)
    out = [dict() for _ in range(deg + 1)]
    for m, c in p.terms.items():
        e = mono_degree_in(m, var)
        rest = tuple(pair for pair in m if pair[0] != var)
        out[e][rest] = out[e].get(rest, 0) + c
    return [Polynomial(d) for d in out]


def shift_down(f: ClosedForm, var: str) -> ClosedForm:
    """f * var^{-1} for f with zero constant section in var.

    The reduced numerator is exactly divisible by var because the denominator
    constant term is invertible.
    """
    out = {}
    for m, c in f.num.terms.items():
        e = mono_degree_in(m, var)
        if e == 0:
            raise SemanticsError(f"shift_down: numerator not divisible by {var}")
        rest = [(v, x) for v, x in m if v != var]
        if e > 1:
            rest.append((var, e - 1))
        out[tuple(sorted(rest))] = c
    return normalize(Polynomial(out), f.den)


def marginalize(f: ClosedForm, var: str) -> ClosedForm:
    """Substitute 1 for var (sum the series over that variable).

    Sound when the denominator either does not involve var, or has geometric
    shape with positive constant term after the substitution; raises
    DivergentMarginalization otherwise.  Parametric forms substitute formally
    and are re-checked at instantiation time.
    """
    if f.den.degree_in(var) == 0:
        if f.num.degree_in(var) == 0:
            return f
        return normalize(f.num.subs_one(var), f.den)
    if not has_parameters(f):
        c0 = f.den.constant_term()
        shape_ok = c0 > 0 and all(
            c <= 0 for m, c in f.den.terms.items() if m != ()
        )
        if not shape_ok:
            raise DivergentMarginalization(
                f"cannot certify convergence of substituting 1 for {var}")
        den1 = f.den.subs_one(var)
        if den1.constant_term() <= 0:
            raise DivergentMarginalization(
                f"series diverges when summing over {var}")
        return normalize(f.num.subs_one(var), den1)
    return normalize(f.num.subs_one(var), f.den.subs_one(var))


def substitute(f: ClosedForm, var: str, h: ClosedForm) -> ClosedForm:
    """Closed form of f[X_var / h].

    Requires h to have zero constant term (or be the constant 1, which is
    marginalization).  Per-power denominator clearing keeps everything
    polynomial.
    """
    if h.num == Polynomial.const(1) and h.den == Polynomial.const(1):
        return marginalize(f, var)
    if _constant_section(h.num):
        raise ConstantTermNonzero(
            "substitution target must have zero constant term (or be 1)")
    num_hat, deg_n = _subst_poly(f.num, var, h)
    den_hat, deg_d = _subst_poly(f.den, var, h)
    return normalize(num_hat * h.den ** deg_d, den_hat * h.den ** deg_n)


def _constant_section(num: Polynomial) -> bool:
    """True when the numerator has a term free of program indeterminates."""
    return any(all(v.startswith("$") for v, _ in m) for m in num.terms)


def _subst_poly(p: Polynomial, var: str, h: ClosedForm):
    """p[var/h] cleared to (polynomial, degree): result = poly / h.den^degree."""
    layers = _univar(p, var)
    deg = len(layers) - 1
    acc = Polynomial.zero()
    for i, layer in enumerate(layers):
        if layer.is_zero():
            continue
        acc = acc + layer * h.num ** i * h.den ** (deg - i)
    return acc, deg


def formal_derivative(f: ClosedForm, var: str) -> ClosedForm:
    num = f.num.derivative(var) * f.den - f.num * f.den.derivative(var)
    return normalize(num, f.den * f.den)


# -- guard restriction -----------------------------------------------------------

def restrict_guard(f: ClosedForm, g: P.Guard) -> ClosedForm:
    """Closed form of [g] * f."""
    if isinstance(g, P.Lt):
        return restrict(f, g.var, g.bound)
    if isinstance(g, P.Geq):
        return f - restrict(f, g.var, g.bound)
    if isinstance(g, P.Eq):
        return restrict(f, g.var, g.value + 1) - restrict(f, g.var, g.value)
    if isinstance(g, P.Neq):
        return f - restrict_guard(f, P.Eq(g.var, g.value))
    if isinstance(g, P.ModEq):
        return mod_filter(f, g.var, g.residue, g.modulus)
    if isinstance(g, P.And):
        return restrict_guard(restrict_guard(f, g.left), g.right)
    if isinstance(g, P.Or):
        both = restrict_guard(restrict_guard(f, g.left), g.right)
        return restrict_guard(f, g.left) + restrict_guard(f, g.right) - both
    if isinstance(g, P.Not):
        return f - restrict_guard(f, g.inner)
    raise TypeError(f"unknown guard {g!r}")


def mod_filter(f: ClosedForm, var: str, residue: int, modulus: int) -> ClosedForm:
    """[var = residue mod modulus] * f by the roots-of-unity filter:
    (1/d) * sum_j zeta^(-rj) * f[X_var -> zeta^j X_var], computed in Q(zeta_d);
    the imaginary parts cancel exactly and the result is rational.
    """
    d = modulus
    if f.num.degree_in(var) == 0 and f.den.degree_in(var) == 0:
        return f if residue % d == 0 else ZERO
    nums = []
    dens = []
    for j in range(d):
        zj = CyclotomicElement.zeta(d, j)
        nums.append(_scale_var_cyclo(f.num, var, zj, d))
        dens.append(_scale_var_cyclo(f.den, var, zj, d))
    total_num = Polynomial.zero()
    for j in range(d):
        w = CyclotomicElement.zeta(d, (-residue * j) % d)
        term = nums[j].map_coeffs(lambda c, w=w: w * c)
        for k in range(d):
            if k != j:
                term = term * dens[k]
        total_num = total_num + term
    total_den = Polynomial.const(1)
    for k in range(d):
        total_den = total_den * dens[k]
    num_q = _to_rational_poly(total_num)
    den_q = _to_rational_poly(total_den)
    if num_q is None or den_q is None:
        raise UnsupportedModFilter("cyclotomic filter did not reduce to rationals")
    return normalize(num_q, den_q * d)


def _scale_var_cyclo(p: Polynomial, var: str, factor: CyclotomicElement, d: int) -> Polynomial:
    out = {}
    for m, c in p.terms.items():
        e = mono_degree_in(m, var) % d
        if e:
            out[m] = c * (factor ** e)
        elif isinstance(c, CyclotomicElement):
            out[m] = c
        else:
            out[m] = CyclotomicElement.from_rational(d, c)
    return Polynomial(out)


def _to_rational_poly(p: Polynomial) -> Optional[Polynomial]:
    out = {}
    for m, c in p.terms.items():
        if isinstance(c, CyclotomicElement):
            r = c.to_rational()
            if r is None:
                return None
            if r:
                out[m] = r
        else:
            out[m] = c
    return Polynomial(out)


# -- the statement transformer ----------------------------------------------------

def apply_statement(stmt: P.Statement, f: ClosedForm) -> ClosedForm:
    """Posterior closed form of a loop-free statement applied to measure f."""
    if isinstance(stmt, P.Skip):
        return f
    if isinstance(stmt, P.Diverge):
        return ZERO
    if f.is_zero():
        return ZERO
    if isinstance(stmt, P.AssignConst):
        g = marginalize(f, stmt.var)
        return g * from_poly(Polynomial.var(stmt.var, stmt.value)) if stmt.value else g
    if isinstance(stmt, P.Decrement):
        low = restrict(f, stmt.var, 1)
        high = f - low
        if high.is_zero():
            return f
        return shift_down(high, stmt.var) + low
    if isinstance(stmt, P.IidIncrement):
        pgf = dist_pgf(stmt.dist, stmt.var)
        if stmt.count is None:
            return f * pgf
        h = pgf * from_poly(Polynomial.var(stmt.count))
        return substitute(f, stmt.count, h)
    if isinstance(stmt, P.SampleAssign):
        g = marginalize(f, stmt.var)
        return g * dist_pgf(stmt.dist, stmt.var)
    if isinstance(stmt, P.Choice):
        return (apply_statement(stmt.left, f * stmt.prob)
                + apply_statement(stmt.right, f * (1 - stmt.prob)))
    if isinstance(stmt, P.Seq):
        for s in stmt.stmts:
            f = apply_statement(s, f)
        return f
    if isinstance(stmt, P.IfThenElse):
        taken = restrict_guard(f, stmt.guard)
        return (apply_statement(stmt.then, taken)
                + apply_statement(stmt.els, f - taken))
    if isinstance(stmt, P.While):
        raise NestedLoop("closed-form semantics is defined for loop-free statements only")
    raise TypeError(f"unknown statement {stmt!r}")


def char_functional(loop: P.While, g: ClosedForm, candidate: ClosedForm) -> ClosedForm:
    """Phi_{g,loop}(candidate) = g + body applied to the guard-restricted candidate."""
    if not isinstance(loop, P.While):
        raise TypeError("char_functional needs a while loop")
    return g + apply_statement(loop.body, restrict_guard(candidate, loop.guard))
