"""Ground-truth engine on finite sparse measures.

Executes loop-free statements exactly on finite maps from states to
rationals, tracks every truncated probability tail in an explicit residual,
iterates loops Kleene-style to certified lower bounds, computes exact
expected visiting times of finite Markov chains by linear solve, and
cross-checks closed forms against oracle runs.

States are tuples of naturals, one slot per declared program variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .algebra import ClosedForm, Mono, mono_key, series_expand
from . import program as P

State = Tuple[int, ...]


class OracleError(Exception):
    pass


class SingularSystem(OracleError):
    pass


class Diverges(OracleError):
    pass


@dataclass
class SparseMeasure:
    """Finite measure plus the exact mass lost to truncation."""

    entries: Dict[State, Fraction]
    residual: Fraction = Fraction(0)

    @staticmethod
    def dirac(state: State) -> "SparseMeasure":
        return SparseMeasure({tuple(state): Fraction(1)})

    @staticmethod
    def zero() -> "SparseMeasure":
        return SparseMeasure({})

    def mass(self) -> Fraction:
        return sum(self.entries.values(), Fraction(0))

    def scaled(self, c: Fraction) -> "SparseMeasure":
        if c == 0:
            return SparseMeasure({}, Fraction(0))
        return SparseMeasure({s: v * c for s, v in self.entries.items()},
                             self.residual * c)

    def plus(self, other: "SparseMeasure") -> "SparseMeasure":
        out = dict(self.entries)
        for s, v in other.entries.items():
            w = out.get(s, Fraction(0)) + v
            if w:
                out[s] = w
            else:
                out.pop(s, None)
        return SparseMeasure(out, self.residual + other.residual)

    def filtered(self, keep) -> "SparseMeasure":
        return SparseMeasure({s: v for s, v in self.entries.items() if keep(s)},
                             Fraction(0))


def eval_guard(g: P.Guard, state: State, vars: Sequence[str]) -> bool:
    idx = {v: i for i, v in enumerate(vars)}
    return _eval_guard(g, state, idx)


def _eval_guard(g: P.Guard, state: State, idx: Dict[str, int]) -> bool:
    if isinstance(g, P.Lt):
        return state[idx[g.var]] < g.bound
    if isinstance(g, P.Geq):
        return state[idx[g.var]] >= g.bound
    if isinstance(g, P.Eq):
        return state[idx[g.var]] == g.value
    if isinstance(g, P.Neq):
        return state[idx[g.var]] != g.value
    if isinstance(g, P.ModEq):
        return state[idx[g.var]] % g.modulus == g.residue
    if isinstance(g, P.And):
        return _eval_guard(g.left, state, idx) and _eval_guard(g.right, state, idx)
    if isinstance(g, P.Or):
        return _eval_guard(g.left, state, idx) or _eval_guard(g.right, state, idx)
    if isinstance(g, P.Not):
        return not _eval_guard(g.inner, state, idx)
    raise TypeError(f"unknown guard {g!r}")


# -- distribution pmfs ------------------------------------------------------------

def dist_pmf(d: P.DistExpr, cap: int) -> Tuple[List[Fraction], Fraction]:
    """(probabilities for values 0..cap, exact tail mass above cap)."""
    probs = [Fraction(0)] * (cap + 1)
    if isinstance(d, P.Bernoulli):
        if cap >= 0:
            probs[0] = 1 - d.p
        if cap >= 1:
            probs[1] = d.p
    elif isinstance(d, P.Dirac):
        if d.value <= cap:
            probs[d.value] = Fraction(1)
    elif isinstance(d, P.UniformRange):
        w = Fraction(1, d.hi - d.lo + 1)
        for k in range(d.lo, min(d.hi, cap) + 1):
            probs[k] = w
    elif isinstance(d, P.Geometric):
        q = 1 - d.p
        acc = d.p
        for k in range(cap + 1):
            probs[k] = acc
            acc *= q
    elif isinstance(d, P.RawPgf):
        coeffs = series_expand(d.form, cap)
        for m, c in coeffs.items():
            k = m[0][1] if m else 0
            probs[k] = c
    else:
        raise TypeError(f"unknown distribution {d!r}")
    tail = 1 - sum(probs)
    return probs, tail


def _effective_cap(d: P.DistExpr, count: int, cap: int) -> int:
    """Finite-support distributions stay exact; only true tails are truncated."""
    if isinstance(d, P.Dirac):
        return max(cap, d.value * count)
    if isinstance(d, P.Bernoulli):
        return max(cap, count)
    if isinstance(d, P.UniformRange):
        return max(cap, d.hi * count)
    if isinstance(d, P.RawPgf) and d.form.is_polynomial():
        return max(cap, d.form.num.total_degree() * count)
    return cap


def _convolve(a: Tuple[List[Fraction], Fraction], b: Tuple[List[Fraction], Fraction],
              cap: int) -> Tuple[List[Fraction], Fraction]:
    pa, _ = a
    pb, _ = b
    out = [Fraction(0)] * (cap + 1)
    for i, x in enumerate(pa):
        if not x:
            continue
        for j, y in enumerate(pb):
            if not y or i + j > cap:
                continue
            out[i + j] += x * y
    return out, 1 - sum(out)


def iid_sum_pmf(d: P.DistExpr, count: int, cap: int) -> Tuple[List[Fraction], Fraction]:
    """pmf of the sum of `count` iid draws, truncated at cap with exact tail."""
    if count == 0:
        unit = [Fraction(0)] * (cap + 1)
        unit[0] = Fraction(1)
        return unit, Fraction(0)
    base = dist_pmf(d, cap)
    acc = None
    power = base
    k = count
    while k:
        if k & 1:
            acc = power if acc is None else _convolve(acc, power, cap)
        k >>= 1
        if k:
            power = _convolve(power, power, cap)
    return acc


# -- exact execution ---------------------------------------------------------------

def exec_loopfree(stmt: P.Statement, m: SparseMeasure, vars: Sequence[str],
                  support_cap: int = 64) -> SparseMeasure:
    """Exact pushforward of a loop-free statement; truncation adds to residual."""
    idx = {v: i for i, v in enumerate(vars)}
    return _exec(stmt, m, idx, support_cap)


def _exec(stmt: P.Statement, m: SparseMeasure, idx: Dict[str, int],
          cap: int) -> SparseMeasure:
    if isinstance(stmt, P.Skip):
        return m
    if isinstance(stmt, P.Diverge):
        return SparseMeasure({}, m.residual)
    if isinstance(stmt, P.AssignConst):
        return _map_states(m, idx[stmt.var], lambda _: stmt.value)
    if isinstance(stmt, P.Decrement):
        return _map_states(m, idx[stmt.var], lambda x: max(x - 1, 0))
    if isinstance(stmt, P.SampleAssign):
        probs, tail = dist_pmf(stmt.dist, _effective_cap(stmt.dist, 1, cap))
        out: Dict[State, Fraction] = {}
        residual = m.residual
        i = idx[stmt.var]
        for s, v in m.entries.items():
            for k, p in enumerate(probs):
                if p:
                    t = s[:i] + (k,) + s[i + 1:]
                    out[t] = out.get(t, Fraction(0)) + v * p
            residual += v * tail
        return SparseMeasure(out, residual)
    if isinstance(stmt, P.IidIncrement):
        i = idx[stmt.var]
        out = {}
        residual = m.residual
        cache: Dict[int, Tuple[List[Fraction], Fraction]] = {}
        for s, v in m.entries.items():
            count = 1 if stmt.count is None else s[idx[stmt.count]]
            if count not in cache:
                cache[count] = iid_sum_pmf(stmt.dist, count,
                                           _effective_cap(stmt.dist, count, cap))
            probs, tail = cache[count]
            for k, p in enumerate(probs):
                if p:
                    t = s[:i] + (s[i] + k,) + s[i + 1:]
                    out[t] = out.get(t, Fraction(0)) + v * p
            residual += v * tail
        return SparseMeasure(out, residual)
    if isinstance(stmt, P.Choice):
        # scaled() splits the incoming residual p/(1-p); branch residuals add
        # back to the original plus any truncation inside the branches
        left = _exec(stmt.left, m.scaled(stmt.prob), idx, cap)
        right = _exec(stmt.right, m.scaled(1 - stmt.prob), idx, cap)
        return left.plus(right)
    if isinstance(stmt, P.Seq):
        for s in stmt.stmts:
            m = _exec(s, m, idx, cap)
        return m
    if isinstance(stmt, P.IfThenElse):
        taken = SparseMeasure(
            {s: v for s, v in m.entries.items() if _eval_guard(stmt.guard, s, idx)},
            m.residual)
        other = SparseMeasure(
            {s: v for s, v in m.entries.items() if not _eval_guard(stmt.guard, s, idx)})
        a = _exec(stmt.then, taken, idx, cap)
        b = _exec(stmt.els, other, idx, cap)
        return a.plus(b)
    if isinstance(stmt, P.While):
        raise OracleError("exec_loopfree cannot execute nested loops")
    raise TypeError(f"unknown statement {stmt!r}")


def _map_states(m: SparseMeasure, i: int, fn) -> SparseMeasure:
    out: Dict[State, Fraction] = {}
    for s, v in m.entries.items():
        t = s[:i] + (fn(s[i]),) + s[i + 1:]
        out[t] = out.get(t, Fraction(0)) + v
    return SparseMeasure(out, m.residual)


# -- Kleene iteration ----------------------------------------------------------------

@dataclass
class KleeneResult:
    occ_lower: SparseMeasure
    post_lower: SparseMeasure
    residual: Fraction


def kleene_iterate(loop: P.While, g: SparseMeasure, vars: Sequence[str],
                   steps: int, support_cap: int = 64) -> KleeneResult:
    """Certified lower bounds on the occupation measure and posterior.

    Sums the first steps+1 guarded iterates (step k applies the body k times);
    residual = truncation losses + the guard-satisfying frontier mass, which
    bounds the total mass any further iterate could still contribute.
    """
    idx = {v: i for i, v in enumerate(vars)}
    current = g
    occ = SparseMeasure.zero()
    truncated = g.residual
    for _ in range(steps + 1):
        occ = occ.plus(SparseMeasure(current.entries))
        frontier = SparseMeasure(
            {s: v for s, v in current.entries.items() if _eval_guard(loop.guard, s, idx)})
        nxt = _exec(loop.body, frontier, idx, support_cap)
        truncated += nxt.residual
        current = SparseMeasure(nxt.entries)
    post = occ.filtered(lambda s: not _eval_guard(loop.guard, s, idx))
    # mass still flowing: everything that reached the final frontier, plus all
    # truncation losses along the way
    residual = current.mass() + truncated
    occ.residual = residual
    post.residual = residual
    return KleeneResult(occ, post, residual)


# -- finite Markov chains -------------------------------------------------------------

@dataclass
class FiniteChain:
    states: List[str]
    transitions: Dict[str, Dict[str, Fraction]]  # absent key = terminal state
    initial: Dict[str, Fraction]

    def validate(self) -> None:
        for src, row in self.transitions.items():
            total = sum(row.values(), Fraction(0))
            if total != 1:
                raise OracleError(f"transition row of {src} sums to {total}, not 1")

    @staticmethod
    def parse(text: str) -> "FiniteChain":
        transitions: Dict[str, Dict[str, Fraction]] = {}
        initial: Dict[str, Fraction] = {}
        states: List[str] = []

        def note(s: str):
            if s not in states:
                states.append(s)

        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "init":
                if len(parts) != 3:
                    raise OracleError(f"line {lineno}: expected 'init state mass'")
                note(parts[1])
                initial[parts[1]] = initial.get(parts[1], Fraction(0)) + Fraction(parts[2])
            else:
                if len(parts) != 3:
                    raise OracleError(f"line {lineno}: expected 'src dst prob'")
                src, dst, prob = parts
                note(src)
                note(dst)
                transitions.setdefault(src, {})
                transitions[src][dst] = transitions[src].get(dst, Fraction(0)) + Fraction(prob)
        chain = FiniteChain(states, transitions, initial)
        chain.validate()
        return chain

    def format(self) -> str:
        lines = []
        for src in self.states:
            for dst, p in self.transitions.get(src, {}).items():
                lines.append(f"{src} {dst} {p}")
        for s, v in self.initial.items():
            lines.append(f"init {s} {v}")
        return "\n".join(lines) + "\n"


def _reachable(chain: FiniteChain) -> List[str]:
    seen = [s for s in chain.states if chain.initial.get(s)]
    frontier = list(seen)
    while frontier:
        s = frontier.pop()
        for t in chain.transitions.get(s, {}):
            if t not in seen:
                seen.append(t)
                frontier.append(t)
    return seen


def _closed_recurrent_states(chain: FiniteChain, reachable: List[str]) -> set:
    """States of reachable non-terminal SCCs with no exit (infinite visits)."""
    fwd_cache: Dict[str, set] = {}

    def fwd(s: str) -> set:
        if s not in fwd_cache:
            seen = {s}
            stack = [s]
            while stack:
                u = stack.pop()
                for t in chain.transitions.get(u, {}):
                    if t not in seen:
                        seen.add(t)
                        stack.append(t)
            fwd_cache[s] = seen
        return fwd_cache[s]

    bad: set = set()
    for s in reachable:
        if s not in chain.transitions or s in bad:
            continue
        scc = {t for t in fwd(s) if s in fwd(t)}
        closed = all(dst in scc for t in scc for dst in chain.transitions.get(t, {}))
        if closed:
            bad |= scc
    return bad


def chain_occupation(chain: FiniteChain) -> Dict[str, object]:
    """Expected total visits per state; Infinite (None) on states of reachable
    closed recurrent classes."""
    chain.validate()
    reachable = _reachable(chain)
    bad = _closed_recurrent_states(chain, reachable)
    transient = [s for s in reachable if s in chain.transitions and s not in bad]
    n = len(transient)
    pos = {s: i for i, s in enumerate(transient)}
    # o = iota + P^T o on transient states
    a = [[Fraction(0)] * n for _ in range(n)]
    rhs = [chain.initial.get(s, Fraction(0)) for s in transient]
    for i, s in enumerate(transient):
        a[i][i] += 1
    for s in transient:
        for t, p in chain.transitions[s].items():
            if t in pos:
                a[pos[t]][pos[s]] -= p
    occ_t = _solve_linear(a, rhs)
    out: Dict[str, object] = {}
    for s in chain.states:
        if s in bad:
            out[s] = None  # infinite expected visits
        elif s in pos:
            out[s] = occ_t[pos[s]]
        elif s in reachable:
            total = chain.initial.get(s, Fraction(0))
            for src in transient:
                p = chain.transitions[src].get(s)
                if p:
                    total += p * occ_t[pos[src]]
            # terminal states downstream of an infinite class are unreachable
            # from it (closed classes have no exits)
            out[s] = total
        else:
            out[s] = Fraction(0)
    return out


def _solve_linear(a: List[List[Fraction]], b: List[Fraction]) -> List[Fraction]:
    n = len(b)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col]), None)
        if piv is None:
            raise SingularSystem("occupation system is singular")
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[i][n] for i in range(n)]


def chain_posterior(chain: FiniteChain, occupation: Dict[str, object]) -> Dict[str, Fraction]:
    """Occupation restricted to terminal states (the chain's posterior)."""
    return {s: occupation[s] for s in chain.states
            if s not in chain.transitions and isinstance(occupation[s], Fraction)}


def best_contraction_bound(chain: FiniteChain, c: Fraction,
                           max_iter: int = 10000) -> Dict[str, Fraction]:
    """Least nu >= initial with one-step image of guarded nu <= c*nu, and the
    posterior upper bound [terminal]*nu/(1-c) it certifies.

    Monotone iteration nu <- max(initial, (1/c) * P^T [guarded] nu); raises
    Diverges when no finite fixpoint is reached.
    """
    if not (0 < c < 1):
        raise ValueError("contraction factor must be in (0,1)")
    chain.validate()
    nu = {s: chain.initial.get(s, Fraction(0)) for s in chain.states}
    bound = sum(chain.initial.values(), Fraction(0)) / (c * (1 - c)) + 1
    for _ in range(max_iter):
        image: Dict[str, Fraction] = {s: Fraction(0) for s in chain.states}
        for s, row in chain.transitions.items():
            v = nu[s]
            if not v:
                continue
            for t, p in row.items():
                image[t] += v * p
        new = {s: max(chain.initial.get(s, Fraction(0)), image[s] / c)
               for s in chain.states}
        if new == nu:
            return {s: (nu[s] / (1 - c) if s not in chain.transitions else Fraction(0))
                    for s in chain.states}
        if any(v > bound for v in new.values()):
            raise Diverges(f"no finite {c}-contraction invariant")
        nu = new
    raise Diverges(f"contraction iteration did not stabilize in {max_iter} steps")


# -- closed form vs oracle -------------------------------------------------------------

@dataclass
class CrosscheckReport:
    violations: List[Tuple[Mono, Fraction, Fraction]]
    max_gap: Fraction
    total_gap: Fraction
    residual: Fraction
    tightness_warnings: List[Tuple[Mono, Fraction, Fraction]]

    @property
    def ok(self) -> bool:
        return not self.violations


def crosscheck(f: ClosedForm, m: SparseMeasure, degree: int,
               vars: Sequence[str]) -> CrosscheckReport:
    """Compare a closed form against an oracle lower bound, entrywise.

    A closed-form coefficient below the oracle value is a soundness violation;
    exceeding it by more than the oracle residual is a tightness warning.
    """
    coeffs = series_expand(f, degree, order=list(vars))
    violations = []
    warnings = []
    max_gap = Fraction(0)
    total_gap = Fraction(0)
    monos = set(coeffs)
    for s in m.entries:
        if sum(s) <= degree:
            monos.add(_state_mono(s, vars))
    for mono in sorted(monos, key=lambda t: mono_key(t, list(vars))):
        got = coeffs.get(mono, Fraction(0))
        state = _mono_state(mono, vars)
        lower = m.entries.get(state, Fraction(0))
        if got < lower:
            violations.append((mono, got, lower))
        else:
            gap = got - lower
            max_gap = max(max_gap, gap)
            total_gap += gap
            if gap > m.residual:
                warnings.append((mono, got, lower))
    return CrosscheckReport(violations, max_gap, total_gap, m.residual, warnings)


def _state_mono(state: State, vars: Sequence[str]) -> Mono:
    return tuple(sorted((v, e) for v, e in zip(vars, state) if e))


def _mono_state(mono: Mono, vars: Sequence[str]) -> State:
    d = dict(mono)
    return tuple(d.get(v, 0) for v in vars)


def measure_from_closed_form(f: ClosedForm, degree: int,
                             vars: Sequence[str]) -> SparseMeasure:
    """Truncate a closed form's series to a sparse measure.

    When the total mass is computable (shape-certified nonnegative form), the
    truncated tail is recorded exactly as the residual.
    """
    from .algebra import mass as _mass, shape_nonneg as _shape

    coeffs = series_expand(f, degree, order=list(vars))
    entries = {}
    for mono, c in coeffs.items():
        if c:
            entries[_mono_state(mono, vars)] = c
    residual = Fraction(0)
    if _shape(f):
        total = _mass(f)
        if total.finite:
            residual = total.value - sum(entries.values(), Fraction(0))
    return SparseMeasure(entries, residual)
