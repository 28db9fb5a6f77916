"""Quantifier elimination and sentence decision for completions of the
locally-free-algebra axioms.

The pipeline works over a flat constraint language whose atoms are
(dis)equalities between projection chains on variables and ground terms,
plus per-symbol decomposability literals.  Eliminating an existential
variable proceeds by lazy shape splitting: whenever a projection chain on a
target variable is unresolved, the branch splits two ways on whether the
variable decomposes by the chain's head symbol.  Once all target
occurrences are bare, positive equalities are solved by unification-style
closure, negative literals reduce to avoidance constraints, and the
remaining demand for indecomposable values turns into census conditions
evaluated against the chosen theory.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from . import models
from .formulas import (
    And,
    Eq,
    Exists,
    Forall,
    Formula,
    N,
    Ni,
    Not,
    Or,
    Proj,
    TRUE,
    FALSE,
    conj,
    disj,
    formula_atoms,
    free_vars,
    is_quantifier_free,
    nnf,
)
from .models import OMEGA, Model
from .terms import (
    App,
    Atom,
    ClashError,
    OccursError,
    Pattern,
    Signature,
    Term,
    TermError,
    UnificationError,
    Var,
    canonical_pattern,
    is_ground,
    substitute,
    unify,
    variables,
)


class QEError(TermError):
    pass


@dataclass(frozen=True, slots=True)
class Theory:
    """A completion, fixed by its indecomposable census."""

    census: int | str

    def __str__(self) -> str:
        return str(self.census)


def parse_theory(text: str) -> Theory:
    if text == OMEGA:
        return Theory(OMEGA)
    try:
        k = int(text)
    except ValueError:
        raise QEError(f"bad theory spec {text!r}")
    if k < 0:
        raise QEError("census must be nonnegative")
    return Theory(k)


def canonical_model(sig: Signature, th: Theory) -> Model:
    """The prime-structure witness carrier for a theory."""
    if th.census == OMEGA:
        return models.standard(sig, OMEGA)
    if th.census == 0:
        return models.t0_colimit(sig)
    return models.standard(sig, th.census)


# ---------------------------------------------------------------------------
# Flat constraint language
# ---------------------------------------------------------------------------

Chain = tuple[tuple[str, int], ...]  # projection steps, innermost first


@dataclass(frozen=True, slots=True)
class SVar:
    var: str
    chain: Chain = ()

    def __str__(self) -> str:
        out = f"?{self.var}"
        for sym, j in self.chain:
            out = f"(p {j} {sym} {out})"
        return out


@dataclass(frozen=True, slots=True)
class SApp:
    sym: str
    parts: tuple

    def __str__(self) -> str:
        return f"({self.sym} {' '.join(str(p) for p in self.parts)})"


Side = object  # SVar | Term (ground)


@dataclass(frozen=True, slots=True)
class LEq:
    lhs: Side
    rhs: Side
    pos: bool

    def __str__(self) -> str:
        op = "=" if self.pos else "!="
        return f"({op} {self.lhs} {self.rhs})"


@dataclass(frozen=True, slots=True)
class LNi:
    sym: str
    arg: Side
    pos: bool

    def __str__(self) -> str:
        body = f"(Ni {self.sym} {self.arg})"
        return body if self.pos else f"(not {body})"


@dataclass(frozen=True, slots=True)
class LN:
    """Full indecomposability used in emitted census conditions."""

    arg: Side
    pos: bool

    def __str__(self) -> str:
        body = f"(N {self.arg})"
        return body if self.pos else f"(not {body})"


Lit = (LEq, LNi, LN)


def _ground_chain(t: Term, chain: Chain) -> Term:
    for sym, j in chain:
        if isinstance(t, App) and t.sym == sym:
            t = t.args[j - 1]
    return t


def apply_chain(value, chain: Chain):
    """Apply projection steps to an SVar / SApp / ground value."""
    for pos, (sym, j) in enumerate(chain):
        if isinstance(value, SVar):
            return SVar(value.var, value.chain + chain[pos:])
        if isinstance(value, SApp):
            if value.sym == sym:
                value = value.parts[j - 1]
            # other heads: projection acts as identity, step consumed
        else:
            return _ground_chain(value, chain[pos:])
    return value


def _side_key(s) -> str:
    return str(s)


def mk_eq(lhs, rhs, pos: bool):
    if isinstance(lhs, SApp) or isinstance(rhs, SApp):
        raise QEError("unflattened side in literal")
    if isinstance(lhs, Term) and isinstance(rhs, Term):
        return (lhs == rhs) == pos
    if lhs == rhs:
        return pos
    if _side_key(rhs) < _side_key(lhs):
        lhs, rhs = rhs, lhs
    return LEq(lhs, rhs, pos)


def _occurs_in_sapp(v: str, side) -> bool:
    """Does the variable occur (bare or under a chain) inside a side?"""
    if isinstance(side, SVar):
        return side.var == v
    if isinstance(side, SApp):
        return any(_occurs_in_sapp(v, p) for p in side.parts)
    return False


def _bare_occurs(v: str, side) -> bool:
    if isinstance(side, SVar):
        return side.var == v and not side.chain
    if isinstance(side, SApp):
        return any(_bare_occurs(v, p) for p in side.parts)
    return False


def mk_ni(sym: str, arg, pos: bool):
    if isinstance(arg, SApp):
        return (arg.sym != sym) == pos
    if isinstance(arg, Term):
        if isinstance(arg, App):
            return (arg.sym != sym) == pos
        return pos  # generator atoms are indecomposable
    return LNi(sym, arg, pos)


def mk_n(arg, pos: bool):
    if isinstance(arg, SApp):
        return not pos
    if isinstance(arg, Term):
        return (not isinstance(arg, App)) == pos
    return LN(arg, pos)


# Flat formulas: True | False | literal | ("and", parts) | ("or", parts)
#                | ("ex", vars, f) | ("all", vars, f)


def fand(parts):
    out = []
    for p in parts:
        if p is False:
            return False
        if p is True:
            continue
        if isinstance(p, tuple) and p[0] == "and":
            out.extend(p[1])
        else:
            out.append(p)
    if not out:
        return True
    if len(out) == 1:
        return out[0]
    return ("and", tuple(out))


def For(parts):
    out = []
    for p in parts:
        if p is True:
            return True
        if p is False:
            continue
        if isinstance(p, tuple) and p[0] == "or":
            out.extend(p[1])
        else:
            out.append(p)
    if not out:
        return False
    if len(out) == 1:
        return out[0]
    return ("or", tuple(out))


def neg_flat(f):
    if f is True:
        return False
    if f is False:
        return True
    if isinstance(f, LEq):
        return LEq(f.lhs, f.rhs, not f.pos)
    if isinstance(f, LNi):
        return LNi(f.sym, f.arg, not f.pos)
    if isinstance(f, LN):
        return LN(f.arg, not f.pos)
    if f[0] == "and":
        return For([neg_flat(p) for p in f[1]])
    if f[0] == "or":
        return fand([neg_flat(p) for p in f[1]])
    if f[0] == "ex":
        return ("all", f[1], neg_flat(f[2]))
    return ("ex", f[1], neg_flat(f[2]))


def norm_expr(te: Term):
    """Term expression to SVar / SApp / ground, simplifying projections."""
    if isinstance(te, Var):
        return SVar(te.name)
    if isinstance(te, Atom):
        return te
    if isinstance(te, App):
        parts = tuple(norm_expr(a) for a in te.args)
        if all(isinstance(p, Term) for p in parts):
            return App(te.sym, parts)
        return SApp(te.sym, parts)
    if isinstance(te, Proj):
        return apply_chain(norm_expr(te.arg), ((te.sym, te.index),))
    raise QEError(f"not a term expression: {te!r}")


def flat_eq(u, v, pos: bool, sig: Signature):
    """Equality of normalized sides as a flat formula.

    A positive equality between a bare variable and a constructor tree is
    kept as a binding literal so the closure can run an occurs check;
    everything else decomposes into projection literals and guards.
    """
    if not pos:
        return neg_flat(_expand_eq(u, v, sig))
    ub, vb = isinstance(u, SApp), isinstance(v, SApp)
    if not ub and vb:
        u, v = v, u
        ub, vb = vb, ub
    if ub and vb:
        if u.sym != v.sym:
            return False
        return fand([flat_eq(a, b, True, sig) for a, b in zip(u.parts, v.parts)])
    if ub:
        if isinstance(v, Term):
            if isinstance(v, App) and v.sym == u.sym:
                return fand(
                    [flat_eq(a, b, True, sig) for a, b in zip(u.parts, v.args)]
                )
            return False
        if not v.chain:
            # binding form; a bare occurrence inside is an acyclicity clash
            if _bare_occurs(v.var, u):
                return False
            return LEq(v, u, True)
        # v is a proper projection chain: u's head must decompose its value
        return _expand_eq(u, v, sig)
    return mk_eq(u, v, True)


def _expand_eq(u, v, sig: Signature):
    """Projection-literal form of an equality, without binding literals."""
    ub, vb = isinstance(u, SApp), isinstance(v, SApp)
    if not ub and vb:
        u, v = v, u
        ub, vb = vb, ub
    if ub and vb:
        if u.sym != v.sym:
            return False
        return fand([_expand_eq(a, b, sig) for a, b in zip(u.parts, v.parts)])
    if ub:
        if isinstance(v, Term):
            if isinstance(v, App) and v.sym == u.sym:
                return fand(
                    [_expand_eq(a, b, sig) for a, b in zip(u.parts, v.args)]
                )
            return False
        if not v.chain and _bare_occurs(v.var, u):
            return False
        parts = [mk_ni(u.sym, v, False)]
        for j, a in enumerate(u.parts, start=1):
            parts.append(_expand_eq(apply_chain(v, ((u.sym, j),)), a, sig))
        return fand(parts)
    return mk_eq(u, v, True)


def flat_ni(sym: str, u, pos: bool):
    return mk_ni(sym, u, pos)


def to_flat(phi: Formula, sig: Signature):
    """Negation-normal formula to the flat constraint language."""
    if isinstance(phi, Eq):
        return flat_eq(norm_expr(phi.lhs), norm_expr(phi.rhs), True, sig)
    if isinstance(phi, Ni):
        return flat_ni(phi.sym, norm_expr(phi.arg), True)
    if isinstance(phi, N):
        arg = norm_expr(phi.arg)
        return fand([flat_ni(name, arg, True) for name, _ in sig.symbols])
    if isinstance(phi, Not):
        return neg_flat(to_flat(phi.arg, sig))
    if isinstance(phi, And):
        return fand([to_flat(a, sig) for a in phi.args])
    if isinstance(phi, Or):
        return For([to_flat(a, sig) for a in phi.args])
    if isinstance(phi, Exists):
        return ("ex", phi.vars, to_flat(phi.body, sig))
    if isinstance(phi, Forall):
        return ("all", phi.vars, to_flat(phi.body, sig))
    raise QEError(f"not a formula: {phi!r}")


def dnf(f) -> list[frozenset]:
    if f is True:
        return [frozenset()]
    if f is False:
        return []
    if isinstance(f, Lit):
        return [frozenset([f])]
    if f[0] == "or":
        out = []
        for p in f[1]:
            out.extend(dnf(p))
        return out
    if f[0] == "and":
        branches = [frozenset()]
        for p in f[1]:
            sub = dnf(p)
            nxt = []
            for br in branches:
                for s in sub:
                    merged = br | s
                    if not _contradictory(merged):
                        nxt.append(merged)
            branches = nxt
            if not branches:
                return []
        # dedupe
        seen, out = set(), []
        for br in branches:
            kk = tuple(sorted(str(l) for l in br))
            if kk not in seen:
                seen.add(kk)
                out.append(br)
        return out
    raise QEError("quantifier inside a quantifier-free context")


def _contradictory(lits: frozenset) -> bool:
    for l in lits:
        if isinstance(l, LEq) and LEq(l.lhs, l.rhs, not l.pos) in lits:
            return True
        if isinstance(l, LNi) and LNi(l.sym, l.arg, not l.pos) in lits:
            return True
        if isinstance(l, LN) and LN(l.arg, not l.pos) in lits:
            return True
        if isinstance(l, LN) and l.pos:
            for l2 in lits:
                if isinstance(l2, LNi) and not l2.pos and l2.arg == l.arg:
                    return True
    return False


def _sides(l):
    if isinstance(l, LEq):
        return (l.lhs, l.rhs)
    return (l.arg,)


def iter_svars(side):
    if isinstance(side, SVar):
        yield side
    elif isinstance(side, SApp):
        for p in side.parts:
            yield from iter_svars(p)


def _subst_side(side, v: str, value):
    if isinstance(side, SVar):
        if side.var == v:
            return apply_chain(value, side.chain)
        return side
    if isinstance(side, SApp):
        parts = tuple(_subst_side(p, v, value) for p in side.parts)
        if all(isinstance(p, Term) for p in parts):
            return App(side.sym, parts)
        return SApp(side.sym, parts)
    return side


def _remake_eq(a, b, pos: bool, sig: Signature):
    if isinstance(a, SApp) or isinstance(b, SApp):
        return flat_eq(a, b, pos, sig)
    return mk_eq(a, b, pos)


def _subst_lit(l, v: str, value, sig: Signature):
    """Substitute into one literal; may need re-flattening."""
    if isinstance(l, LEq):
        a = _subst_side(l.lhs, v, value)
        b = _subst_side(l.rhs, v, value)
        return _remake_eq(a, b, l.pos, sig)
    if isinstance(l, LNi):
        return mk_ni(l.sym, _subst_side(l.arg, v, value), l.pos)
    return mk_n(_subst_side(l.arg, v, value), l.pos)


class _Fresh:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.counter = itertools.count(1)

    def var(self) -> str:
        while True:
            name = f"w{next(self.counter)}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def _all_syms(sig: Signature) -> frozenset[str]:
    return frozenset(sig.names)


def _eliminate(varnames, flatf, th: Theory, sig: Signature,
               fresh: _Fresh) -> object:
    """Existential elimination of a variable block from a flat QF formula."""
    targets = frozenset(varnames)
    disjuncts: list[frozenset] = []
    for br in dnf(flatf):
        disjuncts.extend(_elim_branch(targets, br, th, sig, fresh))
    # subsumption: a disjunct implied by a smaller one is dropped
    disjuncts.sort(key=lambda s: (len(s), tuple(sorted(str(l) for l in s))))
    kept: list[frozenset] = []
    for d in disjuncts:
        if not any(k <= d for k in kept):
            kept.append(d)
    return For([fand(sorted(d, key=str)) for d in kept])


def _find_chain_split(targets, lits):
    for l in sorted(lits, key=str):
        for side in _sides(l):
            for s in iter_svars(side):
                if s.var in targets and s.chain:
                    return s.var, s.chain[0][0]
    return None


def _refine(targets, lits, v: str, sym: str, th, sig, fresh):
    """Case: v decomposes by sym; substitute a fresh constructor shell."""
    ws = [fresh.var() for _ in range(sig.arity(sym))]
    shell = SApp(sym, tuple(SVar(w) for w in ws))
    parts = [_subst_lit(l, v, shell, sig) for l in lits]
    new_targets = (targets - {v}) | set(ws)
    return _elim_flat(new_targets, fand(parts), th, sig, fresh)


def _elim_flat(targets, flatf, th, sig, fresh) -> list[frozenset]:
    out = []
    for br in dnf(flatf):
        out.extend(_elim_branch(frozenset(targets), br, th, sig, fresh))
    return out


def _elim_branch(targets, lits, th: Theory, sig: Signature,
                 fresh: _Fresh) -> list[frozenset]:
    if _contradictory(lits):
        return []

    # expand full-indecomposability literals on targets
    for l in sorted(lits, key=str):
        if isinstance(l, LN) and isinstance(l.arg, SVar) \
                and l.arg.var in targets and not l.arg.chain:
            rest = lits - {l}
            if l.pos:
                expanded = [LNi(s, l.arg, True) for s in sig.names]
                return _elim_flat(targets, fand(list(rest) + expanded),
                                  th, sig, fresh)
            alts = For([LNi(s, l.arg, False) for s in sig.names])
            return _elim_flat(targets, fand(list(rest) + [alts]),
                              th, sig, fresh)

    # resolve projection chains on targets by a two-way shape split
    found = _find_chain_split(targets, lits)
    if found:
        v, sym = found
        with_shape = _refine(targets, lits, v, sym, th, sig, fresh)
        stripped = []
        for l in lits:
            if isinstance(l, LEq):
                stripped.append(
                    _remake_eq(_strip_head(l.lhs, v, sym),
                               _strip_head(l.rhs, v, sym), l.pos, sig)
                )
            elif isinstance(l, LNi):
                stripped.append(mk_ni(l.sym, _strip_head(l.arg, v, sym), l.pos))
            else:
                stripped.append(mk_n(_strip_head(l.arg, v, sym), l.pos))
        stripped.append(LNi(sym, SVar(v), True))
        without = _elim_flat(targets, fand(stripped), th, sig, fresh)
        return with_shape + without

    # positive closure: bind bare targets, with the occurs check
    for l in sorted(lits, key=str):
        if isinstance(l, LEq) and l.pos:
            for a, b in ((l.lhs, l.rhs), (l.rhs, l.lhs)):
                if isinstance(a, SVar) and not a.chain and a.var in targets:
                    if _occurs_in_sapp(a.var, b):
                        return []
                    rest = [
                        _subst_lit(x, a.var, b, sig) for x in lits if x is not l
                    ]
                    return _elim_flat(targets - {a.var}, fand(rest),
                                      th, sig, fresh)
            # a structural equation whose tree mentions a target but whose
            # variable side is free: expand to projection literals
            if any(
                s.var in targets
                for side in (l.lhs, l.rhs)
                for s in iter_svars(side)
            ):
                rest = [x for x in lits if x is not l]
                expanded = _expand_eq(l.lhs, l.rhs, sig)
                return _elim_flat(targets, fand(rest + [expanded]),
                                  th, sig, fresh)

    # forced decompositions of targets
    for l in sorted(lits, key=str):
        if isinstance(l, LNi) and not l.pos and isinstance(l.arg, SVar) \
                and l.arg.var in targets:
            rest = lits - {l}
            return _refine(targets, rest, l.arg.var, l.sym, th, sig, fresh)

    return _residual(targets, lits, th, sig)


def _strip_head(side, v: str, sym: str):
    """Drop leading projection steps by ``sym`` on a non-sym-decomposable var."""
    if isinstance(side, SVar) and side.var == v:
        chain = side.chain
        while chain and chain[0][0] == sym:
            chain = chain[1:]
        return SVar(v, chain)
    if isinstance(side, SApp):
        return SApp(side.sym, tuple(_strip_head(p, v, sym) for p in side.parts))
    return side


def _residual(targets, lits, th: Theory, sig: Signature) -> list[frozenset]:
    """Counting analysis once every target occurrence is a bare variable."""
    all_syms = set(sig.names)
    ni_sets: dict[str, set[str]] = {v: set() for v in targets}
    emitted: list = []
    diseqs: list[LEq] = []

    for l in sorted(lits, key=str):
        tvars = {
            s.var
            for s in _sides(l)
            if isinstance(s, SVar) and s.var in targets
        }
        if not tvars:
            emitted.append(l)
            continue
        if isinstance(l, LNi):
            assert l.pos, "negative Ni on target survived elimination"
            ni_sets[l.arg.var].add(l.sym)
            continue
        if isinstance(l, LEq):
            assert not l.pos, "positive equality on target survived closure"
            diseqs.append(l)
            continue
        raise QEError(f"unexpected target literal {l}")

    ind = {v for v in targets if ni_sets[v] == all_syms}

    edges: set[tuple[str, str]] = set()
    forbidden: dict[str, list] = {v: [] for v in ind}
    for d in diseqs:
        a, b = d.lhs, d.rhs
        av = a.var if isinstance(a, SVar) and a.var in targets else None
        bv = b.var if isinstance(b, SVar) and b.var in targets else None
        if av in ind and bv in ind:
            edges.add(tuple(sorted((av, bv))))
            continue
        if av in ind or bv in ind:
            v = av if av in ind else bv
            other = b if v == av else a
            ov = other.var if isinstance(other, SVar) and other.var in targets \
                else None
            if ov is not None:
                continue  # the unconstrained side dodges afterwards
            if isinstance(other, Term):
                if isinstance(other, App):
                    continue  # decomposable value, trivially avoided
                forbidden[v].append(other)
            else:
                forbidden[v].append(other)
            continue
        # disequality between two flexible targets, or flexible vs anything:
        # a flexible variable has infinitely many candidate values
        continue

    if ind and th.census == 0:
        return []
    if th.census == OMEGA or not ind:
        return [frozenset(emitted)]

    k = th.census
    params = sorted(
        {p for v in ind for p in forbidden[v] if isinstance(p, SVar)},
        key=str,
    )
    gens = sorted(
        {p.name for v in ind for p in forbidden[v] if isinstance(p, Atom)}
    )
    if len(ind) + len(params) + len(gens) <= k:
        return [frozenset(emitted)]

    out = []
    for type_lits, classes in _param_types(params, gens, sig):
        if _colorable(ind, edges, forbidden, classes, k, gens):
            out.append(frozenset(emitted) | type_lits)
    return out


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _param_types(params: list[SVar], gens: list[str], sig: Signature):
    """Full descriptions of how x-bar parameters may relate to generators.

    Yields (literal set, classes) where classes maps each parameter class to
    a color token: a generator name, or a fresh class index, or None for
    decomposable parameters.
    """
    if not params:
        yield frozenset(), {}
        return
    for part in _set_partitions(params):
        for flags in itertools.product([True, False], repeat=len(part)):
            ind_classes = [c for c, f in zip(part, flags) if f]
            labelings = itertools.product(
                *[["*"] + gens for _ in ind_classes]
            )
            for lab in labelings:
                used = [g for g in lab if g != "*"]
                if len(set(used)) != len(used):
                    continue
                lits: set = set()
                classes: dict[str, object] = {}
                fresh_ix = 0
                ind_i = 0
                for cls, flag in zip(part, flags):
                    rep = cls[0]
                    for other in cls[1:]:
                        lits.add(mk_eq(rep, other, True))
                    if flag:
                        lits.update(LN(p, True) for p in cls)
                        label = lab[ind_i]
                        ind_i += 1
                        if label == "*":
                            token = ("fresh", fresh_ix)
                            fresh_ix += 1
                            for g in gens:
                                lits.add(mk_eq(rep, Atom(g), False))
                        else:
                            token = ("gen", label)
                            lits.add(mk_eq(rep, Atom(label), True))
                            for g in gens:
                                if g != label:
                                    lits.add(mk_eq(rep, Atom(g), False))
                        for p in cls:
                            classes[str(p)] = token
                    else:
                        lits.update(LN(p, False) for p in cls)
                        for p in cls:
                            classes[str(p)] = None
                # distinct classes are pairwise distinct
                for c1, c2 in itertools.combinations(range(len(part)), 2):
                    lits.add(mk_eq(part[c1][0], part[c2][0], False))
                if any(l is False for l in lits):
                    continue
                lits = frozenset(l for l in lits if l is not True)
                yield lits, classes


def _colorable(ind, edges, forbidden, classes, k: int, gens: list[str]) -> bool:
    """Can the indecomposable targets be colored with k generators?"""
    gen_ix = {g: i for i, g in enumerate(sorted(gens))}
    fresh_tokens = sorted(
        {c for c in classes.values() if isinstance(c, tuple) and c[0] == "fresh"}
    )
    pinned = len(gen_ix)
    if pinned + len(fresh_tokens) > k:
        return False
    # colors: 0..pinned-1 are the named generators, then fresh classes get
    # distinct colors drawn from the remainder; their identity is symmetric,
    # so a fixed injection suffices
    fresh_color = {
        tok: pinned + i for i, tok in enumerate(fresh_tokens)
    }

    def forb_colors(v) -> set[int]:
        out = set()
        for p in forbidden[v]:
            if isinstance(p, Atom):
                out.add(gen_ix[p.name])
            else:
                tok = classes.get(str(p))
                if tok is None:
                    continue  # decomposable parameter, never collides
                if tok[0] == "gen":
                    out.add(gen_ix[tok[1]])
                else:
                    out.add(fresh_color[tok])
        return out

    order = sorted(ind)
    forbs = {v: forb_colors(v) for v in order}

    def assign(i: int, coloring: dict[str, int]) -> bool:
        if i == len(order):
            return True
        v = order[i]
        for c in range(k):
            if c in forbs[v]:
                continue
            if any(
                coloring.get(u) == c
                for u in order[:i]
                if tuple(sorted((u, v))) in edges
            ):
                continue
            coloring[v] = c
            if assign(i + 1, coloring):
                return True
            del coloring[v]
        return False

    return assign(0, {})


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def validate_for_theory(phi: Formula, th: Theory) -> None:
    """Parameters must denote elements available in every model of th."""
    for name in formula_atoms(phi):
        ok = name.startswith("e") and name[1:].isdigit()
        if not ok:
            raise QEError(f"atom {name!r} is not a generator parameter")
        if th.census != OMEGA and int(name[1:]) > th.census:
            raise QEError(
                f"parameter {name!r} exceeds census {th.census}"
            )


def chain_to_expr(s: SVar) -> Term:
    out: Term = Var(s.var)
    for sym, j in s.chain:
        out = Proj(j, sym, out)
    return out


def _side_to_expr(side) -> Term:
    if isinstance(side, SVar):
        return chain_to_expr(side)
    return side


def unflatten(f) -> Formula:
    if f is True:
        return TRUE
    if f is False:
        return FALSE
    if isinstance(f, LEq):
        atom = Eq(_side_to_expr(f.lhs), _side_to_expr(f.rhs))
        return atom if f.pos else Not(atom)
    if isinstance(f, LNi):
        atom = Ni(f.sym, _side_to_expr(f.arg))
        return atom if f.pos else Not(atom)
    if isinstance(f, LN):
        atom = N(_side_to_expr(f.arg))
        return atom if f.pos else Not(atom)
    if f[0] == "and":
        return conj([unflatten(p) for p in f[1]])
    if f[0] == "or":
        return disj([unflatten(p) for p in f[1]])
    raise QEError("quantifier survived elimination")


def qe_flat(f, th: Theory, sig: Signature, fresh: _Fresh):
    if f is True or f is False or isinstance(f, Lit):
        return f
    if f[0] == "and":
        return fand([qe_flat(p, th, sig, fresh) for p in f[1]])
    if f[0] == "or":
        return For([qe_flat(p, th, sig, fresh) for p in f[1]])
    if f[0] == "ex":
        body = qe_flat(f[2], th, sig, fresh)
        return _eliminate(f[1], body, th, sig, fresh)
    if f[0] == "all":
        body = qe_flat(f[2], th, sig, fresh)
        return neg_flat(_eliminate(f[1], neg_flat(body), th, sig, fresh))
    raise QEError(f"bad flat node {f!r}")


def qe(phi: Formula, th: Theory, sig: Signature) -> Formula:
    """Theory-equivalent quantifier-free form of an arbitrary formula."""
    if is_quantifier_free(phi):
        return phi
    validate_for_theory(phi, th)
    taken = set(free_vars(phi)) | _all_bound(phi)
    fresh = _Fresh(taken)
    flat = to_flat(nnf(phi), sig)
    return unflatten(qe_flat(flat, th, sig, fresh))


def _all_bound(phi: Formula) -> set[str]:
    if isinstance(phi, (Eq, Ni, N)):
        return set()
    if isinstance(phi, (And, Or)):
        out: set[str] = set()
        for a in phi.args:
            out |= _all_bound(a)
        return out
    if isinstance(phi, Not):
        return _all_bound(phi.arg)
    return set(phi.vars) | _all_bound(phi.body)


def decide_sentence(sigma: Formula, th: Theory, sig: Signature) -> bool:
    """Truth value of a sentence in the completion fixed by th."""
    if free_vars(sigma):
        raise QEError("decide_sentence expects a sentence")
    reduced = qe(sigma, th, sig)
    val = _closed_value(reduced)
    if val is None:
        raise QEError(f"sentence did not reduce to a truth value: {reduced}")
    return val


def _closed_value(phi: Formula):
    if phi == TRUE:
        return True
    if phi == FALSE:
        return False
    if isinstance(phi, Eq):
        if is_ground(phi.lhs) and is_ground(phi.rhs):
            return phi.lhs == phi.rhs
        return None
    if isinstance(phi, And):
        vals = [_closed_value(a) for a in phi.args]
        return None if any(v is None for v in vals) else all(vals)
    if isinstance(phi, Or):
        vals = [_closed_value(a) for a in phi.args]
        return None if any(v is None for v in vals) else any(vals)
    if isinstance(phi, Not):
        v = _closed_value(phi.arg)
        return None if v is None else not v
    return None


def project_literals(phi: Formula, sig: Signature) -> Formula:
    """One (dis)equality as an equivalent projection-literal constraint."""
    if isinstance(phi, Eq):
        return unflatten(
            flat_eq(norm_expr(phi.lhs), norm_expr(phi.rhs), True, sig)
        )
    if isinstance(phi, Not) and isinstance(phi.arg, Eq):
        return unflatten(
            flat_eq(norm_expr(phi.arg.lhs), norm_expr(phi.arg.rhs), False, sig)
        )
    raise QEError("expected an equality or a negated equality")


def expand_chain_cases(phi: Formula, sig: Signature) -> Formula:
    """Split the first unresolved projection step of an equality literal."""
    neg = isinstance(phi, Not)
    eq = phi.arg if neg else phi
    if not isinstance(eq, Eq):
        raise QEError("expected an equality literal")
    for side, other in ((eq.lhs, eq.rhs), (eq.rhs, eq.lhs)):
        s = norm_expr(side)
        if isinstance(s, SVar) and s.chain:
            sym, j = s.chain[0]
            x = Var(s.var)
            inner = Eq(_side_to_expr(s), _side_to_expr(norm_expr(other)))
            stripped = Eq(
                _side_to_expr(SVar(s.var, s.chain[1:])),
                _side_to_expr(norm_expr(other)),
            )
            lit = (lambda e: Not(e)) if neg else (lambda e: e)
            return disj(
                [
                    conj([Not(Ni(sym, x)), lit(inner)]),
                    conj([Ni(sym, x), lit(stripped)]),
                ]
            )
    return phi


# ---------------------------------------------------------------------------
# Satisfiability with witness construction
# ---------------------------------------------------------------------------


def sat_qf(c: Formula, th: Theory, sig: Signature):
    """Satisfiability of a quantifier-free formula over the theory.

    Returns (True, witness) with the witness an assignment into the
    canonical model, or (False, None).
    """
    if not is_quantifier_free(c):
        raise QEError("sat_qf expects a quantifier-free formula")
    validate_for_theory(c, th)
    fv = sorted(free_vars(c))
    taken = set(fv)
    fresh = _Fresh(taken)
    flat = to_flat(nnf(c), sig)
    model = canonical_model(sig, th)
    for br in dnf(flat):
        wit = _sat_branch(frozenset(fv), br, th, sig, fresh, model)
        if wit is not None:
            from .semantics import eval_qf

            out = {v: wit[v] for v in fv}
            assert eval_qf(model, c, out), "witness failed verification"
            return True, out
    return False, None


def _sat_branch(targets, lits, th, sig, fresh, model):
    if _contradictory(lits):
        return None

    for l in sorted(lits, key=str):
        if isinstance(l, LN) and isinstance(l.arg, SVar) and not l.arg.chain:
            rest = lits - {l}
            if l.pos:
                expanded = [LNi(s, l.arg, True) for s in sig.names]
                return _sat_flat(targets, fand(list(rest) + expanded),
                                 th, sig, fresh, model)
            for s in sig.names:
                w = _sat_flat(targets, fand(list(rest) + [LNi(s, l.arg, False)]),
                              th, sig, fresh, model)
                if w is not None:
                    return w
            return None

    found = _find_chain_split(targets, lits)
    if found:
        v, sym = found
        ws = [fresh.var() for _ in range(sig.arity(sym))]
        shell = SApp(sym, tuple(SVar(w) for w in ws))
        parts = [_subst_lit(l, v, shell, sig) for l in lits]
        wit = _sat_flat((targets - {v}) | set(ws), fand(parts),
                        th, sig, fresh, model)
        if wit is not None:
            wit[v] = App(sym, tuple(wit[w] for w in ws))
            return wit
        stripped = []
        for l in lits:
            if isinstance(l, LEq):
                stripped.append(
                    _remake_eq(_strip_head(l.lhs, v, sym),
                               _strip_head(l.rhs, v, sym), l.pos, sig)
                )
            elif isinstance(l, LNi):
                stripped.append(mk_ni(l.sym, _strip_head(l.arg, v, sym), l.pos))
            else:
                stripped.append(mk_n(_strip_head(l.arg, v, sym), l.pos))
        stripped.append(LNi(sym, SVar(v), True))
        return _sat_flat(targets, fand(stripped), th, sig, fresh, model)

    for l in sorted(lits, key=str):
        if isinstance(l, LEq) and l.pos:
            for a, b in ((l.lhs, l.rhs), (l.rhs, l.lhs)):
                if isinstance(a, SVar) and not a.chain and a.var in targets:
                    if _occurs_in_sapp(a.var, b):
                        return None
                    rest = [
                        _subst_lit(x, a.var, b, sig) for x in lits if x is not l
                    ]
                    wit = _sat_flat(targets - {a.var}, fand(rest),
                                    th, sig, fresh, model)
                    if wit is not None:
                        wit[a.var] = _value_of(b, wit, model)
                        return wit
                    return None

    for l in sorted(lits, key=str):
        if isinstance(l, LNi) and not l.pos and isinstance(l.arg, SVar):
            v = l.arg.var
            ws = [fresh.var() for _ in range(sig.arity(l.sym))]
            shell = SApp(l.sym, tuple(SVar(w) for w in ws))
            parts = [_subst_lit(x, v, shell, sig) for x in lits if x is not l]
            wit = _sat_flat((targets - {v}) | set(ws), fand(parts),
                            th, sig, fresh, model)
            if wit is not None:
                wit[v] = App(l.sym, tuple(wit[w] for w in ws))
            return wit

    return _sat_residual(targets, lits, th, sig, model)


def _sat_flat(targets, flatf, th, sig, fresh, model):
    for br in dnf(flatf):
        wit = _sat_branch(frozenset(targets), br, th, sig, fresh, model)
        if wit is not None:
            return wit
    return None


def _value_of(side, wit, model):
    if isinstance(side, SVar):
        base = wit[side.var]
        for sym, j in side.chain:
            dec = models.decompose(model, base)
            if dec is not None and dec[0] == sym:
                base = dec[1][j - 1]
        return base
    return side


def _sat_residual(targets, lits, th, sig, model):
    all_syms = set(sig.names)
    ni_sets: dict[str, set[str]] = {v: set() for v in targets}
    diseqs = []
    for l in sorted(lits, key=str):
        tvars = {
            s.var for s in _sides(l) if isinstance(s, SVar) and s.var in targets
        }
        if not tvars:
            # ground-only literal: already evaluated by the constructors
            raise QEError(f"unevaluated ground literal {l}")
        if isinstance(l, LNi):
            ni_sets[l.arg.var].add(l.sym)
        elif isinstance(l, LEq):
            diseqs.append(l)
        else:
            raise QEError(f"unexpected residual literal {l}")

    ind = sorted(v for v in targets if ni_sets[v] == all_syms)
    flex = sorted(v for v in targets if v not in set(ind))

    k = th.census
    if ind and k == 0:
        return None

    wit: dict[str, Term] = {}

    # indecomposable picks: distinct where demanded, avoiding ground values
    forb: dict[str, set[Term]] = {v: set() for v in ind}
    edges = set()
    for d in diseqs:
        a, b = d.lhs, d.rhs
        av = a.var if isinstance(a, SVar) else None
        bv = b.var if isinstance(b, SVar) else None
        if av in forb and bv in forb:
            edges.add(tuple(sorted((av, bv))))
        elif av in forb and isinstance(b, Term):
            forb[av].add(b)
        elif bv in forb and isinstance(a, Term):
            forb[bv].add(a)

    limit = (len(ind) + sum(len(f) for f in forb.values()) + 1
             if k == OMEGA else k)

    def assign_ind(i: int) -> bool:
        if i == len(ind):
            return True
        v = ind[i]
        for g in range(1, limit + 1):
            cand = models.generator(g)
            if any(cand == f for f in forb[v]):
                continue
            if any(
                wit.get(u) == cand
                for u in ind[:i]
                if tuple(sorted((u, v))) in edges
            ):
                continue
            wit[v] = cand
            if assign_ind(i + 1):
                return True
            del wit[v]
        return False

    if not assign_ind(0):
        return None

    # flexible picks: enumerate the canonical model, avoiding finitely many
    # values and respecting the per-symbol indecomposability constraints
    for v in flex:
        avoid: set[str] = set()
        for d in diseqs:
            a, b = d.lhs, d.rhs
            for mine, other in ((a, b), (b, a)):
                if isinstance(mine, SVar) and mine.var == v:
                    if isinstance(other, Term):
                        avoid.add(models.key(model, other))
                    elif isinstance(other, SVar) and other.var in wit:
                        avoid.add(models.key(model, wit[other.var]))
        need_heads_off = ni_sets[v]
        for bound in itertools.count(2):
            found = None
            for e in models.enumerate_elements(model, bound, bound):
                dec = models.decompose(model, e)
                if dec is not None and dec[0] in need_heads_off:
                    continue
                if need_heads_off == all_syms and dec is not None:
                    continue
                if models.key(model, e) in avoid:
                    continue
                found = e
                break
            if found is not None:
                wit[v] = found
                break
            if bound > 8:
                return None
    return wit


# ---------------------------------------------------------------------------
# Pattern intersection and avoidance (the two QE lemmas)
# ---------------------------------------------------------------------------


def intersect_patterns(p: Pattern, q: Pattern) -> Pattern | None:
    """Common refinement of two patterns, or None when disjoint.

    The result's solution set is the intersection of the inputs' solution
    sets in every locally free algebra.
    """
    taken = set(variables(p.body))
    ren: dict[str, Term] = {}
    fresh = itertools.count(1)
    for v in set(variables(q.body)):
        if v in taken:
            while True:
                cand = f"q{next(fresh)}"
                if cand not in taken:
                    taken.add(cand)
                    ren[v] = Var(cand)
                    break
    q_body = substitute(q.body, ren)
    try:
        sigma = unify(p.body, q_body)
    except UnificationError:
        return None
    return canonical_pattern(
        Pattern(substitute(p.body, sigma), p.params | q.params)
    )


def _pattern_overlaps(p: Pattern, q: Pattern) -> bool:
    return intersect_patterns(p, q) is not None


def _refinement_values(sig: Signature, th: Theory, p: Pattern,
                       fresh: itertools.count) -> list[Term]:
    """Candidate substitution values used while refining away overlaps."""
    out: list[Term] = []
    supply = 4 if th.census == OMEGA else th.census
    for i in range(1, supply + 1):
        out.append(models.generator(i))
    for name in sorted(p.params):
        out.append(Atom(name))
    for sym, ar in sig.symbols:
        out.append(App(sym, tuple(Var(f"r{next(fresh)}") for _ in range(ar))))
    return out


def avoid_patterns(p: Pattern, avoid: list[Pattern], th: Theory,
                   sig: Signature, max_depth: int = 6) -> Pattern | None:
    """Refine a pattern until it misses every avoided pattern.

    Existential slots are specialized with indecomposable atoms, parameters,
    or fresh constructor shells; each candidate is verified by checking that
    unification with every avoided pattern now fails.  Returns None when no
    refinement is found within the depth budget, which the underlying lemma
    guarantees can only happen if the avoidance problem is unsatisfiable.
    """
    fresh = itertools.count(1)

    def candidates_for(binding: Term, var_pair: bool) -> list[Term]:
        vals = _refinement_values(sig, th, p, fresh)
        if isinstance(binding, App):
            # prefer clashing constructor shells, then atoms
            shells = [v for v in vals if isinstance(v, App)
                      and v.sym != binding.sym]
            atoms_ = [v for v in vals if not isinstance(v, App)]
            same = [v for v in vals if isinstance(v, App)
                    and v.sym == binding.sym]
            return shells + atoms_ + same
        # bound to an atom or identified with another variable: prefer atoms
        atoms_ = [v for v in vals if not isinstance(v, App)]
        shells = [v for v in vals if isinstance(v, App)]
        return atoms_ + shells

    def search(current: Pattern, depth: int) -> Pattern | None:
        live = [q for q in avoid if _pattern_overlaps(current, q)]
        if not live:
            return canonical_pattern(current)
        if depth == 0:
            return None
        q = live[0]
        taken = set(variables(current.body))
        ren = {}
        cnt = itertools.count(1)
        for v in set(variables(q.body)):
            if v in taken:
                ren[v] = Var(f"a{next(cnt)}")
        sigma = unify(current.body, substitute(q.body, ren))
        my_vars = set(variables(current.body))
        moves: list[tuple[str, Term]] = []
        for v in sorted(my_vars):
            if v in sigma:
                b = sigma[v]
                moves.extend((v, c) for c in candidates_for(b, False))
        seen = set()
        for v, val in moves:
            key = (v, str(val))
            if key in seen:
                continue
            seen.add(key)
            refined = Pattern(
                substitute(current.body, {v: val}), current.params
            )
            res = search(refined, depth - 1)
            if res is not None:
                return res
        return None

    for depth in range(1, max_depth + 1):
        res = search(p, depth)
        if res is not None:
            return res
    return None
