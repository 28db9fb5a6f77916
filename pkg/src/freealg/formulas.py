"""First-order formulas over a functional signature and its projection expansion.

Term expressions extend terms with projection applications ``(p j f t)``,
read as: the j-th component of t when t is f-decomposable, and t itself
otherwise.  Formulas are built from equalities, the decomposability atoms
``Ni``/``N``, boolean connectives, and quantifier blocks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .terms import (
    App,
    Atom,
    ParseError,
    Signature,
    Term,
    TermError,
    Var,
    read_sexprs,
    signature_from_sexpr,
    term_from_sexpr,
)


@dataclass(frozen=True, slots=True)
class Proj(Term):
    """Projection selector applied to a term expression."""

    index: int
    sym: str
    arg: Term

    def __str__(self) -> str:
        return f"(p {self.index} {self.sym} {self.arg})"


class Formula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Eq(Formula):
    lhs: Term
    rhs: Term

    def __str__(self) -> str:
        return f"(= {self.lhs} {self.rhs})"


@dataclass(frozen=True, slots=True)
class Ni(Formula):
    """The argument is not decomposable by the given symbol."""

    sym: str
    arg: Term

    def __str__(self) -> str:
        return f"(Ni {self.sym} {self.arg})"


@dataclass(frozen=True, slots=True)
class N(Formula):
    """The argument is indecomposable (by every symbol)."""

    arg: Term

    def __str__(self) -> str:
        return f"(N {self.arg})"


@dataclass(frozen=True, slots=True)
class And(Formula):
    args: tuple[Formula, ...]

    def __str__(self) -> str:
        if not self.args:
            return "true"
        return f"(and {' '.join(str(a) for a in self.args)})"


@dataclass(frozen=True, slots=True)
class Or(Formula):
    args: tuple[Formula, ...]

    def __str__(self) -> str:
        if not self.args:
            return "false"
        return f"(or {' '.join(str(a) for a in self.args)})"


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula

    def __str__(self) -> str:
        return f"(not {self.arg})"


@dataclass(frozen=True, slots=True)
class Exists(Formula):
    vars: tuple[str, ...]
    body: Formula

    def __str__(self) -> str:
        vs = " ".join(f"?{v}" for v in self.vars)
        return f"(exists ({vs}) {self.body})"


@dataclass(frozen=True, slots=True)
class Forall(Formula):
    vars: tuple[str, ...]
    body: Formula

    def __str__(self) -> str:
        vs = " ".join(f"?{v}" for v in self.vars)
        return f"(forall ({vs}) {self.body})"


TRUE = And(())
FALSE = Or(())


def conj(args) -> Formula:
    flat: list[Formula] = []
    for a in args:
        if a == TRUE:
            continue
        if a == FALSE:
            return FALSE
        if isinstance(a, And):
            flat.extend(a.args)
        else:
            flat.append(a)
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(args) -> Formula:
    flat: list[Formula] = []
    for a in args:
        if a == FALSE:
            continue
        if a == TRUE:
            return TRUE
        if isinstance(a, Or):
            flat.extend(a.args)
        else:
            flat.append(a)
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def implies(a: Formula, b: Formula) -> Formula:
    return disj([Not(a), b])


def expr_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, App):
        out: set[str] = set()
        for a in t.args:
            out |= expr_vars(a)
        return out
    if isinstance(t, Proj):
        return expr_vars(t.arg)
    return set()


def expr_atoms(t: Term) -> set[str]:
    if isinstance(t, Atom):
        return {t.name}
    if isinstance(t, App):
        out: set[str] = set()
        for a in t.args:
            out |= expr_atoms(a)
        return out
    if isinstance(t, Proj):
        return expr_atoms(t.arg)
    return set()


def subst_expr(t: Term, env: dict[str, Term]) -> Term:
    if isinstance(t, Var):
        return env.get(t.name, t)
    if isinstance(t, App):
        return App(t.sym, tuple(subst_expr(a, env) for a in t.args))
    if isinstance(t, Proj):
        return Proj(t.index, t.sym, subst_expr(t.arg, env))
    return t


def free_vars(phi: Formula) -> set[str]:
    if isinstance(phi, Eq):
        return expr_vars(phi.lhs) | expr_vars(phi.rhs)
    if isinstance(phi, (Ni, N)):
        return expr_vars(phi.arg)
    if isinstance(phi, (And, Or)):
        out: set[str] = set()
        for a in phi.args:
            out |= free_vars(a)
        return out
    if isinstance(phi, Not):
        return free_vars(phi.arg)
    if isinstance(phi, (Exists, Forall)):
        return free_vars(phi.body) - set(phi.vars)
    raise TermError(f"not a formula: {phi!r}")


def formula_atoms(phi: Formula) -> set[str]:
    if isinstance(phi, Eq):
        return expr_atoms(phi.lhs) | expr_atoms(phi.rhs)
    if isinstance(phi, (Ni, N)):
        return expr_atoms(phi.arg)
    if isinstance(phi, (And, Or)):
        out: set[str] = set()
        for a in phi.args:
            out |= formula_atoms(a)
        return out
    if isinstance(phi, Not):
        return formula_atoms(phi.arg)
    if isinstance(phi, (Exists, Forall)):
        return formula_atoms(phi.body)
    raise TermError(f"not a formula: {phi!r}")


def is_sentence(phi: Formula) -> bool:
    return not free_vars(phi)


def subst_formula(phi: Formula, env: dict[str, Term]) -> Formula:
    """Capture-avoiding substitution of term expressions for free variables."""
    if isinstance(phi, Eq):
        return Eq(subst_expr(phi.lhs, env), subst_expr(phi.rhs, env))
    if isinstance(phi, Ni):
        return Ni(phi.sym, subst_expr(phi.arg, env))
    if isinstance(phi, N):
        return N(subst_expr(phi.arg, env))
    if isinstance(phi, And):
        return conj([subst_formula(a, env) for a in phi.args])
    if isinstance(phi, Or):
        return disj([subst_formula(a, env) for a in phi.args])
    if isinstance(phi, Not):
        return Not(subst_formula(phi.arg, env))
    if isinstance(phi, (Exists, Forall)):
        env2 = {v: t for v, t in env.items() if v not in phi.vars}
        clash = set(phi.vars) & set().union(
            *(expr_vars(t) for t in env2.values()), set()
        )
        vs = phi.vars
        body = phi.body
        if clash:
            taken = free_vars(phi.body) | set(phi.vars) | set(env2)
            for t in env2.values():
                taken |= expr_vars(t)
            ren: dict[str, Term] = {}
            new_vs = []
            for v in vs:
                if v in clash:
                    for i in itertools.count(1):
                        cand = f"{v}_{i}"
                        if cand not in taken:
                            taken.add(cand)
                            ren[v] = Var(cand)
                            new_vs.append(cand)
                            break
                else:
                    new_vs.append(v)
            body = subst_formula(body, ren)
            vs = tuple(new_vs)
        body = subst_formula(body, env2)
        return Exists(vs, body) if isinstance(phi, Exists) else Forall(vs, body)
    raise TermError(f"not a formula: {phi!r}")


def nnf(phi: Formula, neg: bool = False) -> Formula:
    """Negation normal form; quantifiers retained."""
    if isinstance(phi, (Eq, Ni, N)):
        return Not(phi) if neg else phi
    if isinstance(phi, Not):
        return nnf(phi.arg, not neg)
    if isinstance(phi, And):
        parts = [nnf(a, neg) for a in phi.args]
        return disj(parts) if neg else conj(parts)
    if isinstance(phi, Or):
        parts = [nnf(a, neg) for a in phi.args]
        return conj(parts) if neg else disj(parts)
    if isinstance(phi, Exists):
        body = nnf(phi.body, neg)
        return Forall(phi.vars, body) if neg else Exists(phi.vars, body)
    if isinstance(phi, Forall):
        body = nnf(phi.body, neg)
        return Exists(phi.vars, body) if neg else Forall(phi.vars, body)
    raise TermError(f"not a formula: {phi!r}")


def is_quantifier_free(phi: Formula) -> bool:
    if isinstance(phi, (Eq, Ni, N)):
        return True
    if isinstance(phi, (And, Or)):
        return all(is_quantifier_free(a) for a in phi.args)
    if isinstance(phi, Not):
        return is_quantifier_free(phi.arg)
    return False


# ---------------------------------------------------------------------------
# Axiom schemes
# ---------------------------------------------------------------------------


def n_formula(sig: Signature, t: Term) -> Formula:
    """Expanded indecomposability: the conjunction of all Ni atoms."""
    return conj([Ni(name, t) for name, _ in sig.symbols])


def axiom_a(sig: Signature, sym: str) -> Formula:
    """Injectivity of one constructor."""
    ar = sig.arity(sym)
    xs = [Var(f"x{i}") for i in range(1, ar + 1)]
    ys = [Var(f"y{i}") for i in range(1, ar + 1)]
    lhs = Eq(App(sym, tuple(xs)), App(sym, tuple(ys)))
    rhs = conj([Eq(x, y) for x, y in zip(xs, ys)])
    names = tuple(v.name for v in xs + ys)
    return Forall(names, implies(lhs, rhs))


def axiom_b(sig: Signature, sym_i: str, sym_j: str) -> Formula:
    """Disjointness of the images of two distinct constructors."""
    if sym_i == sym_j:
        raise TermError("disjointness needs distinct symbols")
    xs = [Var(f"x{i}") for i in range(1, sig.arity(sym_i) + 1)]
    ys = [Var(f"y{i}") for i in range(1, sig.arity(sym_j) + 1)]
    body = Not(Eq(App(sym_i, tuple(xs)), App(sym_j, tuple(ys))))
    return Forall(tuple(v.name for v in xs + ys), body)


def axiom_c(sig: Signature, context: Term, subject: str = "x") -> Formula:
    """Acyclicity: a proper context never returns its subject.

    The context must differ from the bare subject variable and contain it.
    """
    from .terms import variables

    vs = variables(context)
    if subject not in vs:
        raise TermError("subject must occur in the context")
    if context == Var(subject):
        raise TermError("context must differ from the subject variable")
    names = [subject] + [v for v in dict.fromkeys(vs) if v != subject]
    return Forall(tuple(names), Not(Eq(context, Var(subject))))


def distinct(vs: list[Var]) -> list[Formula]:
    return [
        Not(Eq(vs[i], vs[j]))
        for i in range(len(vs))
        for j in range(i + 1, len(vs))
    ]


def count_at_least(sig: Signature, r: int) -> Formula:
    """There exist at least r pairwise distinct indecomposables."""
    if r <= 0:
        return TRUE
    xs = [Var(f"x{i}") for i in range(1, r + 1)]
    body = conj(distinct(xs) + [n_formula(sig, x) for x in xs])
    return Exists(tuple(v.name for v in xs), body)


def count_at_most(sig: Signature, m: int) -> Formula:
    """There exist at most m pairwise distinct indecomposables."""
    return Not(count_at_least(sig, m + 1))


def axiom_e(sig: Signature, r: int) -> Formula:
    return count_at_least(sig, r)


def axiom_d(sig: Signature, m: int) -> Formula:
    """There exist exactly m indecomposables.

    For m = 0 this degenerates to the universal statement that nothing is
    indecomposable.
    """
    if m == 0:
        return Forall(("x",), Not(n_formula(sig, Var("x"))))
    return conj([count_at_least(sig, m), count_at_most(sig, m)])


def generate_contexts(sig: Signature, max_height: int,
                      subject: str = "x") -> list[Term]:
    """All acyclicity-axiom contexts of bounded height, up to renaming.

    Leaves are either the subject or fresh pairwise-distinct variables;
    every context contains the subject and differs from it.
    """
    shapes: list[list[Term]] = [[Var("_")]]
    for h in range(1, max_height + 1):
        lower = [t for level in shapes for t in level]
        layer = []
        for sym, ar in sig.symbols:
            for combo in itertools.product(lower, repeat=ar):
                t = App(sym, combo)
                from .terms import height as _h

                if _h(t) == h:
                    layer.append(t)
        shapes.append(layer)

    out: list[Term] = []

    def leaves(t: Term) -> int:
        if isinstance(t, App):
            return sum(leaves(a) for a in t.args)
        return 1

    def fill(t: Term, labels: list[Term]) -> Term:
        it = iter(labels)

        def go(u: Term) -> Term:
            if isinstance(u, App):
                return App(u.sym, tuple(go(a) for a in u.args))
            return next(it)

        return go(t)

    for level in shapes[1:]:
        for shape in level:
            n = leaves(shape)
            for mask in itertools.product([False, True], repeat=n):
                if not any(mask):
                    continue
                labels: list[Term] = []
                fresh = itertools.count(1)
                for bit in mask:
                    labels.append(
                        Var(subject) if bit else Var(f"x{next(fresh)}")
                    )
                out.append(fill(shape, labels))
    return out


# ---------------------------------------------------------------------------
# Maltsev standard formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class StandardFormula:
    """Existential normal form over subject variables x1..xn.

    Fields mirror the classical display: equalities pin subjects to terms
    over subjects and existentials, disequalities constrain subjects and
    existentials, and decomposability constraints apply to existentials.
    """

    num_existentials: int
    equalities: tuple[tuple[int, Term], ...] = ()
    subject_diseqs: tuple[tuple[int, Term], ...] = ()
    existential_diseqs: tuple[tuple[int, Term], ...] = ()
    ni_constraints: tuple[tuple[int, str], ...] = ()

    def render(self) -> Formula:
        parts: list[Formula] = []
        for i, t in self.equalities:
            parts.append(Eq(Var(f"x{i}"), t))
        for j, u in self.subject_diseqs:
            parts.append(Not(Eq(Var(f"x{j}"), u)))
        for h, v in self.existential_diseqs:
            parts.append(Not(Eq(Var(f"y{h}"), v)))
        for r, s in self.ni_constraints:
            parts.append(Ni(s, Var(f"y{r}")))
        body = conj(parts)
        if self.num_existentials == 0:
            return body
        ys = tuple(f"y{h}" for h in range(1, self.num_existentials + 1))
        return Exists(ys, body)


# ---------------------------------------------------------------------------
# The binary type tree
# ---------------------------------------------------------------------------


def type_tree(sig: Signature, depth: int,
              sym: str | None = None) -> dict[str, Formula]:
    """Formulas indexed by binary strings of length <= depth.

    The root asserts one split of the subject by a binary symbol; each
    further bit splits the currently decomposable component, asserting the
    sibling indecomposable.  Distinct siblings are jointly unsatisfiable
    while every node remains consistent with all its ancestors.
    """
    f = sym or sig.wide_symbol()
    if sig.arity(f) != 2:
        raise TermError("type tree needs a binary symbol")

    out: dict[str, Formula] = {}
    for length in range(depth + 1):
        for bits in itertools.product("01", repeat=length):
            eta = "".join(bits)
            out[eta] = _type_tree_node(sig, f, eta)
    return out


def _type_tree_node(sig: Signature, f: str, eta: str) -> Formula:
    # variable pairs per level: level l introduces y{2l+1}, y{2l+2}
    def pair(l: int) -> tuple[Var, Var]:
        return Var(f"y{2 * l + 1}"), Var(f"y{2 * l + 2}")

    levels: list[tuple[Formula, Formula]] = []
    current = pair(0)
    for l, bit in enumerate(eta, start=1):
        fresh = pair(l)
        split_of = current[0] if bit == "0" else current[1]
        sibling = current[1] if bit == "0" else current[0]
        levels.append((Eq(split_of, App(f, fresh)), n_formula(sig, sibling)))
        current = fresh

    # deepest split first, ending with the root equation
    constraints: list[Formula] = []
    for eq_part, n_part in reversed(levels):
        constraints.extend((eq_part, n_part))
    constraints.append(Eq(Var("x"), App(f, pair(0))))
    phi: Formula = conj(constraints)
    for l in range(len(eta), -1, -1):
        a, b = pair(l)
        phi = Exists((a.name, b.name), phi)
    return phi


# ---------------------------------------------------------------------------
# Parsing and printing
# ---------------------------------------------------------------------------


def expr_from_sexpr(sx, sig: Signature | None = None) -> Term:
    if isinstance(sx, list) and sx and not isinstance(sx[0], list):
        head = sx[0][0]
        if head == "p":
            if len(sx) != 4:
                raise ParseError("projection needs (p index sym expr)",
                                 sx[0][1], sx[0][2])
            try:
                idx = int(sx[1][0])
            except (ValueError, TypeError):
                raise ParseError("bad projection index", sx[0][1], sx[0][2])
            sym = sx[2][0]
            if sig is not None and idx > sig.arity(sym):
                raise ParseError(f"projection index out of range for {sym!r}",
                                 sx[0][1], sx[0][2])
            return Proj(idx, sym, expr_from_sexpr(sx[3], sig))
        return App(head, tuple(expr_from_sexpr(a, sig) for a in sx[1:]))
    return term_from_sexpr(sx, None)


def formula_from_sexpr(sx, sig: Signature | None = None) -> Formula:
    if isinstance(sx, tuple):
        tok, ln, col = sx
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        raise ParseError(f"expected a formula, got {tok!r}", ln, col)
    if not sx or isinstance(sx[0], list):
        raise ParseError("expected a formula head")
    head, ln, col = sx[0]
    rest = sx[1:]
    if head == "=":
        if len(rest) != 2:
            raise ParseError("equality needs two arguments", ln, col)
        return Eq(expr_from_sexpr(rest[0], sig), expr_from_sexpr(rest[1], sig))
    if head == "!=":
        if len(rest) != 2:
            raise ParseError("disequality needs two arguments", ln, col)
        return Not(Eq(expr_from_sexpr(rest[0], sig),
                      expr_from_sexpr(rest[1], sig)))
    if head == "N":
        if len(rest) != 1:
            raise ParseError("N needs one argument", ln, col)
        return N(expr_from_sexpr(rest[0], sig))
    if head == "Ni":
        if len(rest) != 2:
            raise ParseError("Ni needs a symbol and an argument", ln, col)
        return Ni(rest[0][0], expr_from_sexpr(rest[1], sig))
    if head == "and":
        return conj([formula_from_sexpr(a, sig) for a in rest])
    if head == "or":
        return disj([formula_from_sexpr(a, sig) for a in rest])
    if head == "not":
        if len(rest) != 1:
            raise ParseError("not needs one argument", ln, col)
        return Not(formula_from_sexpr(rest[0], sig))
    if head == "->":
        if len(rest) != 2:
            raise ParseError("-> needs two arguments", ln, col)
        return implies(formula_from_sexpr(rest[0], sig),
                       formula_from_sexpr(rest[1], sig))
    if head in ("exists", "forall"):
        if len(rest) != 2 or not isinstance(rest[0], list):
            raise ParseError(f"{head} needs a variable list and a body",
                             ln, col)
        names = []
        for v in rest[0]:
            if not isinstance(v, tuple) or not v[0].startswith("?"):
                raise ParseError("quantifier variables look like ?x", ln, col)
            names.append(v[0][1:])
        body = formula_from_sexpr(rest[1], sig)
        cls = Exists if head == "exists" else Forall
        return cls(tuple(names), body)
    raise ParseError(f"unknown formula head {head!r}", ln, col)


def parse_formula(text: str, sig: Signature | None = None) -> Formula:
    sxs = read_sexprs(text)
    if len(sxs) != 1:
        raise ParseError("expected exactly one formula")
    return formula_from_sexpr(sxs[0], sig)


def parse_fol(text: str) -> tuple[Signature, list[Formula]]:
    """A .fol document: a signature form followed by formulas."""
    sxs = read_sexprs(text)
    if not sxs:
        raise ParseError("empty input: expected (sig ...) first")
    sig = signature_from_sexpr(sxs[0])
    return sig, [formula_from_sexpr(sx, sig) for sx in sxs[1:]]


def format_fol(sig: Signature, formulas: list[Formula]) -> str:
    lines = [str(sig)]
    lines.extend(str(phi) for phi in formulas)
    return "\n".join(lines) + "\n"
