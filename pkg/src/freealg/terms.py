"""Signatures, syntactic terms, patterns, and unification with occurs check.

Terms are immutable trees over atoms (named constants of a model) and
variables (written ``?x``).  Signatures are purely functional: every symbol
has arity at least 1 and at least one symbol has arity at least 2, so models
never have constant symbols; generators live in models as atoms instead.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass


class TermError(Exception):
    pass


class ParseError(TermError):
    """Malformed s-expression input; carries line/column."""

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnificationError(TermError):
    pass


class ClashError(UnificationError):
    """Symbol or atom mismatch: injectivity / disjoint-image semantics."""


class OccursError(UnificationError):
    """A variable would have to contain itself: acyclicity semantics."""


@dataclass(frozen=True, slots=True)
class Signature:
    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.symbols]
        if len(set(names)) != len(names):
            raise TermError("signature symbols must be pairwise distinct")
        if not all(ar >= 1 for _, ar in self.symbols):
            raise TermError("signature arities must be >= 1")
        if not any(ar >= 2 for _, ar in self.symbols):
            raise TermError("signature needs a symbol of arity >= 2")

    def arity(self, sym: str) -> int:
        for name, ar in self.symbols:
            if name == sym:
                return ar
        raise TermError(f"unknown symbol {sym!r}")

    def __contains__(self, sym: str) -> bool:
        return any(name == sym for name, _ in self.symbols)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.symbols)

    def wide_symbol(self) -> str:
        """First symbol of arity >= 2; fixed target of chain rewrites."""
        for name, ar in self.symbols:
            if ar >= 2:
                return name
        raise TermError("unreachable: signature invariant")

    def projections(self) -> tuple[tuple[str, int], ...]:
        """The projection expansion: one selector per argument position."""
        return tuple(
            (name, j) for name, ar in self.symbols for j in range(1, ar + 1)
        )

    def __str__(self) -> str:
        inner = " ".join(f"({name} {ar})" for name, ar in self.symbols)
        return f"(sig {inner})"


class Term:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Var(Term):
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True, slots=True)
class Atom(Term):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class App(Term):
    sym: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        inner = " ".join(str(a) for a in self.args)
        return f"({self.sym} {inner})"


def app(sym: str, *args: Term) -> App:
    return App(sym, tuple(args))


def height(t: Term) -> int:
    """Height of a term: 0 on variables and atoms, max+1 on applications."""
    if isinstance(t, App):
        return 1 + max(height(a) for a in t.args)
    return 0


def variables(t: Term) -> list[str]:
    """Variable names in depth-first left-to-right order, with repeats."""
    if isinstance(t, Var):
        return [t.name]
    if isinstance(t, App):
        out: list[str] = []
        for a in t.args:
            out.extend(variables(a))
        return out
    return []


def atoms(t: Term) -> set[str]:
    if isinstance(t, Atom):
        return {t.name}
    if isinstance(t, App):
        out: set[str] = set()
        for a in t.args:
            out |= atoms(a)
        return out
    return set()


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, App):
        return all(is_ground(a) for a in t.args)
    return True


def check_term(t: Term, sig: Signature) -> None:
    """Raise unless every application matches its symbol's arity."""
    if isinstance(t, App):
        if sig.arity(t.sym) != len(t.args):
            raise TermError(f"arity mismatch for {t.sym!r} in {t}")
        for a in t.args:
            check_term(a, sig)


def substitute(t: Term, subst: dict[str, Term]) -> Term:
    """Simultaneous replacement of bound variables; unbound ones unchanged."""
    if isinstance(t, Var):
        return subst.get(t.name, t)
    if isinstance(t, App):
        return App(t.sym, tuple(substitute(a, subst) for a in t.args))
    return t


def compose(outer: dict[str, Term], inner: dict[str, Term]) -> dict[str, Term]:
    """Substitution composition: applying the result equals inner then outer."""
    out = {v: substitute(t, outer) for v, t in inner.items()}
    for v, t in outer.items():
        if v not in out:
            out[v] = t
    return {v: t for v, t in out.items() if t != Var(v)}


def occurs(name: str, t: Term) -> bool:
    if isinstance(t, Var):
        return t.name == name
    if isinstance(t, App):
        return any(occurs(name, a) for a in t.args)
    return False


def unify(p: Term, q: Term) -> dict[str, Term]:
    """Most general unifier of two terms, atoms acting as rigid constants.

    Raises ClashError on symbol/atom mismatch and OccursError when a
    variable would have to contain itself.  The result is idempotent and
    substituting it into either input yields the same term.
    """
    subst: dict[str, Term] = {}
    work = [(p, q)]
    while work:
        a, b = work.pop()
        a = substitute(a, subst)
        b = substitute(b, subst)
        if a == b:
            continue
        if isinstance(a, Var):
            if occurs(a.name, b):
                raise OccursError(f"{a} occurs in {b}")
            subst = compose({a.name: b}, subst)
        elif isinstance(b, Var):
            work.append((b, a))
        elif isinstance(a, App) and isinstance(b, App):
            if a.sym != b.sym or len(a.args) != len(b.args):
                raise ClashError(f"{a.sym} vs {b.sym}")
            work.extend(zip(a.args, b.args))
        else:
            # atom vs atom with different names, or atom vs application
            raise ClashError(f"{a} vs {b}")
    return subst


@dataclass(frozen=True, slots=True)
class Pattern:
    """An existential shape: the set of elements ``t(z-bar, params)``.

    Variables of the body are the existential slots; they may repeat.
    Parameters are atom names pinned to concrete model elements.
    """

    body: Term
    params: frozenset[str] = frozenset()

    def __str__(self) -> str:
        vs = sorted(set(variables(self.body)))
        if not vs:
            return f"(= y {self.body})"
        return f"(exists ({' '.join('?' + v for v in vs)}) (= y {self.body}))"


def canonical_pattern(p: Pattern) -> Pattern:
    """Rename existential variables depth-first left-to-right to z1, z2, ..."""
    order: list[str] = []
    for v in variables(p.body):
        if v not in order:
            order.append(v)
    ren = {v: Var(f"z{i + 1}") for i, v in enumerate(order)}
    return Pattern(substitute(p.body, ren), p.params)


def match(pattern_body: Term, ground: Term) -> dict[str, Term] | None:
    """One-sided match of a pattern body against a ground term, or None."""
    binding: dict[str, Term] = {}

    def go(pt: Term, gt: Term) -> bool:
        if isinstance(pt, Var):
            if pt.name in binding:
                return binding[pt.name] == gt
            binding[pt.name] = gt
            return True
        if isinstance(pt, Atom):
            return pt == gt
        if isinstance(pt, App) and isinstance(gt, App):
            return pt.sym == gt.sym and all(
                go(a, b) for a, b in zip(pt.args, gt.args)
            )
        return False

    return binding if go(pattern_body, ground) else None


# ---------------------------------------------------------------------------
# S-expression reading and term parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def tokenize(text: str) -> list[tuple[str, int, int]]:
    toks = []
    for ln, line in enumerate(text.splitlines() or [""], start=1):
        body = line.split("#", 1)[0]
        for m in _TOKEN.finditer(body):
            toks.append((m.group(), ln, m.start() + 1))
    return toks


def read_sexprs(text: str):
    """Parse text into nested lists of (token, line, col) leaves."""
    toks = tokenize(text)
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input")
        tok, ln, col = toks[pos]
        pos += 1
        if tok == "(":
            items = []
            while True:
                if pos >= len(toks):
                    raise ParseError("unbalanced '('", ln, col)
                if toks[pos][0] == ")":
                    pos += 1
                    return items
                items.append(read())
        if tok == ")":
            raise ParseError("unexpected ')'", ln, col)
        return (tok, ln, col)

    out = []
    while pos < len(toks):
        out.append(read())
    return out


def term_from_sexpr(sx, sig: Signature | None = None) -> Term:
    if isinstance(sx, tuple):
        tok, ln, col = sx
        if tok.startswith("?"):
            if len(tok) == 1:
                raise ParseError("empty variable name", ln, col)
            return Var(tok[1:])
        return Atom(tok)
    if not sx:
        raise ParseError("empty application")
    head = sx[0]
    if isinstance(head, list):
        raise ParseError("symbol expected at head of application")
    sym, ln, col = head
    args = tuple(term_from_sexpr(a, sig) for a in sx[1:])
    if sig is not None:
        if sym not in sig:
            raise ParseError(f"unknown symbol {sym!r}", ln, col)
        if sig.arity(sym) != len(args):
            raise ParseError(f"arity mismatch for {sym!r}", ln, col)
    return App(sym, args)


def parse_term(text: str, sig: Signature | None = None) -> Term:
    sxs = read_sexprs(text)
    if len(sxs) != 1:
        raise ParseError("expected exactly one term")
    return term_from_sexpr(sxs[0], sig)


def signature_from_sexpr(sx) -> Signature:
    if isinstance(sx, tuple) or not sx or sx[0][0] != "sig":
        raise ParseError("expected (sig (name arity) ...)")
    symbols = []
    for entry in sx[1:]:
        if isinstance(entry, tuple) or len(entry) != 2:
            raise ParseError("expected (name arity) in signature")
        name = entry[0][0]
        try:
            ar = int(entry[1][0])
        except ValueError:
            raise ParseError(f"bad arity for {name!r}", entry[1][1], entry[1][2])
        symbols.append((name, ar))
    return Signature(tuple(symbols))


def parse_signature(text: str) -> Signature:
    sxs = read_sexprs(text)
    if len(sxs) != 1:
        raise ParseError("expected exactly one signature form")
    return signature_from_sexpr(sxs[0])


def fresh_names(prefix: str, avoid: set[str]):
    for i in itertools.count(1):
        name = f"{prefix}{i}"
        if name not in avoid:
            avoid.add(name)
            yield name
