"""Computable locally free algebras with decidable equality.

Three families of models are provided, all sharing one element
representation (ground terms over model atoms):

* ``standard(sig, k)`` - the term algebra over generators ``e1..ek``
  (``k = OMEGA`` for an unbounded generator pool).
* ``zchain(sig, k, c)`` - the standard model augmented by ``c`` two-sided
  chains of atoms ``u{j}_{n}`` (``n`` ranging over a clamped window of the
  integers) subject to the rewrite ``u{j}_{n} = f0(u{j}_{n+1}, ...)`` where
  ``f0`` is the first symbol of arity >= 2.  This is a colimit of free
  algebras along injective maps, hence locally free, with the same
  indecomposable census ``k`` as the standard model.
* ``t0_colimit(sig)`` - chain atoms ``g{n}`` (``n`` a natural number) under
  the same rewrite and no generators; it has no indecomposable elements.

Equality of elements is the congruence generated by the chain rewrites and
is decided lazily: a chain atom equals an application only if the
application's head is the rewrite symbol and every argument equals the
successor atom.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache

from .terms import App, Atom, Signature, Term, TermError, Var

OMEGA = "omega"

STD = "std"
ZCHAIN = "zchain"
T0 = "t0"

DEFAULT_WINDOW = 32


class ModelMismatchError(TermError):
    """An element references atoms unknown to the model."""


class WindowError(TermError):
    """A chain index left the clamped window; raised instead of truncating."""


class SupplyError(TermError):
    """A fresh indecomposable was requested but the census is exhausted."""


_GEN = re.compile(r"^e([1-9][0-9]*)$")
_CHAIN = re.compile(r"^u([0-9]+)_(-?[0-9]+)$")
_T0CHAIN = re.compile(r"^g([0-9]+)$")


@dataclass(frozen=True, slots=True)
class Model:
    kind: str
    signature: Signature
    k: int | str  # generator census; OMEGA for the unbounded pool
    chains: int = 0
    window: int = DEFAULT_WINDOW

    def __str__(self) -> str:
        if self.kind == STD:
            return f"std:{self.k}"
        if self.kind == ZCHAIN:
            return f"zchain:{self.k}:{self.chains}"
        return "t0"


def standard(sig: Signature, k: int | str) -> Model:
    if k != OMEGA and (not isinstance(k, int) or k < 0):
        raise TermError(f"bad generator count {k!r}")
    return Model(STD, sig, k)


def zchain(sig: Signature, k: int | str, chains: int = 1,
           window: int = DEFAULT_WINDOW) -> Model:
    if chains < 1:
        raise TermError("zchain needs at least one chain")
    return Model(ZCHAIN, sig, k, chains, window)


def t0_colimit(sig: Signature) -> Model:
    return Model(T0, sig, 0)


def parse_model_spec(spec: str, sig: Signature,
                     window: int = DEFAULT_WINDOW) -> Model:
    """Parse CLI model specs: ``std:k``, ``std:omega``, ``zchain:k:c``, ``t0``."""
    parts = spec.split(":")
    try:
        if parts[0] == STD and len(parts) == 2:
            k = OMEGA if parts[1] == OMEGA else int(parts[1])
            return standard(sig, k)
        if parts[0] == ZCHAIN and len(parts) == 3:
            k = OMEGA if parts[1] == OMEGA else int(parts[1])
            return Model(ZCHAIN, sig, k, int(parts[2]), window)
        if parts[0] == T0 and len(parts) == 1:
            return t0_colimit(sig)
    except ValueError:
        pass
    raise TermError(f"bad model spec {spec!r}")


def census(m: Model) -> int | str:
    """Number of indecomposable elements: k, or 0 for the colimit model."""
    return 0 if m.kind == T0 else m.k


def generator(i: int) -> Atom:
    return Atom(f"e{i}")


def chain_atom(j: int, n: int) -> Atom:
    return Atom(f"u{j}_{n}")


def t0_atom(n: int) -> Atom:
    return Atom(f"g{n}")


def atom_info(m: Model, name: str):
    """Classify an atom name: ('gen', i) or ('chain', j, n), else raise."""
    g = _GEN.match(name)
    if g:
        i = int(g.group(1))
        if m.k == OMEGA or (m.kind != T0 and i <= m.k):
            return ("gen", i)
        raise ModelMismatchError(f"atom {name!r} not in {m}")
    if m.kind == ZCHAIN:
        c = _CHAIN.match(name)
        if c:
            j, n = int(c.group(1)), int(c.group(2))
            if j < m.chains:
                if abs(n) > m.window:
                    raise WindowError(f"chain index {n} outside window")
                return ("chain", j, n)
    if m.kind == T0:
        c = _T0CHAIN.match(name)
        if c:
            return ("chain", 0, int(c.group(1)))
    raise ModelMismatchError(f"atom {name!r} not in {m}")


def check_element(m: Model, t: Term) -> None:
    if isinstance(t, Var):
        raise ModelMismatchError(f"element contains variable {t}")
    if isinstance(t, Atom):
        atom_info(m, t.name)
        return
    if m.signature.arity(t.sym) != len(t.args):
        raise ModelMismatchError(f"arity mismatch in {t}")
    for a in t.args:
        check_element(m, a)


def _successor(m: Model, name: str) -> Atom:
    info = atom_info(m, name)
    if info[0] != "chain":
        raise TermError(f"{name!r} is not a chain atom")
    if m.kind == ZCHAIN:
        j, n = info[1], info[2]
        if n + 1 > m.window:
            raise WindowError(f"chain index {n + 1} outside window")
        return chain_atom(j, n + 1)
    return t0_atom(info[2] + 1)


def _predecessor(m: Model, name: str) -> Atom | None:
    """Chain atom one rewrite step up, or None when none exists (t0 at 0)."""
    info = atom_info(m, name)
    if info[0] != "chain":
        return None
    if m.kind == ZCHAIN:
        j, n = info[1], info[2]
        if n - 1 < -m.window:
            raise WindowError(f"chain index {n - 1} outside window")
        return chain_atom(j, n - 1)
    n = info[2]
    return t0_atom(n - 1) if n >= 1 else None


def decompose(m: Model, a: Term):
    """Unique constructor decomposition ``(symbol, args)`` or None.

    Generator atoms are indecomposable; chain atoms decompose through
    their defining rewrite.
    """
    if isinstance(a, App):
        return a.sym, a.args
    info = atom_info(m, a.name)
    if info[0] == "gen":
        return None
    succ = _successor(m, a.name)
    f0 = m.signature.wide_symbol()
    return f0, (succ,) * m.signature.arity(f0)


@lru_cache(maxsize=200000)
def _equal(m: Model, a: Term, b: Term) -> bool:
    if a == b:
        return True
    if isinstance(a, Atom) and isinstance(b, Atom):
        # distinct names: equal only through rewrites, which preserve the
        # atom on the chain; distinct chain atoms stay distinct
        atom_info(m, a.name)
        atom_info(m, b.name)
        return False
    if isinstance(a, Atom):
        info = atom_info(m, a.name)
        if info[0] == "gen":
            return False
        f0 = m.signature.wide_symbol()
        if not isinstance(b, App) or b.sym != f0:
            return False
        succ = _successor(m, a.name)
        return all(_equal(m, succ, arg) for arg in b.args)
    if isinstance(b, Atom):
        return _equal(m, b, a)
    if a.sym != b.sym:
        return False
    return all(_equal(m, x, y) for x, y in zip(a.args, b.args))


def equal(m: Model, a: Term, b: Term) -> bool:
    check_element(m, a)
    check_element(m, b)
    return _equal(m, a, b)


@lru_cache(maxsize=200000)
def canon(m: Model, t: Term) -> Term:
    """Canonical representative: collapse full rewrite steps bottom-up.

    Two elements are equal in the model iff their canonical forms are
    syntactically identical.
    """
    if isinstance(t, Atom):
        atom_info(m, t.name)
        return t
    args = tuple(canon(m, a) for a in t.args)
    if m.kind in (ZCHAIN, T0) and t.sym == m.signature.wide_symbol():
        first = args[0]
        if isinstance(first, Atom) and all(a == first for a in args):
            info = atom_info(m, first.name)
            if info[0] == "chain":
                pred = _predecessor(m, first.name)
                if pred is not None:
                    return pred
    return App(t.sym, args)


def key(m: Model, t: Term) -> str:
    """Hashable identity of an element under the model congruence."""
    return str(canon(m, t))


@dataclass(frozen=True, slots=True)
class SkeletonResult:
    shape: Term | None  # None encodes bottom
    closure: tuple[Term, ...]

    @property
    def is_bottom(self) -> bool:
        return self.shape is None


def _unfold(m: Model, a: Term, budget: int, counter, depth: int):
    """Full unfolding to the depth budget, stopping at indecomposables.

    Returns (shape, fillers, deepest leaf level)."""
    dec = None if budget == 0 else decompose(m, a)
    if dec is None:
        return Var(f"x{next(counter)}"), [a], depth
    sym, args = dec
    shapes, fillers, deepest = [], [], depth
    for arg in args:
        sh, fl, dp = _unfold(m, arg, budget - 1, counter, depth + 1)
        shapes.append(sh)
        fillers.extend(fl)
        deepest = max(deepest, dp)
    return App(sym, tuple(shapes)), fillers, deepest


def skeleton(m: Model, a: Term, n: int) -> SkeletonResult:
    """Height-n pattern above ``a`` and its fillers, or bottom.

    Bottom is returned exactly when every path of ``a`` ends in an
    indecomposable strictly before depth n.
    """
    check_element(m, a)
    counter = itertools.count(1)
    shape, fillers, deepest = _unfold(m, a, n, counter, 0)
    if deepest < n:
        return SkeletonResult(None, ())
    return SkeletonResult(shape, tuple(fillers))


def skeleton_fallback(m: Model, a: Term, n: int):
    """Largest l <= n with a defined skeleton, plus that skeleton."""
    check_element(m, a)
    counter = itertools.count(1)
    _, _, deepest = _unfold(m, a, n, counter, 0)
    l = min(n, deepest)
    return l, skeleton(m, a, l)


def dc(m: Model, a: Term, n: int) -> tuple[Term, ...]:
    """Fillers of the height-n skeleton; empty on bottom."""
    return skeleton(m, a, n).closure


def dc_comprehensive(m: Model, a: Term, n: int) -> list[Term]:
    """Union of dc_l(a) for l <= n, deduplicated under model equality."""
    seen: set[str] = set()
    out: list[Term] = []
    for l in range(n + 1):
        for e in dc(m, a, l):
            kk = key(m, e)
            if kk not in seen:
                seen.add(kk)
                out.append(e)
    return out


def seed_atoms(m: Model, atom_bound: int) -> list[Atom]:
    if atom_bound <= 0:
        return []
    if m.kind == STD:
        top = atom_bound if m.k == OMEGA else min(m.k, atom_bound)
        return [generator(i) for i in range(1, top + 1)]
    if m.kind == ZCHAIN:
        top = atom_bound if m.k == OMEGA else min(m.k, atom_bound)
        gens = [generator(i) for i in range(1, top + 1)]
        zeros = [chain_atom(j, 0) for j in range(m.chains)]
        return (gens + zeros)[:atom_bound]
    return [t0_atom(n) for n in range(atom_bound)]


def enumerate_elements(m: Model, height_bound: int, atom_bound: int):
    """Deterministic stream of pairwise-inequal elements within bounds.

    Ordered by construction height, then lexicographically on the printed
    canonical form.  Elements whose canonical form collapses to one already
    produced are skipped.
    """
    seen: set[str] = set()
    layer: list[Term] = []
    for at in seed_atoms(m, atom_bound):
        kk = key(m, at)
        if kk not in seen:
            seen.add(kk)
            layer.append(canon(m, at))
    layer.sort(key=str)
    pool = list(layer)
    yield from layer
    for _ in range(height_bound):
        fresh: list[Term] = []
        for sym, ar in m.signature.symbols:
            for combo in itertools.product(pool, repeat=ar):
                c = canon(m, App(sym, combo))
                kk = str(c)
                if kk not in seen:
                    seen.add(kk)
                    fresh.append(c)
        fresh.sort(key=str)
        pool.extend(fresh)
        yield from fresh


def indecomposables(m: Model, limit: int) -> list[Term]:
    """First min(limit, census) indecomposable elements in canonical order."""
    n = census(m)
    top = limit if n == OMEGA else min(n, limit)
    return [generator(i) for i in range(1, top + 1)]


def fresh_indecomposable(m: Model, used: set[str]) -> Term:
    """Least generator outside ``used`` (by canonical key)."""
    top = itertools.count(1) if census(m) == OMEGA else range(1, census(m) + 1)
    for i in top:
        g = generator(i)
        if key(m, g) not in used:
            return g
    raise SupplyError(f"no fresh indecomposable left in {m}")


def subterm_elements(m: Model, a: Term) -> list[Term]:
    """Subterms of the canonical representation, as elements."""
    out: list[Term] = []
    seen: set[str] = set()

    def go(t: Term):
        kk = str(t)
        if kk in seen:
            return
        seen.add(kk)
        out.append(t)
        if isinstance(t, App):
            for arg in t.args:
                go(arg)

    go(canon(m, a))
    return out
