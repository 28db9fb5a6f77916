"""Evaluation of formulas in a concrete model.

``eval_qf`` is exact Tarskian evaluation of quantifier-free formulas under
an assignment of model elements.  ``eval_bounded`` evaluates arbitrary
sentences with quantifiers restricted to a finite enumerated pool and
returns a three-valued verdict.  Soundness is kept by adding one opaque
witness per quantifier: a value about which only logically forced facts
(syntactic identity, constructor clashes, acyclicity) are decided.  A
bounded TRUE or FALSE therefore holds in the full model; everything else
is UNKNOWN.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .formulas import And, Eq, Exists, Forall, Formula, N, Ni, Not, Or, Proj
from .models import Model, decompose, enumerate_elements, equal
from .terms import App, Atom, Term, TermError, Var


class Truth(enum.Enum):
    TRUE = "TRUE"
    FALSE = "FALSE"
    UNKNOWN = "UNKNOWN"

    def __invert__(self) -> "Truth":
        if self is Truth.TRUE:
            return Truth.FALSE
        if self is Truth.FALSE:
            return Truth.TRUE
        return Truth.UNKNOWN


def _and3(parts) -> Truth:
    out = Truth.TRUE
    for p in parts:
        if p is Truth.FALSE:
            return Truth.FALSE
        if p is Truth.UNKNOWN:
            out = Truth.UNKNOWN
    return out


def _or3(parts) -> Truth:
    out = Truth.FALSE
    for p in parts:
        if p is Truth.TRUE:
            return Truth.TRUE
        if p is Truth.UNKNOWN:
            out = Truth.UNKNOWN
    return out


# ---------------------------------------------------------------------------
# Exact quantifier-free evaluation
# ---------------------------------------------------------------------------


def eval_expr(m: Model, te: Term, asgn: dict[str, Term]) -> Term:
    """Value of a term expression; projections act as identity off-image."""
    if isinstance(te, Var):
        if te.name not in asgn:
            raise TermError(f"unbound variable ?{te.name}")
        return asgn[te.name]
    if isinstance(te, Atom):
        return te
    if isinstance(te, App):
        return App(te.sym, tuple(eval_expr(m, a, asgn) for a in te.args))
    if isinstance(te, Proj):
        val = eval_expr(m, te.arg, asgn)
        dec = decompose(m, val)
        if dec is not None and dec[0] == te.sym:
            return dec[1][te.index - 1]
        return val
    raise TermError(f"not a term expression: {te!r}")


def eval_qf(m: Model, phi: Formula, asgn: dict[str, Term]) -> bool:
    if isinstance(phi, Eq):
        return equal(m, eval_expr(m, phi.lhs, asgn), eval_expr(m, phi.rhs, asgn))
    if isinstance(phi, Ni):
        dec = decompose(m, eval_expr(m, phi.arg, asgn))
        return dec is None or dec[0] != phi.sym
    if isinstance(phi, N):
        return decompose(m, eval_expr(m, phi.arg, asgn)) is None
    if isinstance(phi, And):
        return all(eval_qf(m, a, asgn) for a in phi.args)
    if isinstance(phi, Or):
        return any(eval_qf(m, a, asgn) for a in phi.args)
    if isinstance(phi, Not):
        return not eval_qf(m, phi.arg, asgn)
    raise TermError(f"not quantifier-free: {phi!r}")


# ---------------------------------------------------------------------------
# Bounded three-valued evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class _Opaque:
    """A stand-in element about which nothing is assumed."""

    tag: int

    def __str__(self) -> str:
        return f"<*{self.tag}>"


@dataclass(frozen=True, slots=True)
class _OpaqueProj:
    """A projection chain applied to an opaque element."""

    base: _Opaque
    chain: tuple[tuple[str, int], ...]

    def __str__(self) -> str:
        return f"<*{self.base.tag}:{self.chain}>"


def _is_partial(v) -> bool:
    if isinstance(v, (_Opaque, _OpaqueProj)):
        return True
    if isinstance(v, App):
        return any(_is_partial(a) for a in v.args)
    return False


def _opaque_inside(op: _Opaque, v) -> bool:
    """Does the opaque occur strictly inside v through constructors only?"""
    if isinstance(v, App):
        return any(a == op or _opaque_inside(op, a) for a in v.args)
    return False


def _eval_expr3(m: Model, te: Term, asgn: dict[str, object]):
    if isinstance(te, Var):
        if te.name not in asgn:
            raise TermError(f"unbound variable ?{te.name}")
        return asgn[te.name]
    if isinstance(te, Atom):
        return te
    if isinstance(te, App):
        return App(te.sym, tuple(_eval_expr3(m, a, asgn) for a in te.args))
    if isinstance(te, Proj):
        val = _eval_expr3(m, te.arg, asgn)
        return _proj3(m, te.index, te.sym, val)
    raise TermError(f"not a term expression: {te!r}")


def _proj3(m: Model, index: int, sym: str, val):
    if isinstance(val, _Opaque):
        return _OpaqueProj(val, ((sym, index),))
    if isinstance(val, _OpaqueProj):
        return _OpaqueProj(val.base, val.chain + ((sym, index),))
    if isinstance(val, App):
        if val.sym == sym:
            return val.args[index - 1]
        return val
    dec = decompose(m, val)
    if dec is not None and dec[0] == sym:
        return dec[1][index - 1]
    return val


def _eq3(m: Model, u, v) -> Truth:
    if u == v:
        return Truth.TRUE
    pu, pv = _is_partial(u), _is_partial(v)
    if not pu and not pv:
        return Truth.TRUE if equal(m, u, v) else Truth.FALSE
    if isinstance(u, _Opaque):
        if _opaque_inside(u, v):
            return Truth.FALSE  # acyclicity forbids x = t(..x..)
        return Truth.UNKNOWN
    if isinstance(v, _Opaque):
        return _eq3(m, v, u)
    if isinstance(u, _OpaqueProj) or isinstance(v, _OpaqueProj):
        return Truth.UNKNOWN
    if isinstance(u, App) and isinstance(v, App):
        if u.sym != v.sym:
            return Truth.FALSE
        return _and3(_eq3(m, a, b) for a, b in zip(u.args, v.args))
    # one side is a concrete element, the other a partial application
    conc, part = (u, v) if not pu else (v, u)
    dec = decompose(m, conc)
    if dec is None:
        return Truth.FALSE  # indecomposable vs application
    if dec[0] != part.sym:
        return Truth.FALSE
    return _and3(_eq3(m, a, b) for a, b in zip(dec[1], part.args))


def _ni3(m: Model, sym: str, val) -> Truth:
    if isinstance(val, (_Opaque, _OpaqueProj)):
        return Truth.UNKNOWN
    if isinstance(val, App):
        return Truth.FALSE if val.sym == sym else Truth.TRUE
    dec = decompose(m, val)
    if dec is not None and dec[0] == sym:
        return Truth.FALSE
    return Truth.TRUE


def _n3(m: Model, val) -> Truth:
    if isinstance(val, (_Opaque, _OpaqueProj)):
        return Truth.UNKNOWN
    if isinstance(val, App):
        return Truth.FALSE
    return Truth.TRUE if decompose(m, val) is None else Truth.FALSE


def _eval3(m: Model, phi: Formula, asgn, pool, counter) -> Truth:
    if isinstance(phi, Eq):
        return _eq3(m, _eval_expr3(m, phi.lhs, asgn),
                    _eval_expr3(m, phi.rhs, asgn))
    if isinstance(phi, Ni):
        return _ni3(m, phi.sym, _eval_expr3(m, phi.arg, asgn))
    if isinstance(phi, N):
        return _n3(m, _eval_expr3(m, phi.arg, asgn))
    if isinstance(phi, And):
        return _and3(_eval3(m, a, asgn, pool, counter) for a in phi.args)
    if isinstance(phi, Or):
        return _or3(_eval3(m, a, asgn, pool, counter) for a in phi.args)
    if isinstance(phi, Not):
        return ~_eval3(m, phi.arg, asgn, pool, counter)
    if isinstance(phi, (Exists, Forall)):
        body: Formula = phi.body
        if len(phi.vars) > 1:
            inner = (Exists if isinstance(phi, Exists) else Forall)(
                phi.vars[1:], phi.body
            )
            body = inner
        var = phi.vars[0]
        results = []
        for e in pool:
            results.append(_eval3(m, body, {**asgn, var: e}, pool, counter))
        counter[0] += 1
        star = _eval3(m, body, {**asgn, var: _Opaque(counter[0])},
                      pool, counter)
        if isinstance(phi, Exists):
            if any(r is Truth.TRUE for r in results):
                return Truth.TRUE
            if star is Truth.TRUE and pool:
                # true for an arbitrary element, hence for some element
                return Truth.TRUE
            if star is Truth.FALSE:
                # no element whatsoever can satisfy the body
                return Truth.FALSE
            return Truth.UNKNOWN
        if any(r is Truth.FALSE for r in results):
            return Truth.FALSE
        if star is Truth.FALSE and pool:
            return Truth.FALSE
        if star is Truth.TRUE:
            # true for an arbitrary element, hence for all elements
            return Truth.TRUE
        return Truth.UNKNOWN
    raise TermError(f"not a formula: {phi!r}")


def eval_bounded(m: Model, sigma: Formula, height_bound: int,
                 atom_bound: int) -> Truth:
    """Three-valued truth of a sentence with pool-restricted quantifiers."""
    from .formulas import free_vars

    if free_vars(sigma):
        raise TermError("eval_bounded expects a sentence")
    pool = list(enumerate_elements(m, height_bound, atom_bound))
    return _eval3(m, sigma, {}, pool, [0])
