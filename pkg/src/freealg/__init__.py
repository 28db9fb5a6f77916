"""Symbolic toolkit for the first-order theories of locally free algebras."""

from .terms import (
    App,
    Atom,
    ClashError,
    OccursError,
    ParseError,
    Pattern,
    Signature,
    Term,
    TermError,
    UnificationError,
    Var,
    height,
    parse_signature,
    parse_term,
    substitute,
    unify,
)
from .models import (
    Model,
    ModelMismatchError,
    OMEGA,
    SupplyError,
    WindowError,
    parse_model_spec,
    standard,
    t0_colimit,
    zchain,
)
from .formulas import Eq, Exists, Forall, Formula, N, Ni, Not, Proj
from .qe import Theory, decide_sentence, parse_theory, sat_qf
from .semantics import Truth, eval_bounded, eval_qf

__all__ = [name for name in dir() if not name.startswith("_")]
