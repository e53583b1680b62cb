"""Semialgebraic sets: boolean trees over sign atoms ``expr ⋈ 0``.

Atoms are normalized to one of ``<``, ``<=``, ``=`` with zero on the right.
Text form::

    d > 0 & (g <= 0 | 2*g^2 <= 1)
    !(d^2 + 2*d*h <= 0)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as _iproduct
from typing import Mapping

from .expr import Expr, ParseError, PolyLeaf, parse_expr, rational_form, to_expr
from .poly import Polynomial

__all__ = [
    "SemialgSet",
    "Atom",
    "And",
    "Or",
    "Not",
    "TRUE",
    "FALSE",
    "Const",
    "parse_set",
    "atom",
]

RELS = ("<", "<=", "=")


class SemialgSet:
    def __and__(self, other):
        return And((self, _coerce(other)))

    def __or__(self, other):
        return Or((self, _coerce(other)))

    def __invert__(self):
        return Not(self)

    def free_symbols(self) -> frozenset:
        raise NotImplementedError

    def contains_point(self, point: Mapping[str, object], mode: str | None = None) -> bool:
        raise NotImplementedError

    def nnf(self, negate: bool = False) -> "SemialgSet":
        raise NotImplementedError

    def dnf(self) -> list[list["Atom"]]:
        """Clauses of a disjunctive normal form; ``[]`` is empty, ``[[]]`` is everything."""
        return _dnf(self.nnf())

    def cnf(self) -> list[list["Atom"]]:
        """Clauses of a conjunctive normal form; ``[]`` is everything, ``[[]]`` is empty."""
        return _cnf_from_negated_dnf(_dnf(self.nnf(negate=True)))

    def __str__(self):
        return self._str(0)

    def __repr__(self):
        return f"SemialgSet({str(self)!r})"


def _coerce(x) -> SemialgSet:
    if isinstance(x, SemialgSet):
        return x
    if isinstance(x, str):
        return parse_set(x)
    raise TypeError(f"not a set: {x!r}")


@dataclass(frozen=True, eq=True)
class Const(SemialgSet):
    value: bool

    def free_symbols(self):
        return frozenset()

    def contains_point(self, point, mode=None):
        return self.value

    def nnf(self, negate=False):
        return Const(self.value != negate)

    def _str(self, prec):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, eq=True)
class Atom(SemialgSet):
    """``expr rel 0`` with rel in ``<``, ``<=``, ``=``."""

    expr: Expr
    rel: str

    def __post_init__(self):
        if self.rel not in RELS:
            raise ValueError(f"bad relation {self.rel!r}")

    def free_symbols(self):
        return self.expr.free_symbols()

    def value(self, point, mode=None):
        return self.expr.evaluate(point, mode)

    def contains_point(self, point, mode=None):
        v = self.value(point, mode)
        if self.rel == "<":
            return v < 0
        if self.rel == "<=":
            return v <= 0
        return v == 0

    def negate_atom_list(self) -> list["Atom"]:
        """Atoms whose disjunction is the complement."""
        if self.rel == "<":
            return [Atom(-self.expr, "<=")]
        if self.rel == "<=":
            return [Atom(-self.expr, "<")]
        return [Atom(self.expr, "<"), Atom(-self.expr, "<")]

    def closure(self) -> "Atom":
        return Atom(self.expr, "<=") if self.rel == "<" else self

    def nnf(self, negate=False):
        if not negate:
            return self
        alts = self.negate_atom_list()
        return alts[0] if len(alts) == 1 else Or(tuple(alts))

    def _str(self, prec):
        s = _atom_str(self)
        return f"({s})" if prec > 2 else s


def atom(expr, rel: str) -> Atom:
    """Build ``expr rel 0`` for any of ``< <= = > >=``."""
    x = to_expr(expr) if not isinstance(expr, str) else parse_expr(expr)
    if rel in RELS:
        return Atom(x, rel)
    if rel == "==":
        return Atom(x, "=")
    if rel == ">":
        return Atom(-x, "<")
    if rel == ">=":
        return Atom(-x, "<=")
    raise ValueError(f"bad relation {rel!r}")


def _atom_str(a: Atom) -> str:
    # print "q > 0" rather than "-q < 0" when the negation looks simpler
    x = a.expr
    s = str(x)
    if a.rel != "=" and s.startswith("-"):
        flipped = str(-x)
        if not flipped.startswith("-"):
            return f"{flipped} {'>' if a.rel == '<' else '>='} 0"
    return f"{s} {a.rel} 0"


def _flat(cls, items):
    out = []
    for it in items:
        if isinstance(it, cls):
            out.extend(it.args)
        else:
            out.append(it)
    return tuple(out)


@dataclass(frozen=True, eq=True)
class And(SemialgSet):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", _flat(And, tuple(self.args)))

    def free_symbols(self):
        return frozenset().union(*(a.free_symbols() for a in self.args))

    def contains_point(self, point, mode=None):
        return all(a.contains_point(point, mode) for a in self.args)

    def nnf(self, negate=False):
        parts = tuple(a.nnf(negate) for a in self.args)
        return Or(parts) if negate else And(parts)

    def _str(self, prec):
        if not self.args:
            return "true"
        s = " & ".join(a._str(2) for a in self.args)
        return f"({s})" if prec > 2 else s


@dataclass(frozen=True, eq=True)
class Or(SemialgSet):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", _flat(Or, tuple(self.args)))

    def free_symbols(self):
        return frozenset().union(*(a.free_symbols() for a in self.args))

    def contains_point(self, point, mode=None):
        return any(a.contains_point(point, mode) for a in self.args)

    def nnf(self, negate=False):
        parts = tuple(a.nnf(negate) for a in self.args)
        return And(parts) if negate else Or(parts)

    def _str(self, prec):
        if not self.args:
            return "false"
        s = " | ".join(a._str(1) for a in self.args)
        return f"({s})" if prec > 1 else s


@dataclass(frozen=True, eq=True)
class Not(SemialgSet):
    arg: SemialgSet

    def free_symbols(self):
        return self.arg.free_symbols()

    def contains_point(self, point, mode=None):
        return not self.arg.contains_point(point, mode)

    def nnf(self, negate=False):
        return self.arg.nnf(not negate)

    def _str(self, prec):
        return "!" + self.arg._str(3)


def _dnf(s: SemialgSet) -> list[list[Atom]]:
    if isinstance(s, Const):
        return [[]] if s.value else []
    if isinstance(s, Atom):
        return [[s]]
    if isinstance(s, Or):
        out = []
        for a in s.args:
            out.extend(_dnf(a))
        return _dedupe(out)
    if isinstance(s, And):
        out = [[]]
        for a in s.args:
            sub = _dnf(a)
            out = [c1 + c2 for c1, c2 in _iproduct(out, sub)]
            if not out:
                return []
        return _dedupe(out)
    raise TypeError(f"not in negation normal form: {s!r}")


def _dedupe(clauses):
    seen = set()
    out = []
    for c in clauses:
        uniq = tuple(dict.fromkeys(c))
        key = frozenset(uniq)
        if key in seen:
            continue
        seen.add(key)
        out.append(list(uniq))
    return out


def _cnf_from_negated_dnf(neg: list[list[Atom]]) -> list[list[Atom]]:
    # complement of a DNF clause a1 & ... & ak is !a1 | ... | !ak
    out = []
    for clause in neg:
        lits: list[Atom] = []
        for a in clause:
            lits.extend(a.negate_atom_list())
        out.append(lits)
    return _merge_equalities(_dedupe(out))


def _merge_equalities(clauses):
    # unit clauses q <= 0 and -q <= 0 together say q = 0
    units = {}
    for i, c in enumerate(clauses):
        if len(c) == 1 and c[0].rel == "<=":
            n, d = rational_form(c[0].expr)
            units.setdefault((n, d), i)
    drop, eqs = set(), {}
    for (n, d), i in units.items():
        j = units.get((-n, d))
        if j is not None and i not in drop and j not in drop and i != j:
            drop |= {i, j}
            eqs[min(i, j)] = Atom(clauses[i][0].expr, "=")
    out = []
    for i, c in enumerate(clauses):
        if i in eqs:
            out.append([eqs[i]])
        elif i not in drop:
            out.append(c)
    return out


def clause_set(clause: list[Atom]) -> SemialgSet:
    if not clause:
        return TRUE
    return clause[0] if len(clause) == 1 else And(tuple(clause))


def dnf_set(clauses: list[list[Atom]]) -> SemialgSet:
    if not clauses:
        return FALSE
    parts = [clause_set(c) for c in clauses]
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_REL_RE = re.compile(r"<=|>=|==|!=|<|>|=")


def parse_set(text: str) -> SemialgSet:
    p = _SetParser(text)
    s = p.disj()
    p.skip_ws()
    if p.pos != len(p.text):
        raise ParseError(f"unexpected input at {p.pos}: {p.text[p.pos:]!r}")
    return s


class _SetParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek_word(self, *words):
        self.skip_ws()
        for w in words:
            if self.text.startswith(w, self.pos):
                end = self.pos + len(w)
                if w.isalpha() and end < len(self.text) and (self.text[end].isalnum() or self.text[end] == "_"):
                    continue
                return w
        return None

    def disj(self):
        parts = [self.conj()]
        while (w := self.peek_word("|", "or")):
            self.pos += len(w)
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self):
        parts = [self.unary()]
        while (w := self.peek_word("&", "and")):
            self.pos += len(w)
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self):
        w = self.peek_word("!=")
        if w is None and (w := self.peek_word("!", "~", "not")):
            self.pos += len(w)
            return Not(self.unary())
        if self.peek_word("true"):
            self.pos += 4
            return TRUE
        if self.peek_word("false"):
            self.pos += 5
            return FALSE
        if self.peek_word("("):
            # either a parenthesized set or an expression starting with "("
            save = self.pos
            self.pos += 1
            try:
                inner = self.disj()
                self.skip_ws()
                if self.text.startswith(")", self.pos):
                    self.pos += 1
                    if not _REL_RE.match(self.text, self._ws_pos()):
                        return inner
            except ParseError:
                pass
            self.pos = save
        return self.comparison()

    def _ws_pos(self):
        self.skip_ws()
        return self.pos

    def _expr_until_rel_or_logic(self) -> str:
        depth = 0
        start = self.pos
        i = self.pos
        t = self.text
        while i < len(t):
            ch = t[i]
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0:
                    break
                depth -= 1
            elif depth == 0 and (ch in "<>=&|~" or (ch == "!" and not t.startswith("!=", i))):
                break
            elif depth == 0 and ch == "!" and t.startswith("!=", i):
                break
            elif depth == 0 and re.match(r"(and|or)\b", t[i:]) and (i == 0 or not (t[i - 1].isalnum() or t[i - 1] == "_")):
                break
            i += 1
        self.pos = i
        return t[start:i]

    def comparison(self):
        lhs_text = self._expr_until_rel_or_logic()
        if not lhs_text.strip():
            raise ParseError(f"expected expression at {self.pos}")
        self.skip_ws()
        m = _REL_RE.match(self.text, self.pos)
        if not m:
            raise ParseError(f"expected relation at {self.pos} in {self.text!r}")
        rel = m.group(0)
        self.pos = m.end()
        rhs_text = self._expr_until_rel_or_logic()
        if not rhs_text.strip():
            raise ParseError(f"expected expression after {rel!r}")
        lhs, rhs = parse_expr(lhs_text), parse_expr(rhs_text)
        if isinstance(rhs, PolyLeaf) and rhs.poly.is_zero():
            diff = lhs
        elif isinstance(lhs, PolyLeaf) and lhs.poly.is_zero():
            diff = -rhs
        else:
            diff = lhs - rhs
        if rel == "!=":
            return Or((Atom(diff, "<"), Atom(-diff, "<")))
        if rel == "==":
            rel = "="
        return atom(diff, rel)
