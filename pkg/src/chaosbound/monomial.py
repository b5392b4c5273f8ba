"""Monomials in dimension symbols, used for closed-form flattening norms.

A monomial is a product ``base^exponent`` over named bases.  Bases are
either dimension symbols (``"d"``, ``"n"``) or integer literals stored as
their decimal string (``"3"``); literals are folded into a numeric
prefix when rendered.  Exponents are :class:`fractions.Fraction` so that
square roots of norm-squared monomials stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

_SUPERSCRIPT = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


def _is_literal(base: str) -> bool:
    return base.isdigit()


@dataclass(frozen=True)
class Monomial:
    powers: tuple[tuple[str, Fraction], ...] = ()

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Fraction | int]) -> "Monomial":
        items = []
        for base, exp in mapping.items():
            exp = Fraction(exp)
            if exp == 0 or base == "1":
                continue
            items.append((str(base), exp))
        return cls(tuple(sorted(items)))

    @classmethod
    def one(cls) -> "Monomial":
        return cls(())

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self.powers)

    def __mul__(self, other: "Monomial") -> "Monomial":
        acc = self.as_dict()
        for base, exp in other.powers:
            acc[base] = acc.get(base, Fraction(0)) + exp
        return Monomial.from_mapping(acc)

    def __pow__(self, k: Fraction | int) -> "Monomial":
        k = Fraction(k)
        return Monomial.from_mapping({b: e * k for b, e in self.powers})

    def sqrt(self) -> "Monomial":
        return self ** Fraction(1, 2)

    def exponent(self, base: str) -> Fraction:
        return self.as_dict().get(base, Fraction(0))

    def literal_value(self) -> float:
        return math.prod(int(b) ** float(e) for b, e in self.powers if _is_literal(b))

    def symbolic_part(self) -> dict[str, Fraction]:
        return {b: e for b, e in self.powers if not _is_literal(b)}

    def evaluate(self, values: Mapping[str, float] | None = None) -> float:
        values = values or {}
        out = 1.0
        for base, exp in self.powers:
            if _is_literal(base):
                x = int(base)
            else:
                try:
                    x = values[base]
                except KeyError:
                    raise KeyError(f"no numeric value bound for dimension symbol {base!r}") from None
            out *= float(x) ** float(exp)
        return out

    def dominates(self, other: "Monomial") -> bool:
        """True when ``self >= other`` for every assignment of symbols >= 1."""
        mine, theirs = self.symbolic_part(), other.symbolic_part()
        for base in set(mine) | set(theirs):
            if mine.get(base, 0) < theirs.get(base, 0):
                return False
        return self.literal_value() >= other.literal_value() * (1 - 1e-12)

    def render(self, order: Sequence[str] | None = None) -> str:
        if not self.powers:
            return "1"
        literal_int = 1
        pieces = []
        leftovers = []
        for base, exp in self.powers:
            if _is_literal(base):
                if exp.denominator == 1 and exp > 0:
                    literal_int *= int(base) ** exp.numerator
                else:
                    leftovers.append((base, exp))
        symbols = [(b, e) for b, e in self.powers if not _is_literal(b)]
        if order is not None:
            rank = {s: i for i, s in enumerate(order)}
            symbols.sort(key=lambda be: (rank.get(be[0], len(rank)), be[0]))
        symbols.sort(key=lambda be: be[1].denominator != 1)  # stable: roots after integer powers
        multi_letter = any(len(b) > 1 for b, _ in symbols)
        if literal_int != 1:
            pieces.append(str(literal_int))
        halves = [b for b, e in symbols if e == Fraction(1, 2)]
        sep = "·" if multi_letter or leftovers else ""
        for base, exp in leftovers + symbols:
            if exp == Fraction(1, 2) and len(halves) > 1:
                continue
            pieces.append(_render_power(base, exp))
        if len(halves) > 1:
            pieces.append("√(" + sep.join(halves) + ")")
        return sep.join(pieces)

    def __str__(self) -> str:
        return self.render()


def _render_power(base: str, exp: Fraction) -> str:
    if exp == 1:
        return base
    if exp == Fraction(1, 2):
        return f"√{base}"
    if exp.denominator == 1 and exp > 0:
        return base + str(exp.numerator).translate(_SUPERSCRIPT)
    return f"{base}^{{{exp}}}"


def maximal(monomials: Iterable[Monomial]) -> list[Monomial]:
    """Non-dominated members of ``monomials``, deduplicated, in first-seen order."""
    uniq: list[Monomial] = []
    for mono in monomials:
        if mono not in uniq:
            uniq.append(mono)
    keep = []
    for i, a in enumerate(uniq):
        if not any(j != i and b.dominates(a) and not a.dominates(b) for j, b in enumerate(uniq)):
            keep.append(a)
    # equal-valued distinct spellings (e.g. literal 4 vs 2²) collapse to the first
    out: list[Monomial] = []
    for a in keep:
        if not any(a.dominates(b) and b.dominates(a) for b in out):
            out.append(a)
    return out


def render_max(monomials: Sequence[Monomial], order: Sequence[str] | None = None) -> str:
    if not monomials:
        return "0"
    return " ∨ ".join(m.render(order) for m in monomials)
