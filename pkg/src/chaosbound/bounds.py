"""Bound profiles for matrix chaoses.

Every profile is a short sum of terms of the form

    constant · factor^q · log(d+m)^e · parameter

where the constant is an unspecified q-dependent constant (tagged ``C_q``
for upper bounds, ``c_q`` for lower bounds) and numeric evaluation sets
it to 1.  Logarithms are natural.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .flattening import ChaosParameters, chaos_parameters
from .schema import (
    BERNOULLI,
    CENTERED_CHISQ1,
    EDGE_RADEMACHER,
    GAUSSIAN,
    RADEMACHER,
    ChaosSchema,
    DistributionSpec,
)

CONSTANTS_NOTE = "unspecified constants C_q, c_q set to 1"


class Theorem(str, enum.Enum):
    NCK_UPPER = "NCK_upper"
    NCK_UPPER_ALT = "NCK_upper_alt"
    NCK_LOWER = "NCK_lower"
    STRONG_NCK = "StrongNCK"
    ROSENTHAL_UPPER = "Rosenthal_upper"
    ROSENTHAL_LOWER = "Rosenthal_lower"
    STRONG_ROSENTHAL = "StrongRosenthal"


UPPER_PROFILES = (Theorem.NCK_UPPER, Theorem.STRONG_NCK, Theorem.ROSENTHAL_UPPER, Theorem.STRONG_ROSENTHAL)
ALL_PROFILES = tuple(Theorem)

# --------------------------------------------------------------------------
# distribution parameters


def lp_exponent(x: float) -> int:
    """Integer moment order used for α(h): max(2, floor(log x))."""
    return max(2, int(math.floor(math.log(x) + 1e-12)))


def _gaussian_abs_moment(k: float) -> float:
    return 2.0 ** (k / 2) * special.gamma((k + 1) / 2) / math.sqrt(math.pi)


def _chisq_abs_moment(k: float) -> float:
    """E|g^2 - 1|^k."""
    dens = lambda x: 2.0 * math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    f = lambda x: abs(x * x - 1.0) ** k * dens(x)
    a, _ = integrate.quad(f, 0.0, 1.0)
    b, _ = integrate.quad(f, 1.0, np.inf, limit=200)
    return a + b


def _bernoulli_levels(p: float) -> tuple[float, float]:
    s = math.sqrt(p * (1 - p))
    return (1 - p) / s, p / s


def lp_norm(dist: DistributionSpec, k: float) -> float:
    """‖h‖_{L^k}."""
    kind = dist.kind
    if kind == GAUSSIAN:
        return _gaussian_abs_moment(k) ** (1 / k)
    if kind in (RADEMACHER, EDGE_RADEMACHER):
        return 1.0
    if kind == BERNOULLI:
        p = float(dist.param)
        a, b = _bernoulli_levels(p)
        # factor a^k out for stability at small p
        return a * (p + (1 - p) * (b / a) ** k) ** (1 / k)
    if kind == CENTERED_CHISQ1:
        return _chisq_abs_moment(k) ** (1 / k)
    raise ValueError(f"unknown distribution kind {kind!r}")


def psi2_norm(dist: DistributionSpec) -> float:
    """inf{t > 0 : E exp(h²/t²) ≤ 2}."""
    kind = dist.kind
    if kind == GAUSSIAN:
        return math.sqrt(8.0 / 3.0)
    if kind in (RADEMACHER, EDGE_RADEMACHER):
        return 1.0 / math.sqrt(math.log(2.0))
    if kind == BERNOULLI:
        p = float(dist.param)
        a, b = _bernoulli_levels(p)

        def excess(t):
            # log of E exp(h²/t²) minus log 2, written to avoid overflow
            return np.logaddexp(math.log(p) + a * a / t**2, math.log1p(-p) + b * b / t**2) - math.log(2.0)

        hi = max(a, b, 1.0)
        while excess(hi) > 0:
            hi *= 2
        return optimize.brentq(excess, 1e-3 * hi, hi, xtol=1e-14, rtol=1e-12)
    if kind == CENTERED_CHISQ1:
        return math.inf  # (g²-1)² grows like g⁴, so no gaussian tail
    raise ValueError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True)
class DistributionParams:
    kind: str
    L1: float
    psi2: float
    alpha: float
    alpha_order: int
    variance: float

    @property
    def alpha_unit(self) -> float:
        """α of the unit-variance rescaling h/√var."""
        return self.alpha / math.sqrt(self.variance)


def distribution_params(dist: DistributionSpec, d: int, m: int) -> DistributionParams:
    if d < 1 or m < 1 or d + m < 2:
        raise ValueError("need d, m >= 1")
    if dist.kind == BERNOULLI and not 0.0 < float(dist.param) < 1.0:
        raise ValueError("Bernoulli parameter must lie in (0, 1)")
    k = lp_exponent(d + m)
    return DistributionParams(
        kind=dist.kind,
        L1=lp_norm(dist, 1),
        psi2=psi2_norm(dist),
        alpha=lp_norm(dist, k),
        alpha_order=k,
        variance=dist.variance,
    )


# --------------------------------------------------------------------------
# profiles

PARAM_SYMBOL = {"sigma": "σ", "v": "v", "r": "r"}
FACTOR_SYMBOL = {"psi2": "‖h‖_ψ₂", "L1": "‖h‖_L¹", "alpha": "α(h)", "Llogm": "‖h‖_L^{log m}"}


@dataclass(frozen=True)
class Term:
    sign: int
    constant_tag: str
    factor: str | None
    log_q: int  # log exponent is (log_q * q + log_c) / 2
    log_c: int
    parameter: str
    coefficient: float = 1.0  # factor^q times any variance rescaling, numeric

    def log_exponent(self, q: int) -> Fraction:
        return Fraction(self.log_q * q + self.log_c, 2)

    def log_exponent_text(self) -> str:
        if self.log_q == 0:
            return str(Fraction(self.log_c, 2))
        head = "q" if self.log_c == 0 else f"(q+{self.log_c})" if self.log_c > 0 else f"(q{self.log_c})"
        return f"{head}/2"

    def canonical(self) -> str:
        parts = [self.constant_tag]
        if self.factor:
            parts.append(f"{FACTOR_SYMBOL[self.factor]}^q")
        if self.log_q or self.log_c:
            parts.append(f"log(d+m)^{{{self.log_exponent_text()}}}")
        parts.append(PARAM_SYMBOL[self.parameter])
        return " · ".join(parts)

    def value(self, q: int, logdm: float, params: Mapping[str, float]) -> float:
        return self.sign * self.coefficient * logdm ** float(self.log_exponent(q)) * params[self.parameter]


@dataclass
class BoundProfile:
    theorem: Theorem
    q: int
    d: int
    m: int
    terms: list[Term]
    term_values: list[float]
    numeric_value: float
    note: str = CONSTANTS_NOTE

    def canonical(self) -> str:
        out = ""
        for i, t in enumerate(self.terms):
            if i == 0:
                out = ("- " if t.sign < 0 else "") + t.canonical()
            else:
                out += (" - " if t.sign < 0 else " + ") + t.canonical()
        return out

    def serialize(self) -> str:
        lines = [f"{self.theorem.value}: {self.canonical()}"]
        for t, v in zip(self.terms, self.term_values):
            lines.append(f"  {'-' if t.sign < 0 else '+'} {t.canonical()} = {abs(v):.6g}")
        lines.append(f"  value = {self.numeric_value:.6g} ({self.note})")
        return "\n".join(lines)

    def symbolic(self, cp: ChaosParameters, order: Sequence[str] | None = None) -> str:
        """Profile with q substituted and parameters written as monomial maxima."""
        pieces = []
        for i, t in enumerate(self.terms):
            parts = [] if t.constant_tag == "C_q" else [t.constant_tag]
            if t.factor:
                parts.append(FACTOR_SYMBOL[t.factor] + (f"^{self.q}" if self.q != 1 else ""))
            e = t.log_exponent(self.q)
            if e:
                parts.append("log(d+m)" if e == 1 else f"log(d+m)^{e}" if e.denominator == 1 else f"log(d+m)^{{{e}}}")
            rendered = cp[t.parameter].render(order)
            parts.append(f"({rendered})" if "∨" in rendered else rendered)
            sep = " - " if t.sign < 0 else " + "
            pieces.append(("- " if t.sign < 0 else "") if i == 0 else sep)
            pieces.append(" · ".join(parts))
        return "".join(pieces)


def _structure(theorem: Theorem) -> list[Term]:
    T = Term
    return {
        Theorem.NCK_UPPER: [T(1, "C_q", "psi2", 1, 0, "sigma")],
        Theorem.NCK_UPPER_ALT: [T(1, "C_q", "Llogm", 1, 0, "sigma")],
        Theorem.NCK_LOWER: [T(1, "c_q", "L1", 0, 0, "sigma")],
        Theorem.STRONG_NCK: [T(1, "C_q", "psi2", 0, 0, "sigma"), T(1, "C_q", "psi2", 1, 2, "v")],
        Theorem.ROSENTHAL_UPPER: [T(1, "C_q", None, 1, 0, "sigma"), T(1, "C_q", "alpha", 1, 1, "r")],
        Theorem.ROSENTHAL_LOWER: [T(1, "c_q", None, 0, 0, "sigma"), T(-1, "C_q", "alpha", 1, 0, "r")],
        Theorem.STRONG_ROSENTHAL: [T(1, "C_q", None, 0, 0, "sigma"), T(1, "C_q", "alpha", 1, 3, "v")],
    }[theorem]


def _factor_value(factor: str | None, dp: DistributionParams, dist: DistributionSpec | None, m: int) -> float:
    if factor is None:
        return 1.0
    if factor == "psi2":
        return dp.psi2
    if factor == "L1":
        return dp.L1
    if factor == "alpha":
        return dp.alpha_unit
    if factor == "Llogm":
        if dist is None:
            raise ValueError("the L^{log m} variant needs the distribution")
        return lp_norm(dist, lp_exponent(max(m, 2)))
    raise ValueError(factor)


def bound_profile(
    theorem: Theorem | str,
    params: DistributionParams,
    cp: ChaosParameters,
    q: int,
    d: int,
    m: int,
    dist: DistributionSpec | None = None,
    schema_q: int | None = None,
) -> BoundProfile:
    """Evaluate one profile with all unspecified constants equal to 1.

    Rosenthal-type profiles assume unit variance; for other variances the
    chaos is rescaled to h/√var and the result multiplied back by var^{q/2}.
    """
    theorem = Theorem(theorem)
    if q < 1:
        raise ValueError("q must be at least 1")
    if schema_q is not None and schema_q != q:
        raise ValueError(f"q={q} does not match the schema order {schema_q}")
    numeric = cp.numeric()
    if any(v is None for v in numeric.values()):
        raise ValueError("chaos parameters need numeric dimensions")
    logdm = math.log(d + m)
    rosenthal = theorem in (Theorem.ROSENTHAL_UPPER, Theorem.ROSENTHAL_LOWER, Theorem.STRONG_ROSENTHAL)
    scale = params.variance ** (q / 2) if rosenthal else 1.0
    terms, values = [], []
    for t in _structure(theorem):
        coef = _factor_value(t.factor, params, dist, m) ** q * scale
        term = Term(t.sign, t.constant_tag, t.factor, t.log_q, t.log_c, t.parameter, coef)
        terms.append(term)
        values.append(term.value(q, logdm, numeric) if numeric[t.parameter] else 0.0)
    return BoundProfile(theorem, q, d, m, terms, values, float(sum(values)))


def profile_skeleton(theorem: Theorem, q: int) -> BoundProfile:
    """Term structure only, for schemas whose dimensions are still symbolic."""
    terms = _structure(theorem)
    return BoundProfile(theorem, q, 0, 0, terms, [math.nan] * len(terms), math.nan)


def schema_profiles(
    schema: ChaosSchema, values: Mapping[str, float] | None = None, theorems: Sequence[Theorem] = ALL_PROFILES
) -> tuple[ChaosParameters, dict[Theorem, BoundProfile]]:
    bound = schema.bind(values) if values else schema
    cp = chaos_parameters(bound)
    dp = distribution_params(bound.distribution, bound.d, bound.m)
    out = {
        th: bound_profile(th, dp, cp, bound.q, bound.d, bound.m, bound.distribution, bound.q) for th in theorems
    }
    return cp, out


@dataclass
class BestBound:
    profile: BoundProfile
    candidates: dict[Theorem, BoundProfile]
    regimes: list[tuple[str, float, bool]] = field(default_factory=list)

    def explanation(self) -> str:
        lines = [f"minimum: {self.profile.theorem.value} = {self.profile.numeric_value:.6g} ({CONSTANTS_NOTE})"]
        for name, ratio, holds in self.regimes:
            lines.append(f"  {name}: ratio {ratio:.3g} -> {'holds' if holds else 'fails'}")
        return "\n".join(lines)


def best_bound(schema: ChaosSchema, values: Mapping[str, float] | None = None) -> BestBound:
    """Smallest of the four upper profiles, with the regime conditions checked numerically.

    Each regime ratio compares the correction term of a strong inequality
    with its leading σ term; the condition holds when the ratio is below 1.
    """
    cp, profiles = schema_profiles(schema, values, UPPER_PROFILES)
    best = min(profiles.values(), key=lambda p: (p.numeric_value, UPPER_PROFILES.index(p.theorem)))
    regimes = []
    for th, label in (
        (Theorem.STRONG_NCK, "log^{(q+2)/2} v << σ"),
        (Theorem.ROSENTHAL_UPPER, "α^q log^{1/2} r << σ"),
        (Theorem.STRONG_ROSENTHAL, "α^q log^{(q+3)/2} v << σ"),
    ):
        lead, corr = profiles[th].term_values
        ratio = corr / lead if lead else math.inf
        regimes.append((label, ratio, ratio < 1))
    return BestBound(best, profiles, regimes)


def partial_nck_log_power(k: int, q: int) -> Fraction:
    """Log exponent after k of q NCK iterations."""
    if q < 0 or not 0 <= k <= q:
        raise ValueError(f"need 0 <= k <= q, got k={k}, q={q}")
    return Fraction(k, 2)


def golden_profiles() -> str:
    """Canonical term structure of every profile, one per line."""
    return "\n".join(f"{th.value}: {_canonical_structure(th)}" for th in ALL_PROFILES) + "\n"


def _canonical_structure(th: Theorem) -> str:
    terms = _structure(th)
    out = terms[0].canonical()
    for t in terms[1:]:
        out += (" - " if t.sign < 0 else " + ") + t.canonical()
    return out
