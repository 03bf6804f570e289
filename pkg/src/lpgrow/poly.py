"""Laurent polynomials: representation, evaluation, equality, complexity, parsing.

A Laurent polynomial over k positive variables is a finite sum
``sum_i c_i * prod_j x_j**e_ij`` where the exponents may be negative (and,
transiently, non-integer: fitted equations carry real exponents until they
are snapped). This module is the output language of the whole package, so
everything here is immutable and deterministic.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

__all__ = [
    "LaurentTerm",
    "LaurentPolynomial",
    "ComplexityBreakdown",
    "SearchSpaceResult",
    "evaluate",
    "evaluate_many",
    "canonicalize",
    "equals_exact",
    "complexity",
    "parse_equation",
    "print_equation",
    "search_space",
    "format_number",
    "EquationSyntaxError",
]


@dataclass(frozen=True)
class LaurentTerm:
    """One term: a coefficient and one exponent per variable."""

    coefficient: float
    exponents: tuple[float, ...]

    def __post_init__(self) -> None:
        if not math.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")
        object.__setattr__(self, "exponents", tuple(float(e) for e in self.exponents))
        object.__setattr__(self, "coefficient", float(self.coefficient))


@dataclass(frozen=True)
class LaurentPolynomial:
    """A sum of terms over ``nvars`` positional variables x1..x{nvars}."""

    nvars: int
    terms: tuple[LaurentTerm, ...]

    def __post_init__(self) -> None:
        if self.nvars < 0:
            raise ValueError("nvars must be nonnegative")
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.exponents) != self.nvars:
                raise ValueError(
                    f"term has {len(t.exponents)} exponents, expected {self.nvars}"
                )

    @property
    def is_zero(self) -> bool:
        return not self.terms


@dataclass(frozen=True)
class ComplexityBreakdown:
    """Operator/constant/feature counts used for model selection."""

    operators: int
    constants: int
    features: int
    total: int

    def __post_init__(self) -> None:
        if self.total != self.operators + self.constants + self.features:
            raise ValueError("total must equal operators + constants + features")


@dataclass(frozen=True)
class SearchSpaceResult:
    """Monomial-term count T and structure count S = 2**T for (order, nvars)."""

    order: int
    nvars: int
    term_count: int
    structure_count: int


class EquationSyntaxError(ValueError):
    """Raised on malformed equation strings; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


def _is_integral(e: float) -> bool:
    return float(e).is_integer()


def evaluate(p: LaurentPolynomial, x) -> float:
    """Evaluate p at a single point. Inputs are expected strictly positive;
    nonpositive values are rejected when the exponent makes the power
    ill-defined (negative exponent, or non-integer exponent)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != p.nvars:
        raise ValueError(f"expected point of length {p.nvars}, got shape {x.shape}")
    total = 0.0
    for term in p.terms:
        prod = term.coefficient
        for j, e in enumerate(term.exponents):
            if e == 0.0:
                continue
            xj = float(x[j])
            if xj <= 0.0 and (e < 0.0 or not _is_integral(e)):
                raise ValueError(
                    f"x{j + 1} = {xj} is outside the domain of exponent {e}"
                )
            prod *= xj ** e
        total += prod
    return float(total)


def evaluate_many(p: LaurentPolynomial, X) -> np.ndarray:
    """Vectorized evaluation over the rows of a strictly positive matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != p.nvars:
        raise ValueError(f"expected (n, {p.nvars}) matrix, got shape {X.shape}")
    if X.size and X.min() <= 0.0:
        raise ValueError("evaluate_many requires strictly positive inputs")
    out = np.zeros(X.shape[0])
    for term in p.terms:
        prod = np.full(X.shape[0], term.coefficient)
        for j, e in enumerate(term.exponents):
            if e != 0.0:
                prod *= X[:, j] ** e
        out += prod
    return out


def canonicalize(p: LaurentPolynomial) -> LaurentPolynomial:
    """Merge duplicate exponent vectors, drop zero coefficients, sort terms
    by exponent vector lexicographically descending. Idempotent."""
    acc: dict[tuple[float, ...], float] = {}
    for term in p.terms:
        acc[term.exponents] = acc.get(term.exponents, 0.0) + term.coefficient
    terms = tuple(
        LaurentTerm(c, e)
        for e, c in sorted(acc.items(), key=lambda kv: kv[0], reverse=True)
        if c != 0.0
    )
    return LaurentPolynomial(p.nvars, terms)


def equals_exact(a: LaurentPolynomial, b: LaurentPolynomial, coeff_rtol: float = 1e-3) -> bool:
    """Structural equality: same variable count, same exponent vectors after
    rounding each exponent to the nearest integer, and coefficients within
    relative tolerance ``coeff_rtol`` (absolute below magnitude 1)."""
    if a.nvars != b.nvars:
        return False
    amap = {tuple(round(e) for e in t.exponents): t.coefficient for t in a.terms}
    bmap = {tuple(round(e) for e in t.exponents): t.coefficient for t in b.terms}
    if set(amap) != set(bmap):
        return False
    for key, ca in amap.items():
        cb = bmap[key]
        if abs(ca - cb) > coeff_rtol * max(1.0, abs(ca), abs(cb)):
            return False
    return True


def complexity(p: LaurentPolynomial) -> ComplexityBreakdown:
    """Count operators, constants and features of a canonical polynomial.

    features: variable occurrences with nonzero exponent, with multiplicity
      across terms.
    constants: coefficients != +-1, plus exponents outside {0, 1, -1}.
    operators: (n_terms - 1) additions; per term, max(0, nonzero-variable
      count - 1 + [coefficient != +-1]) multiplications; one power per
      exponent outside {0, 1, -1}; one division per exponent == -1; one
      negation per negative coefficient.
    """
    operators = max(0, len(p.terms) - 1)
    constants = 0
    features = 0
    for term in p.terms:
        nz = [e for e in term.exponents if e != 0.0]
        features += len(nz)
        plain_coeff = term.coefficient in (1.0, -1.0)
        if not plain_coeff:
            constants += 1
        operators += max(0, len(nz) - 1 + (0 if plain_coeff else 1))
        if term.coefficient < 0.0:
            operators += 1
        for e in nz:
            if e == -1.0:
                operators += 1
            elif e != 1.0:
                operators += 1
                constants += 1
    return ComplexityBreakdown(
        operators=operators,
        constants=constants,
        features=features,
        total=operators + constants + features,
    )


_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")
_VAR_RE = re.compile(r"x(\d+)")


def _tokenize(s: str):
    tokens = []
    pos = 0
    n = len(s)
    while pos < n:
        ch = s[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch in "+-*^":
            tokens.append(("op", ch, pos))
            pos += 1
            continue
        m = _VAR_RE.match(s, pos) or _NUMBER_RE.match(s, pos)
        if m is None:
            raise EquationSyntaxError(f"unexpected character {ch!r}", pos)
        kind = "var" if m.re is _VAR_RE else "number"
        tokens.append((kind, m.group(0), pos))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive descent over the equation grammar. Unary sign is accepted
    only at the very start of the string and after '^'; elsewhere '+'/'-'
    are strictly term separators, so "x1^2 + + x2" is rejected."""

    def __init__(self, tokens, nvars: int | None, length: int):
        self.tokens = tokens
        self.i = 0
        self.nvars = nvars
        self.length = length

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def advance(self):
        tok = self.peek()
        if tok is not None:
            self.i += 1
        return tok

    def fail(self, message: str, tok=None):
        offset = tok[2] if tok is not None else self.length
        raise EquationSyntaxError(message, offset)

    def parse_exponent(self) -> float:
        sign = 1.0
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in "+-":
            sign = -1.0 if tok[1] == "-" else 1.0
            self.advance()
            tok = self.peek()
        if tok is None or tok[0] != "number":
            self.fail("expected numeric exponent", tok)
        self.advance()
        return sign * float(tok[1])

    def parse_var_index(self, tok) -> int:
        idx = int(tok[1][1:])
        if idx < 1:
            self.fail("variable indices are 1-based", tok)
        if self.nvars is not None and idx > self.nvars:
            self.fail(f"unknown variable {tok[1]} (nvars={self.nvars})", tok)
        return idx

    def parse_term(self, sign: float):
        coeff = sign
        indices: list[tuple[int, float]] = []
        tok = self.peek()
        if tok is None:
            self.fail("expected term")
        if tok[0] == "number":
            self.advance()
            coeff *= float(tok[1])
            nxt = self.peek()
            if nxt is None or nxt[0] != "op" or nxt[1] != "*":
                return coeff, indices  # bare constant term
            self.advance()
        elif tok[0] != "var":
            self.fail("expected term", tok)
        while True:
            tok = self.advance()
            if tok is None or tok[0] != "var":
                self.fail("expected variable", tok)
            idx = self.parse_var_index(tok)
            exp = 1.0
            nxt = self.peek()
            if nxt is not None and nxt[0] == "op" and nxt[1] == "^":
                self.advance()
                exp = self.parse_exponent()
            indices.append((idx, exp))
            nxt = self.peek()
            if nxt is not None and nxt[0] == "op" and nxt[1] == "*":
                self.advance()
                continue
            return coeff, indices

    def parse_poly(self):
        lead = 1.0
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in "+-":
            lead = -1.0 if tok[1] == "-" else 1.0
            self.advance()
        terms = [self.parse_term(lead)]
        while True:
            tok = self.peek()
            if tok is None:
                return terms
            if tok[0] != "op" or tok[1] not in "+-":
                self.fail("expected '+' or '-'", tok)
            self.advance()
            terms.append(self.parse_term(-1.0 if tok[1] == "-" else 1.0))


def parse_equation(s: str, nvars: int | None = None) -> LaurentPolynomial:
    """Parse an equation string into a canonical polynomial.

    Grammar: ``poly := term (('+'|'-') term)*``;
    ``term := [coeff '*']? factor ('*' factor)* | coeff``;
    ``factor := var ['^' number]``; ``var := x<positive int>`` (1-based).
    Whitespace between tokens is ignored. When ``nvars`` is None it is
    inferred as the largest variable index present (0 for a bare constant).
    """
    tokens = _tokenize(s)
    if not tokens:
        raise EquationSyntaxError("empty equation", 0)
    parser = _Parser(tokens, nvars, len(s))
    raw = parser.parse_poly()
    if nvars is None:
        nvars = max((idx for _, idxs in raw for idx, _ in idxs), default=0)
    terms = []
    for coeff, indices in raw:
        exps = [0.0] * nvars
        for idx, e in indices:
            exps[idx - 1] += e
        terms.append(LaurentTerm(coeff, tuple(exps)))
    return canonicalize(LaurentPolynomial(nvars, tuple(terms)))


def format_number(v: float) -> str:
    """Positional decimal rendering that round-trips exactly (no exponent
    notation, so the result stays inside the equation grammar)."""
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return format(Decimal(repr(float(v))), "f")


def print_equation(p: LaurentPolynomial) -> str:
    """Render a canonical polynomial in the grammar accepted by
    parse_equation; ``parse_equation(print_equation(p), p.nvars) == p``."""
    if not p.terms:
        return "0"
    chunks = []
    for k, term in enumerate(p.terms):
        c = term.coefficient
        factors = []
        for j, e in enumerate(term.exponents):
            if e == 0.0:
                continue
            if e == 1.0:
                factors.append(f"x{j + 1}")
            else:
                factors.append(f"x{j + 1}^{format_number(e)}")
        mag = abs(c)
        if not factors:
            body = format_number(mag)
        elif mag == 1.0:
            body = "*".join(factors)
        else:
            body = format_number(mag) + "*" + "*".join(factors)
        if k == 0:
            chunks.append(("-" if c < 0 else "") + body)
        else:
            chunks.append(("- " if c < 0 else "+ ") + body)
    return " ".join(chunks)


def search_space(order: int, nvars: int) -> SearchSpaceResult:
    """Count monomials of total degree <= order in nvars variables
    (T = C(order+nvars, order)) and the 2**T possible term subsets."""
    if order < 0 or nvars < 0:
        raise ValueError("order and nvars must be nonnegative")
    t = math.comb(order + nvars, order)
    return SearchSpaceResult(order=order, nvars=nvars, term_count=t, structure_count=2 ** t)
