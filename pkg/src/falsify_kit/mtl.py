"""Bounded metric-temporal-logic parsing and monitoring.

Formulas are evaluated over discrete-time traces with both quantitative
(robustness) and Boolean semantics. No interpolation between samples;
interval bounds are matched against time differences exactly.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyTrace,
    IndexOutOfRange,
    LengthMismatch,
    ParseError,
    UnknownOperator,
    UnknownSignal,
)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

class Trace:
    """Time-stamped multi-signal trajectory.

    times strictly increasing, every signal the same length, all finite.
    """

    def __init__(self, times, signals):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise EmptyTrace("trace must contain at least one sample")
        self.times = times
        self.signals = {}
        for name, values in signals.items():
            arr = np.asarray(values, dtype=float)
            if arr.shape != times.shape:
                raise LengthMismatch(f"signal {name!r} length {arr.size} != {times.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"signal {name!r} contains non-finite values")
            self.signals[name] = arr
        if not np.all(np.isfinite(times)):
            raise ValueError("times contain non-finite values")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        return (isinstance(other, Trace)
                and np.array_equal(self.times, other.times)
                and self.signals.keys() == other.signals.keys()
                and all(np.array_equal(v, other.signals[k]) for k, v in self.signals.items()))


# ---------------------------------------------------------------------------
# Formula AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    """Affine predicate: const + sum(coef * signal) compared against 0.

    The quantitative value is accumulated starting from const, adding the
    terms in order. strict atoms are violated at exactly 0, non-strict
    satisfied.
    """
    terms: tuple  # ((signal, coef), ...)
    const: float
    strict: bool = True


@dataclass(frozen=True)
class Not:
    child: object


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Globally:
    lo: float
    hi: float
    child: object


@dataclass(frozen=True)
class Eventually:
    lo: float
    hi: float
    child: object


@dataclass(frozen=True)
class Until:
    lo: float
    hi: float
    left: object
    right: object


Formula = Atom | Not | And | Or | Implies | Globally | Eventually | Until


def formula_signals(phi):
    """All signal names referenced by phi."""
    if isinstance(phi, Atom):
        return {name for name, _ in phi.terms}
    if isinstance(phi, Not):
        return formula_signals(phi.child)
    if isinstance(phi, (And, Or)):
        out = set()
        for a in phi.args:
            out |= formula_signals(a)
        return out
    if isinstance(phi, Implies):
        return formula_signals(phi.left) | formula_signals(phi.right)
    if isinstance(phi, (Globally, Eventually)):
        return formula_signals(phi.child)
    if isinstance(phi, Until):
        return formula_signals(phi.left) | formula_signals(phi.right)
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|->|[-+*<>!&|(),\[\]]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos]!r}", pos)
            break
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start()))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start()))
        else:
            tokens.append(("op", m.group("op"), m.start()))
        pos = m.end()
    return tokens


class _Affine:
    """Parse-time affine form: ordered signal coefficients plus a constant."""

    def __init__(self, coeffs=None, const=0.0):
        self.coeffs = dict(coeffs or {})
        self.const = const

    def add(self, other, sign):
        out = _Affine(self.coeffs, self.const + sign * other.const)
        for name, c in other.coeffs.items():
            out.coeffs[name] = out.coeffs.get(name, 0.0) + sign * c
        return out

    def scale(self, k):
        return _Affine({n: k * c for n, c in self.coeffs.items()}, k * self.const)


class _FormulaParser:
    """Precedence (loosest first): ->, |, &, U, unary (! G F), comparison."""

    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self, ahead=0):
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else ("eof", None, len(self.tokens) and self.tokens[-1][2] + 1)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val, at = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, got {val!r}", at)

    def parse(self):
        node = self.parse_implies()
        kind, val, at = self.peek()
        if kind != "eof":
            raise ParseError(f"trailing input {val!r}", at)
        return node

    def parse_implies(self):
        left = self.parse_or()
        if self.peek()[:2] == ("op", "->"):
            self.next()
            return Implies(left, self.parse_implies())
        return left

    def parse_or(self):
        args = [self.parse_and()]
        while self.peek()[:2] == ("op", "|"):
            self.next()
            args.append(self.parse_and())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def parse_and(self):
        args = [self.parse_until()]
        while self.peek()[:2] == ("op", "&"):
            self.next()
            args.append(self.parse_until())
        return args[0] if len(args) == 1 else And(tuple(args))

    def parse_until(self):
        left = self.parse_unary()
        kind, val, _ = self.peek()
        if kind == "name" and val == "U":
            self.next()
            lo, hi = self.parse_interval()
            right = self.parse_until()
            return Until(lo, hi, left, right)
        return left

    def parse_unary(self):
        kind, val, at = self.peek()
        if kind == "op" and val == "!":
            self.next()
            return Not(self.parse_unary())
        if kind == "name" and val in ("G", "F"):
            nk, nv, _ = self.peek(1)
            starts_formula = (nk in ("name", "num")
                              or (nk == "op" and nv in ("!", "(", "-")))
            if (nk, nv) == ("op", "["):
                self.next()
                lo, hi = self.parse_interval()
                child = self.parse_unary()
                return (Globally if val == "G" else Eventually)(lo, hi, child)
            if starts_formula:
                self.next()
                child = self.parse_unary()
                return (Globally if val == "G" else Eventually)(0.0, math.inf, child)
            # falls through: G/F used as a signal name in an atom
        if kind == "name" and self.peek(1)[:2] == ("op", "[") and val not in ("G", "F"):
            raise UnknownOperator(f"unknown temporal operator {val!r}", at)
        if kind == "op" and val == "(":
            save = self.pos
            try:
                self.next()
                node = self.parse_implies()
                self.expect_op(")")
                return node
            except ParseError:
                self.pos = save  # reparse as an arithmetic group inside a comparison
        return self.parse_cmp()

    def parse_interval(self):
        self.expect_op("[")
        lo = self.parse_interval_bound(allow_inf=False)
        self.expect_op(",")
        hi = self.parse_interval_bound(allow_inf=True)
        self.expect_op("]")
        if lo < 0 or hi < lo:
            raise ParseError(f"invalid interval [{lo}, {hi}]")
        return lo, hi

    def parse_interval_bound(self, allow_inf):
        kind, val, at = self.next()
        if kind == "num":
            return float(val)
        if kind == "name" and val.lower() == "inf" and allow_inf:
            return math.inf
        raise ParseError(f"expected interval bound, got {val!r}", at)

    def parse_cmp(self):
        left = self.parse_sum()
        kind, val, at = self.next()
        if kind != "op" or val not in ("<", "<=", ">", ">="):
            raise ParseError(f"expected comparison operator, got {val!r}", at)
        right = self.parse_sum()
        strict = val in ("<", ">")
        diff = left.add(right, -1.0) if val in (">", ">=") else right.add(left, -1.0)
        return Atom(tuple(diff.coeffs.items()), diff.const, strict)

    def parse_sum(self):
        node = self.parse_product()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.next()
                node = node.add(self.parse_product(), 1.0 if val == "+" else -1.0)
            else:
                return node

    def parse_product(self):
        node = self.parse_atom_factor()
        while self.peek()[:2] == ("op", "*"):
            _, _, at = self.next()
            rhs = self.parse_atom_factor()
            if not node.coeffs:
                node = rhs.scale(node.const)
            elif not rhs.coeffs:
                node = node.scale(rhs.const)
            else:
                raise ParseError("product of two signals is not affine", at)
        return node

    def parse_atom_factor(self):
        kind, val, at = self.next()
        if kind == "num":
            return _Affine(const=float(val))
        if kind == "name":
            return _Affine({val: 1.0})
        if kind == "op" and val == "-":
            return self.parse_atom_factor().scale(-1.0)
        if kind == "op" and val == "(":
            node = self.parse_sum()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {val!r} in expression", at)


def parse_formula(text):
    """Parse formula text such as ``G(x <= 2.4 & theta_deg >= -12)`` or
    ``F[0,5] (d > 15)``."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty formula")
    return _FormulaParser(text).parse()


# ---------------------------------------------------------------------------
# Semantics
# ---------------------------------------------------------------------------

def _window_slices(times, lo, hi):
    """Yield (start, stop) sample-index window for each index i, where
    times[j] - times[i] lies in [lo, hi]. Indices j < i can never qualify
    since lo >= 0 and times are increasing."""
    n = times.size
    for i in range(n):
        diffs = times[i:] - times[i]
        mask = (diffs >= lo) & (diffs <= hi)
        yield i, np.flatnonzero(mask) + i


def _temporal_agg(times, child, lo, hi, minimize, empty_value):
    n = times.size
    if lo == 0.0 and math.isinf(hi):
        # unbounded suffix window: O(n) accumulate
        op = np.minimum if minimize else np.maximum
        return op.accumulate(child[::-1])[::-1].copy()
    out = np.empty(n)
    for i, idx in _window_slices(times, lo, hi):
        if idx.size:
            out[i] = child[idx].min() if minimize else child[idx].max()
        else:
            out[i] = empty_value
    return out


def _rho_array(phi, trace):
    times = trace.times
    n = times.size
    if isinstance(phi, Atom):
        acc = np.full(n, phi.const)
        for name, coef in phi.terms:
            acc = acc + coef * trace.signals[name]
        return acc
    if isinstance(phi, Not):
        return -_rho_array(phi.child, trace)
    if isinstance(phi, And):
        arrs = [_rho_array(a, trace) for a in phi.args]
        out = arrs[0]
        for a in arrs[1:]:
            out = np.minimum(out, a)
        return out
    if isinstance(phi, Or):
        arrs = [_rho_array(a, trace) for a in phi.args]
        out = arrs[0]
        for a in arrs[1:]:
            out = np.maximum(out, a)
        return out
    if isinstance(phi, Implies):
        return np.maximum(-_rho_array(phi.left, trace), _rho_array(phi.right, trace))
    if isinstance(phi, Globally):
        return _temporal_agg(times, _rho_array(phi.child, trace), phi.lo, phi.hi,
                             minimize=True, empty_value=math.inf)
    if isinstance(phi, Eventually):
        return _temporal_agg(times, _rho_array(phi.child, trace), phi.lo, phi.hi,
                             minimize=False, empty_value=-math.inf)
    if isinstance(phi, Until):
        rf = _rho_array(phi.left, trace)
        rg = _rho_array(phi.right, trace)
        out = np.empty(n)
        for i in range(n):
            best = -math.inf
            prefix = math.inf  # min of rf over [i, j)
            for j in range(i, n):
                dt = times[j] - times[i]
                if dt > phi.hi:
                    break
                if dt >= phi.lo:
                    cand = min(rg[j], prefix)
                    if cand > best:
                        best = cand
                prefix = min(prefix, rf[j])
            out[i] = best
        return out
    raise TypeError(f"not a formula: {phi!r}")


def _sat_array(phi, trace):
    times = trace.times
    n = times.size
    if isinstance(phi, Atom):
        acc = np.full(n, phi.const)
        for name, coef in phi.terms:
            acc = acc + coef * trace.signals[name]
        return acc > 0 if phi.strict else acc >= 0
    if isinstance(phi, Not):
        return ~_sat_array(phi.child, trace)
    if isinstance(phi, And):
        out = _sat_array(phi.args[0], trace)
        for a in phi.args[1:]:
            out = out & _sat_array(a, trace)
        return out
    if isinstance(phi, Or):
        out = _sat_array(phi.args[0], trace)
        for a in phi.args[1:]:
            out = out | _sat_array(a, trace)
        return out
    if isinstance(phi, Implies):
        return ~_sat_array(phi.left, trace) | _sat_array(phi.right, trace)
    if isinstance(phi, (Globally, Eventually)):
        child = _sat_array(phi.child, trace)
        is_g = isinstance(phi, Globally)
        if phi.lo == 0.0 and math.isinf(phi.hi):
            op = np.logical_and if is_g else np.logical_or
            return op.accumulate(child[::-1])[::-1].copy()
        out = np.empty(n, dtype=bool)
        for i, idx in _window_slices(times, phi.lo, phi.hi):
            if idx.size:
                out[i] = child[idx].all() if is_g else child[idx].any()
            else:
                out[i] = is_g  # vacuous: G true, F false
        return out
    if isinstance(phi, Until):
        sf = _sat_array(phi.left, trace)
        sg = _sat_array(phi.right, trace)
        out = np.zeros(n, dtype=bool)
        for i in range(n):
            for j in range(i, n):
                dt = times[j] - times[i]
                if dt > phi.hi:
                    break
                if dt >= phi.lo and sg[j]:
                    out[i] = True
                    break
                if not sf[j]:
                    # prefix broken at j: no later witness can qualify
                    break
        return out
    raise TypeError(f"not a formula: {phi!r}")


def _validate(phi, trace, t_index):
    if len(trace) == 0:
        raise EmptyTrace("cannot evaluate on an empty trace")
    if not (0 <= t_index < len(trace)):
        raise IndexOutOfRange(f"t_index {t_index} out of range for trace of length {len(trace)}")
    missing = formula_signals(phi) - set(trace.signals)
    if missing:
        raise UnknownSignal(f"trace lacks signals {sorted(missing)}")


def robustness(phi, trace, t_index=0):
    """Quantitative robustness of phi at sample t_index. Positive means
    satisfied with margin; +-inf arise from empty temporal windows."""
    _validate(phi, trace, t_index)
    return float(_rho_array(phi, trace)[t_index])


def satisfies(phi, trace, t_index=0):
    """Boolean semantics, computed directly (not via the sign of
    robustness). Agrees with sign(robustness) whenever robustness != 0."""
    _validate(phi, trace, t_index)
    return bool(_sat_array(phi, trace)[t_index])
