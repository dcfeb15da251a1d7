"""Hierarchical abstract feature spaces.

A space is a tree of domains (hyperboxes, finite sets, structs, arrays)
with per-leaf sampling distributions and declarative constraints enforced
by rejection. Leaves are addressed by dot-separated paths with zero-based
integer components for array elements and box dimensions, e.g.
``cars.2.heading.0``. A bare root FiniteSet gets the path ``root``.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    DanglingPath,
    InvalidDomain,
    LengthMismatch,
    OutOfRange,
    ParseError,
    PointSpaceMismatch,
    RejectionBudgetExhausted,
)

DEFAULT_REJECTION_BUDGET = 10_000

Atom = str | int | float


def _check_atom(v):
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        raise InvalidDomain(f"finite-set values must be strings or numbers, got {v!r}")
    if isinstance(v, float) and not math.isfinite(v):
        raise InvalidDomain(f"finite-set values must be finite, got {v!r}")
    return v


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned hyperbox with per-dimension [lo, hi) bounds."""
    lo: tuple
    hi: tuple

    def __init__(self, lo, hi):
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        if len(lo) != len(hi) or not lo:
            raise InvalidDomain("box lo/hi must be equal-length, non-empty vectors")
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise InvalidDomain("box bounds must be finite")
            if not a < b:
                raise InvalidDomain(f"box requires lo < hi per dimension, got [{a}, {b}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def ndim(self):
        return len(self.lo)


@dataclass(frozen=True)
class FiniteSet:
    """Unordered leaf: a non-empty set of distinct atoms (strings or numbers)."""
    values: tuple

    def __init__(self, values):
        values = tuple(_check_atom(v) for v in values)
        if not values:
            raise InvalidDomain("finite set must be non-empty")
        for i, v in enumerate(values):
            if any(v == w for w in values[i + 1:]):
                raise InvalidDomain(f"finite-set values must be distinct, {v!r} repeats")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Struct:
    """Named, ordered composition of sub-domains."""
    fields: tuple  # ((name, Domain), ...)

    def __init__(self, fields):
        if isinstance(fields, dict):
            fields = tuple(fields.items())
        else:
            fields = tuple((str(n), d) for n, d in fields)
        if not fields:
            raise InvalidDomain("struct must have at least one field")
        names = [n for n, _ in fields]
        if len(set(names)) != len(names):
            raise InvalidDomain("struct field names must be unique")
        for n, d in fields:
            if not n or not isinstance(d, (Box, FiniteSet, Struct, Array)):
                raise InvalidDomain(f"invalid struct field {n!r}")
        object.__setattr__(self, "fields", fields)


@dataclass(frozen=True)
class Array:
    """Fixed-length homogeneous repetition of one element domain."""
    element: object
    length: int

    def __init__(self, element, length):
        if not isinstance(element, (Box, FiniteSet, Struct, Array)):
            raise InvalidDomain("array element must be a domain")
        length = int(length)
        if length < 1:
            raise InvalidDomain("array length must be >= 1")
        object.__setattr__(self, "element", element)
        object.__setattr__(self, "length", length)


Domain = Box | FiniteSet | Struct | Array


def _walk_leaves(domain, prefix):
    """Yield (path, kind, payload) depth-first.

    kind is 'box' with payload (lo, hi) for each box dimension, or 'set'
    with payload value-tuple for each finite set.
    """
    if isinstance(domain, Box):
        for i in range(domain.ndim):
            path = prefix + (str(i),)
            yield ".".join(path), "box", (domain.lo[i], domain.hi[i])
    elif isinstance(domain, FiniteSet):
        yield ".".join(prefix) if prefix else "root", "set", domain.values
    elif isinstance(domain, Struct):
        for name, sub in domain.fields:
            yield from _walk_leaves(sub, prefix + (name,))
    elif isinstance(domain, Array):
        for i in range(domain.length):
            yield from _walk_leaves(domain.element, prefix + (str(i),))
    else:
        raise InvalidDomain(f"not a domain: {domain!r}")


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionSpec:
    kind: str  # uniform | truncated_normal | categorical
    mean: float = 0.0
    stddev: float = 1.0
    weights: tuple = ()

    @staticmethod
    def uniform():
        return DistributionSpec("uniform")

    @staticmethod
    def truncated_normal(mean, stddev):
        if not stddev > 0:
            raise InvalidDomain("truncated-normal stddev must be > 0")
        return DistributionSpec("truncated_normal", mean=float(mean), stddev=float(stddev))

    @staticmethod
    def categorical(weights):
        weights = tuple(float(w) for w in weights)
        if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
            raise InvalidDomain("categorical weights must be non-negative with at least one positive")
        return DistributionSpec("categorical", weights=weights)

    @staticmethod
    def from_json(doc):
        kind = doc.get("kind")
        if kind == "uniform":
            return DistributionSpec.uniform()
        if kind == "truncated_normal":
            return DistributionSpec.truncated_normal(doc["mean"], doc["stddev"])
        if kind == "categorical":
            return DistributionSpec.categorical(doc["weights"])
        raise InvalidDomain(f"unknown distribution kind {kind!r}")


# ---------------------------------------------------------------------------
# Constraint expressions
# ---------------------------------------------------------------------------
# Expression nodes evaluate against a Point's assignments. Numeric nodes
# produce floats; Eq additionally compares finite-set atoms.

@dataclass(frozen=True)
class Ref:
    path: str


@dataclass(frozen=True)
class Lit:
    value: object  # float or atom string


@dataclass(frozen=True)
class BinOp:
    op: str  # + - *
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Cmp:
    op: str  # < <= ==
    left: object
    right: object


@dataclass(frozen=True)
class BoolOp:
    op: str  # and | or
    args: tuple


@dataclass(frozen=True)
class Not:
    operand: object


Constraint = Cmp | BoolOp | Not

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.(?:[A-Za-z_][A-Za-z0-9_]*|\d+))*)"
    r"|(?P<str>\"[^\"]*\"|'[^']*')"
    r"|(?P<op><=|>=|==|!=|->|[-+*<>=!&|(),\[\]]))"
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
        elif m.lastgroup == "str":
            tokens.append(("str", m.group("str")[1:-1], m.start()))
        else:
            tokens.append(("op", m.group("op"), m.start()))
        pos = m.end()
    return tokens


class _ConstraintParser:
    """Recursive-descent parser for constraint predicates.

    Grammar (loosest binding first): ``|``, ``&``, ``!``, comparisons
    (< <= > >= = == !=), then +/-, then *, then atoms. Parentheses open a
    full sub-expression; whether it denotes a boolean or a number is
    resolved by the type check in build_space.
    """

    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else ("eof", None, -1)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val, at = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, got {val!r}", at)

    def parse(self):
        node = self.parse_or()
        kind, val, at = self.peek()
        if kind != "eof":
            raise ParseError(f"trailing input {val!r}", at)
        return node

    def parse_or(self):
        args = [self.parse_and()]
        while self.peek()[:2] == ("op", "|"):
            self.next()
            args.append(self.parse_and())
        return args[0] if len(args) == 1 else BoolOp("or", tuple(args))

    def parse_and(self):
        args = [self.parse_not()]
        while self.peek()[:2] == ("op", "&"):
            self.next()
            args.append(self.parse_not())
        return args[0] if len(args) == 1 else BoolOp("and", tuple(args))

    def parse_not(self):
        if self.peek()[:2] == ("op", "!"):
            self.next()
            return Not(self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self):
        left = self.parse_sum()
        kind, val, _ = self.peek()
        if kind == "op" and val in ("<", "<=", ">", ">=", "=", "==", "!="):
            self.next()
            right = self.parse_sum()
            if val in (">", ">="):
                left, right = right, left
                val = "<" if val == ">" else "<="
            if val in ("=", "=="):
                return Cmp("==", left, right)
            if val == "!=":
                return Not(Cmp("==", left, right))
            return Cmp(val, left, right)
        return left

    def parse_sum(self):
        node = self.parse_term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.next()
                node = BinOp(val, node, self.parse_term())
            else:
                return node

    def parse_term(self):
        node = self.parse_factor()
        while self.peek()[:2] == ("op", "*"):
            self.next()
            node = BinOp("*", node, self.parse_factor())
        return node

    def parse_factor(self):
        kind, val, at = self.next()
        if kind == "num":
            return Lit(val)
        if kind == "str":
            return Lit(val)
        if kind == "name":
            return Ref(val)
        if kind == "op" and val == "-":
            return Neg(self.parse_factor())
        if kind == "op" and val == "(":
            node = self.parse_or()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {val!r}", at)


def parse_constraint(text):
    """Parse a textual constraint like ``pos.0 + 0.5 < pos.1 & color = red``."""
    return _ConstraintParser(text).parse()


# ---------------------------------------------------------------------------
# Points and the feature space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Point:
    """Concrete assignment of every leaf path of a space."""
    assignments: dict

    def value(self, path):
        return self.assignments[path]

    def __eq__(self, other):
        return isinstance(other, Point) and self.assignments == other.assignments


class FeatureSpace:
    """Validated domain tree plus per-leaf distributions and constraints.

    Immutable after build_space; sampling takes a caller-owned
    numpy.random.Generator.
    """

    def __init__(self, root, distributions, constraints, rejection_budget):
        self.root = root
        self.rejection_budget = rejection_budget
        leaves = list(_walk_leaves(root, ()))
        self._leaf_kind = {p: k for p, k, _ in leaves}
        self._leaf_payload = {p: payload for p, _, payload in leaves}
        self.ordered = tuple(p for p, k, _ in leaves if k == "box")
        self.unordered = tuple(p for p, k, _ in leaves if k == "set")
        self.constraints = tuple(constraints)
        self.distributions = distributions  # full map, defaults installed

    # -- leaf accessors ----------------------------------------------------

    def leaf_kind(self, path):
        return self._leaf_kind.get(path)

    def bounds(self, path):
        return self._leaf_payload[path]

    def set_values(self, path):
        return self._leaf_payload[path]

    def widths(self):
        return np.array([hi - lo for lo, hi in (self._leaf_payload[p] for p in self.ordered)])

    def lows(self):
        return np.array([self._leaf_payload[p][0] for p in self.ordered])

    def highs(self):
        return np.array([self._leaf_payload[p][1] for p in self.ordered])

    # -- constraint evaluation ----------------------------------------------

    def satisfies_constraints(self, point):
        return all(_eval_bool(c, point.assignments) for c in self.constraints)


def _eval_num(node, assignments):
    if isinstance(node, Ref):
        return assignments[node.path]
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, Neg):
        return -_eval_num(node.operand, assignments)
    if isinstance(node, BinOp):
        a = _eval_num(node.left, assignments)
        b = _eval_num(node.right, assignments)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        return a * b
    raise TypeError(f"not a numeric expression: {node!r}")


def _eval_bool(node, assignments):
    if isinstance(node, Cmp):
        a = _eval_num(node.left, assignments)
        b = _eval_num(node.right, assignments)
        if node.op == "<":
            return a < b
        if node.op == "<=":
            return a <= b
        return a == b
    if isinstance(node, Not):
        return not _eval_bool(node.operand, assignments)
    if isinstance(node, BoolOp):
        if node.op == "and":
            return all(_eval_bool(a, assignments) for a in node.args)
        return any(_eval_bool(a, assignments) for a in node.args)
    raise TypeError(f"not a boolean expression: {node!r}")


def _typecheck_constraint(node, space):
    """Return 'num' | 'atom' | 'bool'; raise on dangling refs or type misuse."""
    if isinstance(node, Ref):
        kind = space.leaf_kind(node.path)
        if kind is None:
            raise DanglingPath(f"constraint references unknown leaf {node.path!r}")
        return "num" if kind == "box" else "atom"
    if isinstance(node, Lit):
        return "atom" if isinstance(node.value, str) else "num"
    if isinstance(node, Neg):
        if _typecheck_constraint(node.operand, space) != "num":
            raise DanglingPath("arithmetic negation requires a numeric operand")
        return "num"
    if isinstance(node, BinOp):
        if (_typecheck_constraint(node.left, space) != "num"
                or _typecheck_constraint(node.right, space) != "num"):
            raise DanglingPath(f"arithmetic '{node.op}' requires numeric operands")
        return "num"
    if isinstance(node, Cmp):
        lt = _typecheck_constraint(node.left, space)
        rt = _typecheck_constraint(node.right, space)
        if node.op == "==":
            if lt != rt or lt == "bool":
                raise DanglingPath("equality requires two numeric or two finite-set operands")
        elif lt != "num" or rt != "num":
            raise DanglingPath(f"comparison '{node.op}' requires numeric operands")
        return "bool"
    if isinstance(node, Not):
        if _typecheck_constraint(node.operand, space) != "bool":
            raise DanglingPath("'!' requires a boolean operand")
        return "bool"
    if isinstance(node, BoolOp):
        for a in node.args:
            if _typecheck_constraint(a, space) != "bool":
                raise DanglingPath(f"'{node.op}' requires boolean operands")
        return "bool"
    raise InvalidDomain(f"not a constraint node: {node!r}")


def _resolve_bare_names(node, space):
    """Turn Refs that do not resolve to any leaf into atom literals.

    Lets constraint text write ``color = red`` without quoting, while
    anything matching a real leaf path stays a reference.
    """
    if isinstance(node, Ref):
        if space.leaf_kind(node.path) is None and "." not in node.path:
            return Lit(node.path)
        return node
    if isinstance(node, Neg):
        return Neg(_resolve_bare_names(node.operand, space))
    if isinstance(node, BinOp):
        return BinOp(node.op, _resolve_bare_names(node.left, space),
                     _resolve_bare_names(node.right, space))
    if isinstance(node, Cmp):
        return Cmp(node.op, _resolve_bare_names(node.left, space),
                   _resolve_bare_names(node.right, space))
    if isinstance(node, Not):
        return Not(_resolve_bare_names(node.operand, space))
    if isinstance(node, BoolOp):
        return BoolOp(node.op, tuple(_resolve_bare_names(a, space) for a in node.args))
    return node


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def build_space(root, distributions=None, constraints=None,
                rejection_budget=DEFAULT_REJECTION_BUDGET):
    """Validate a domain tree, resolve distribution/constraint paths and
    install uniform defaults on every leaf without an explicit distribution."""
    if not isinstance(root, (Box, FiniteSet, Struct, Array)):
        raise InvalidDomain(f"root must be a domain, got {root!r}")
    space = FeatureSpace(root, {}, (), rejection_budget)

    dist_map = {}
    for path, spec in (distributions or {}).items():
        if isinstance(spec, dict):
            spec = DistributionSpec.from_json(spec)
        kind = space.leaf_kind(path)
        if kind is None:
            raise DanglingPath(f"distribution on unknown leaf {path!r}")
        if spec.kind == "truncated_normal" and kind != "box":
            raise DanglingPath(f"truncated-normal needs a box dimension, {path!r} is a finite set")
        if spec.kind == "categorical":
            if kind != "set":
                raise DanglingPath(f"categorical needs a finite set, {path!r} is a box dimension")
            if len(spec.weights) != len(space.set_values(path)):
                raise InvalidDomain(f"categorical weights length mismatch on {path!r}")
        dist_map[path] = spec
    for path in space.ordered + space.unordered:
        dist_map.setdefault(path, DistributionSpec.uniform())

    parsed = []
    for c in (constraints or ()):
        node = parse_constraint(c) if isinstance(c, str) else c
        node = _resolve_bare_names(node, space)
        if _typecheck_constraint(node, space) != "bool":
            raise DanglingPath("constraint must be a boolean predicate")
        parsed.append(node)

    return FeatureSpace(root, dist_map, parsed, rejection_budget)


def dimensions(space):
    """(ordered box-dimension paths, unordered finite-set paths), both in
    depth-first field order. Stable across calls."""
    return list(space.ordered), list(space.unordered)


def flatten(space, point):
    """Point -> (reals vector in ordered path order, atoms list in unordered
    path order). Raises PointSpaceMismatch if the point does not belong."""
    assignments = point.assignments
    expected = set(space.ordered) | set(space.unordered)
    if set(assignments) != expected:
        missing = expected - set(assignments)
        extra = set(assignments) - expected
        raise PointSpaceMismatch(f"point/space leaf mismatch (missing={sorted(missing)}, extra={sorted(extra)})")
    reals = np.empty(len(space.ordered))
    for i, path in enumerate(space.ordered):
        v = assignments[path]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise PointSpaceMismatch(f"{path!r} expects a real value, got {v!r}")
        lo, hi = space.bounds(path)
        if not (lo <= v <= hi):
            raise PointSpaceMismatch(f"{path!r}={v} outside [{lo}, {hi}]")
        reals[i] = v
    atoms = []
    for path in space.unordered:
        v = assignments[path]
        if not any(v == w for w in space.set_values(path)):
            raise PointSpaceMismatch(f"{path!r}={v!r} not a member of its finite set")
        atoms.append(v)
    return reals, atoms


def unflatten(space, reals, atoms):
    """Inverse of flatten. Raises LengthMismatch / OutOfRange."""
    reals = np.asarray(reals, dtype=float)
    if reals.shape != (len(space.ordered),):
        raise LengthMismatch(f"expected {len(space.ordered)} reals, got {reals.shape}")
    if len(atoms) != len(space.unordered):
        raise LengthMismatch(f"expected {len(space.unordered)} atoms, got {len(atoms)}")
    assignments = {}
    for path, v in zip(space.ordered, reals):
        lo, hi = space.bounds(path)
        if not (lo <= v <= hi):
            raise OutOfRange(f"{path!r}={v} outside [{lo}, {hi}]")
        assignments[path] = float(v)
    for path, v in zip(space.unordered, atoms):
        if not any(v == w for w in space.set_values(path)):
            raise OutOfRange(f"{path!r}={v!r} not a member of its finite set")
        assignments[path] = v
    return Point(assignments)


def sample_truncated_normal(rng, mean, stddev, lo, hi, budget=DEFAULT_REJECTION_BUDGET):
    """Normal draw rejected against [lo, hi]; exact support, no clipping."""
    for _ in range(budget):
        v = rng.normal(mean, stddev)
        if lo <= v <= hi:
            return v
    raise RejectionBudgetExhausted(
        f"truncated normal(mean={mean}, stddev={stddev}) missed [{lo}, {hi}] {budget} times")


def sample_leaf(space, path, rng):
    spec = space.distributions[path]
    if space.leaf_kind(path) == "box":
        lo, hi = space.bounds(path)
        if spec.kind == "truncated_normal":
            return sample_truncated_normal(rng, spec.mean, spec.stddev, lo, hi,
                                           space.rejection_budget)
        return float(rng.uniform(lo, hi))
    values = space.set_values(path)
    if spec.kind == "categorical":
        w = np.asarray(spec.weights, dtype=float)
        idx = rng.choice(len(values), p=w / w.sum())
    else:
        idx = rng.integers(len(values))
    return values[int(idx)]


def sample_prior(space, rng):
    """Draw a Point from the product of leaf distributions, rejection-filtered
    through the declarative constraints."""
    for _ in range(space.rejection_budget):
        assignments = {}
        for path in space.ordered:
            assignments[path] = sample_leaf(space, path, rng)
        for path in space.unordered:
            assignments[path] = sample_leaf(space, path, rng)
        point = Point(assignments)
        if space.satisfies_constraints(point):
            return point
    raise RejectionBudgetExhausted(
        f"no constraint-satisfying sample after {space.rejection_budget} draws")


# ---------------------------------------------------------------------------
# JSON domain (de)serialization, used by the CLI config and the wire
# signature.
# ---------------------------------------------------------------------------

def domain_to_json(domain):
    if isinstance(domain, Box):
        return {"box": [[lo, hi] for lo, hi in zip(domain.lo, domain.hi)]}
    if isinstance(domain, FiniteSet):
        return {"set": list(domain.values)}
    if isinstance(domain, Struct):
        return {"struct": {name: domain_to_json(sub) for name, sub in domain.fields}}
    if isinstance(domain, Array):
        return {"array": {"element": domain_to_json(domain.element), "length": domain.length}}
    raise InvalidDomain(f"not a domain: {domain!r}")


def domain_from_json(doc):
    if not isinstance(doc, dict) or len(doc) != 1:
        raise InvalidDomain(f"domain document must have exactly one constructor key, got {doc!r}")
    key, body = next(iter(doc.items()))
    if key == "box":
        return Box([p[0] for p in body], [p[1] for p in body])
    if key == "set":
        return FiniteSet(body)
    if key == "struct":
        return Struct({name: domain_from_json(sub) for name, sub in body.items()})
    if key == "array":
        return Array(domain_from_json(body["element"]), body["length"])
    raise InvalidDomain(f"unknown domain constructor {key!r}")
