"""Error table: counterexample rows against abstract-feature columns.

Analysis follows the split between feature kinds: PCA over ordered (box)
columns, recurrent-value mining over unordered (finite-set) columns, plus
row selection and PCA-directed sample generation for augmentation.
"""

import csv
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateRunId,
    EmptyTable,
    InsufficientRows,
    LengthMismatch,
    NoOrderedColumns,
    NoUnorderedColumns,
    OutOfRange,
    RejectionBudgetExhausted,
    SchemaMismatch,
)
from .space import flatten, unflatten


@dataclass(frozen=True)
class Row:
    run_id: int
    score: float
    reals: np.ndarray
    atoms: tuple


@dataclass(frozen=True)
class PcaReport:
    columns: tuple          # ordered column paths
    components: np.ndarray  # rows = principal directions (width-standardized space)
    explained_variance: np.ndarray
    mean: np.ndarray        # raw-space column means


@dataclass(frozen=True)
class Combination:
    columns: tuple
    values: tuple
    support: float


@dataclass(frozen=True)
class RecurrenceReport:
    per_column: dict        # path -> [(atom, frequency), ...] by falling frequency
    combinations: tuple     # Combination entries with support >= threshold


class ErrorTable:
    """Rows of (run_id, score, flattened point) for one feature space."""

    def __init__(self, space):
        self.space = space
        self.ordered_columns = tuple(space.ordered)
        self.unordered_columns = tuple(space.unordered)
        self.rows = []
        self._run_ids = set()

    def __len__(self):
        return len(self.rows)

    def insert(self, point, score, run_id):
        score = float(score)
        if not math.isfinite(score):
            raise ValueError(f"row score must be finite, got {score}")
        if run_id in self._run_ids:
            raise DuplicateRunId(f"run_id {run_id} already present")
        reals, atoms = flatten(self.space, point)
        self.rows.append(Row(int(run_id), score, reals, tuple(atoms)))
        self._run_ids.add(run_id)

    def row_point(self, row):
        return unflatten(self.space, row.reals, list(row.atoms))

    # -- analysis ------------------------------------------------------------

    def _reals_matrix(self):
        return np.array([r.reals for r in self.rows])

    def pca_analyze(self):
        """Eigendecomposition of the covariance of width-standardized
        ordered columns. Components are orthonormal, variances descending."""
        if not self.ordered_columns:
            raise NoOrderedColumns("table has no ordered columns")
        if len(self.rows) < 2:
            raise InsufficientRows(f"PCA needs >= 2 rows, table has {len(self.rows)}")
        x = self._reals_matrix()
        mean = x.mean(axis=0)
        widths = self.space.widths()
        xs = (x - mean) / widths
        cov = np.atleast_2d(np.cov(xs, rowvar=False, ddof=1))
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = np.maximum(evals[order], 0.0)
        comps = evecs[:, order].T
        # deterministic sign: largest-magnitude entry of each direction positive
        for row in comps:
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1.0
        return PcaReport(self.ordered_columns, comps, evals, mean)

    def recurrent_values(self, support_threshold):
        """Frequency tables per unordered column plus exhaustive value
        combinations over column subsets of size <= 3 with support >=
        support_threshold."""
        if not self.unordered_columns:
            raise NoUnorderedColumns("table has no unordered columns")
        if not self.rows:
            raise EmptyTable("table has no rows")
        if not 0 < support_threshold <= 1:
            raise ValueError("support threshold must be in (0, 1]")
        m = len(self.rows)
        per_column = {}
        for j, path in enumerate(self.unordered_columns):
            counts = {}
            for r in self.rows:
                counts[r.atoms[j]] = counts.get(r.atoms[j], 0) + 1
            per_column[path] = sorted(((v, c / m) for v, c in counts.items()),
                                      key=lambda vc: (-vc[1], str(vc[0])))
        combos = []
        ncols = len(self.unordered_columns)
        for size in range(1, min(3, ncols) + 1):
            for col_idx in itertools.combinations(range(ncols), size):
                counts = {}
                for r in self.rows:
                    key = tuple(r.atoms[j] for j in col_idx)
                    counts[key] = counts.get(key, 0) + 1
                for values, c in counts.items():
                    support = c / m
                    if support >= support_threshold:
                        combos.append(Combination(
                            tuple(self.unordered_columns[j] for j in col_idx),
                            values, support))
        combos.sort(key=lambda c: (-c.support, len(c.columns), c.columns,
                                   tuple(str(v) for v in c.values)))
        return RecurrenceReport(per_column, tuple(combos))

    # -- selection -------------------------------------------------------------

    def select_random(self, k, rng):
        """k rows uniformly without replacement, in table order."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.rows:
            raise EmptyTable("cannot select from an empty table")
        if k >= len(self.rows):
            return list(self.rows)
        idx = rng.choice(len(self.rows), size=k, replace=False)
        return [self.rows[i] for i in sorted(idx)]

    def select_k_closest(self, anchor, k):
        """k rows nearest the anchor point: Euclidean distance on
        width-normalized ordered coordinates plus Hamming distance on
        unordered columns; ties broken by lower run_id."""
        if not self.rows:
            raise EmptyTable("cannot select from an empty table")
        a_reals, a_atoms = flatten(self.space, anchor)
        widths = self.space.widths()
        scored = []
        for r in self.rows:
            if len(widths):
                d = float(np.sqrt(np.sum(((r.reals - a_reals) / widths) ** 2)))
            else:
                d = 0.0
            d += sum(1 for x, y in zip(r.atoms, a_atoms) if x != y)
            scored.append((d, r.run_id, r))
        scored.sort(key=lambda t: (t[0], t[1]))
        return [r for _, _, r in scored[:k]]

    def generate_pca_samples(self, n, scale, rng):
        """n fresh points: table mean plus Gaussian jitter along the
        principal directions (stddev = scale * sqrt(variance) per
        direction, mapped back through column widths), clipped to leaf
        bounds; unordered leaves drawn from the table's empirical
        frequencies; declarative constraints enforced by rejection."""
        report = self.pca_analyze()
        space = self.space
        widths = space.widths()
        lows, highs = space.lows(), space.highs()
        stds = scale * np.sqrt(report.explained_variance)
        m = len(self.rows)
        atom_freqs = []
        for j, path in enumerate(self.unordered_columns):
            counts = {}
            for r in self.rows:
                counts[r.atoms[j]] = counts.get(r.atoms[j], 0) + 1
            values = list(counts)
            probs = np.array([counts[v] / m for v in values])
            atom_freqs.append((values, probs))
        out = []
        budget = space.rejection_budget
        rejections = 0
        while len(out) < n:
            xi = rng.standard_normal(len(self.ordered_columns))
            delta_std = report.components.T @ (xi * stds)
            reals = np.clip(report.mean + delta_std * widths, lows, highs)
            atoms = []
            for values, probs in atom_freqs:
                atoms.append(values[int(rng.choice(len(values), p=probs))])
            point = unflatten(space, reals, atoms)
            if space.satisfies_constraints(point):
                out.append(point)
                rejections = 0
            else:
                rejections += 1
                if rejections >= budget:
                    raise RejectionBudgetExhausted(
                        f"PCA sample generation rejected {budget} times in a row")
        return out

    # -- persistence -------------------------------------------------------------

    def header(self):
        return ["run_id", "score", *self.ordered_columns, *self.unordered_columns]

    def export_csv(self, path):
        """Write rows with run_id, score, then leaf columns in dimensions()
        order. Reals use 17 significant digits (exact round-trip); atoms
        are JSON-encoded cells."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            for r in self.rows:
                writer.writerow([
                    r.run_id,
                    format(r.score, ".17g"),
                    *(format(v, ".17g") for v in r.reals),
                    *(json.dumps(a, separators=(",", ":")) for a in r.atoms),
                ])


def import_csv(space, path):
    """Inverse of export_csv for the given space; exact value round-trip."""
    table = ErrorTable(space)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("missing header row") from None
        if header != table.header():
            raise SchemaMismatch(
                f"header {header!r} does not match expected {table.header()!r}")
        n_ord = len(table.ordered_columns)
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(header):
                raise SchemaMismatch(f"line {lineno}: expected {len(header)} cells")
            try:
                run_id = int(cells[0])
                score = float(cells[1])
                reals = [float(c) for c in cells[2:2 + n_ord]]
                atoms = [json.loads(c) for c in cells[2 + n_ord:]]
                point = unflatten(space, reals, atoms)
            except (ValueError, json.JSONDecodeError, OutOfRange, LengthMismatch) as exc:
                raise SchemaMismatch(f"line {lineno}: {exc}") from None
            table.insert(point, score, run_id)
    return table
