"""Point generators over a feature space.

Passive samplers (uniform, halton) ignore feedback; active samplers
(annealing, cross_entropy, bayes_opt) adapt to scores from previous
simulations. All samplers minimize: lower scores mean closer to (or deeper
into) violation. Constraints are enforced by rejection around each
sampler's raw proposal.

A sampler is bound to one feature space at construction and owns its
random-state; it is not safe for concurrent mutation.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigInvalid, RejectionBudgetExhausted, SingularKernel
from . import kernels
from .space import (
    Point,
    flatten,
    sample_leaf,
    sample_prior,
    sample_truncated_normal,
)


@dataclass(frozen=True)
class Feedback:
    point: Point
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"feedback score must be finite, got {self.score}")


class Sampler:
    """Base interface: next_point advances, observe feeds a score back."""

    passive = False

    def __init__(self, space):
        self.space = space

    def next_point(self):
        raise NotImplementedError

    def observe(self, feedback):
        """Default: ignore feedback (passive samplers)."""

    def state_snapshot(self):
        """Comparable structural snapshot, used to assert passivity."""
        raise NotImplementedError


def _rng_state(rng):
    return repr(rng.bit_generator.state)


def first_primes(k):
    primes = []
    n = 2
    while len(primes) < k:
        if all(n % p for p in primes):
            primes.append(n)
        n += 1
    return primes


# ---------------------------------------------------------------------------
# Passive samplers
# ---------------------------------------------------------------------------

class UniformSampler(Sampler):
    """Draws from the space's prior (leaf distributions + constraints)."""

    passive = True

    def __init__(self, space, rng):
        super().__init__(space)
        self.rng = rng

    def next_point(self):
        return sample_prior(self.space, self.rng)

    def state_snapshot(self):
        return ("uniform", _rng_state(self.rng))


class HaltonSampler(Sampler):
    """Low-discrepancy deterministic sequence.

    One prime base per ordered dimension plus one per unordered leaf, in
    dimensions() order; unordered coordinates map through the leaf's
    categorical CDF. Starts at index 1, skipping the all-zeros point.
    Constraint rejection simply consumes further indices.
    """

    passive = True

    def __init__(self, space, rng=None):
        super().__init__(space)
        self.index = 1
        n = len(space.ordered) + len(space.unordered)
        self.bases = tuple(first_primes(n))
        self._bases_arr = np.asarray(self.bases, dtype=np.int64)

    def next_point(self):
        space = self.space
        n_ord = len(space.ordered)
        for _ in range(space.rejection_budget):
            row = kernels.halton_block(self.index, 1, self._bases_arr)[0]
            self.index += 1
            assignments = {}
            for i, path in enumerate(space.ordered):
                lo, hi = space.bounds(path)
                assignments[path] = lo + row[i] * (hi - lo)
            for j, path in enumerate(space.unordered):
                values = space.set_values(path)
                spec = space.distributions[path]
                if spec.kind == "categorical":
                    w = np.asarray(spec.weights, dtype=float)
                else:
                    w = np.ones(len(values))
                cdf = np.cumsum(w) / w.sum()
                idx = min(int(np.searchsorted(cdf, row[n_ord + j], side="right")),
                          len(values) - 1)
                assignments[path] = values[idx]
            point = Point(assignments)
            if space.satisfies_constraints(point):
                return point
        raise RejectionBudgetExhausted(
            f"halton found no constraint-satisfying point in {space.rejection_budget} indices")

    def state_snapshot(self):
        return ("halton", self.index, self.bases)


# ---------------------------------------------------------------------------
# Simulated annealing
# ---------------------------------------------------------------------------

class AnnealingSampler(Sampler):
    """Metropolis search with Gaussian proposals and geometric cooling.

    The first `warmup` proposals are prior samples whose score magnitudes
    set the initial temperature; after that, proposals perturb the current
    point by 10% of each dimension's width and unordered leaves are
    redrawn with a fixed probability.
    """

    def __init__(self, space, rng, step_frac=0.1, cooling=0.97, warmup=5,
                 redraw_prob=0.2):
        super().__init__(space)
        self.rng = rng
        self.step_frac = step_frac
        self.cooling = cooling
        self.warmup = warmup
        self.redraw_prob = redraw_prob
        self.temperature = None
        self.current = None
        self.current_score = math.inf
        self._warmup_scores = []

    @staticmethod
    def accept_probability(delta, temperature):
        if delta <= 0:
            return 1.0
        if temperature <= 0:
            return 0.0
        return math.exp(-delta / temperature)

    def next_point(self):
        space = self.space
        if self.temperature is None or self.current is None:
            return sample_prior(space, self.rng)
        for _ in range(space.rejection_budget):
            assignments = {}
            for path in space.ordered:
                lo, hi = space.bounds(path)
                assignments[path] = sample_truncated_normal(
                    self.rng, self.current.value(path), self.step_frac * (hi - lo),
                    lo, hi, space.rejection_budget)
            for path in space.unordered:
                if self.rng.random() < self.redraw_prob:
                    assignments[path] = sample_leaf(space, path, self.rng)
                else:
                    assignments[path] = self.current.value(path)
            point = Point(assignments)
            if space.satisfies_constraints(point):
                return point
        raise RejectionBudgetExhausted(
            f"annealing proposal rejected {space.rejection_budget} times")

    def observe(self, feedback):
        if self.temperature is None:
            self._warmup_scores.append(feedback.score)
            if feedback.score < self.current_score:
                self.current = feedback.point
                self.current_score = feedback.score
            if len(self._warmup_scores) >= self.warmup:
                mag = float(np.mean(np.abs(self._warmup_scores)))
                self.temperature = max(mag, 1e-8)
            return
        delta = feedback.score - self.current_score
        if self.rng.random() < self.accept_probability(delta, self.temperature):
            self.current = feedback.point
            self.current_score = feedback.score
        self.temperature = max(self.temperature * self.cooling, 1e-12)

    def state_snapshot(self):
        return ("annealing", self.temperature, self.current, self.current_score,
                _rng_state(self.rng))


# ---------------------------------------------------------------------------
# Cross-entropy method
# ---------------------------------------------------------------------------

class CrossEntropySampler(Sampler):
    """Batch sampler refit to the elite (lowest-score) fraction.

    The first batch is drawn from the space's declared prior; each refit
    then tilts a truncated-Gaussian (ordered dims) / smoothed-categorical
    (unordered leaves) proposal toward the elites.
    """

    def __init__(self, space, rng, batch_size=20, elite_frac=0.1, min_elites=2,
                 smoothing=0.1, stddev_floor_frac=1e-3, stddev_smoothing=0.5):
        super().__init__(space)
        self.rng = rng
        self.batch_size = int(batch_size)
        if self.batch_size < 1:
            raise ConfigInvalid("cross_entropy batch size must be >= 1", "sampler.batch")
        self.elite_frac = elite_frac
        self.min_elites = min_elites
        self.smoothing = smoothing
        # smoothed stddev updating: tiny elite sets (2 of 20) otherwise
        # collapse the proposal before the mean has settled
        self.stddev_smoothing = stddev_smoothing
        lows, highs = space.lows(), space.highs()
        widths = highs - lows
        self.stddev_floor = stddev_floor_frac * widths
        means = (lows + highs) / 2.0
        stds = widths / 2.0
        for i, path in enumerate(space.ordered):
            spec = space.distributions[path]
            if spec.kind == "truncated_normal":
                means[i] = spec.mean
                stds[i] = spec.stddev
        self.means = means
        self.stddevs = np.maximum(stds, self.stddev_floor) if len(widths) else stds
        self.weights = {}
        self._value_index = {}
        for path in space.unordered:
            values = space.set_values(path)
            spec = space.distributions[path]
            w = np.asarray(spec.weights, dtype=float) if spec.kind == "categorical" \
                else np.ones(len(values))
            self.weights[path] = w / w.sum()
            self._value_index[path] = {v: i for i, v in enumerate(values)}
        self._batch = []
        self._warm = True  # prior sampling until the first refit

    def n_elites(self):
        return min(self.batch_size,
                   max(self.min_elites, int(self.elite_frac * self.batch_size)))

    def next_point(self):
        space = self.space
        if self._warm:
            return sample_prior(space, self.rng)
        for _ in range(space.rejection_budget):
            assignments = {}
            for i, path in enumerate(space.ordered):
                lo, hi = space.bounds(path)
                assignments[path] = sample_truncated_normal(
                    self.rng, self.means[i], self.stddevs[i], lo, hi,
                    space.rejection_budget)
            for path in space.unordered:
                values = space.set_values(path)
                idx = self.rng.choice(len(values), p=self.weights[path])
                assignments[path] = values[int(idx)]
            point = Point(assignments)
            if space.satisfies_constraints(point):
                return point
        raise RejectionBudgetExhausted(
            f"cross-entropy proposal rejected {space.rejection_budget} times")

    def observe(self, feedback):
        self._batch.append(feedback)
        if len(self._batch) < self.batch_size:
            return
        scores = np.array([fb.score for fb in self._batch])
        elite_idx = np.argsort(scores, kind="stable")[:self.n_elites()]
        elite = [self._batch[i] for i in elite_idx]
        self._batch = []
        self._warm = False
        if len(self.space.ordered):
            mat = np.array([[fb.point.value(p) for p in self.space.ordered]
                            for fb in elite])
            self.means = mat.mean(axis=0)
            beta = self.stddev_smoothing
            blended = beta * mat.std(axis=0) + (1.0 - beta) * self.stddevs
            self.stddevs = np.maximum(blended, self.stddev_floor)
        for path in self.space.unordered:
            counts = np.full(len(self.weights[path]), self.smoothing)
            for fb in elite:
                counts[self._value_index[path][fb.point.value(path)]] += 1.0
            self.weights[path] = counts / counts.sum()

    def state_snapshot(self):
        return ("cross_entropy", self._warm, tuple(self.means), tuple(self.stddevs),
                {k: tuple(v) for k, v in self.weights.items()}, len(self._batch))


# ---------------------------------------------------------------------------
# Bayesian optimization
# ---------------------------------------------------------------------------

def _se_kernel(a, b, length_scales):
    diff = (a[:, None, :] - b[None, :, :]) / length_scales
    return np.exp(-0.5 * np.sum(diff * diff, axis=2))


class BayesOptSampler(Sampler):
    """GP posterior with a squared-exponential kernel (fixed length scales,
    no hyperparameter optimization) and expected-improvement-for-
    minimization acquisition over random candidates plus local refinement.
    """

    def __init__(self, space, rng, length_scale_frac=0.2, jitter=1e-6,
                 jitter_max=1e-2, n_candidates=256, refine_rounds=3,
                 refine_samples=8):
        super().__init__(space)
        self.rng = rng
        self.base_jitter = jitter
        self.jitter_max = jitter_max
        self.n_candidates = n_candidates
        self.refine_rounds = refine_rounds
        self.refine_samples = refine_samples
        widths = space.widths()
        self.length_scales = np.maximum(length_scale_frac * widths, 1e-12) \
            if len(widths) else widths
        self.history_x = []
        self.history_y = []
        self._cache = None  # (n_fitted, X, L, alpha, jitter)

    def observe(self, feedback):
        reals, _ = flatten(self.space, feedback.point)
        self.history_x.append(reals)
        self.history_y.append(float(feedback.score))

    # -- GP internals --------------------------------------------------------

    def _fit(self):
        if self._cache is not None and self._cache[0] == len(self.history_x):
            return self._cache
        x = np.array(self.history_x)
        y = np.array(self.history_y)
        k = _se_kernel(x, x, self.length_scales)
        jitter = self.base_jitter
        while True:
            try:
                chol = np.linalg.cholesky(k + jitter * np.eye(len(x)))
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
                if jitter > self.jitter_max:
                    raise SingularKernel(
                        f"kernel matrix singular even at jitter {self.jitter_max}")
        alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
        self._cache = (len(self.history_x), x, chol, alpha, jitter)
        return self._cache

    def posterior(self, query):
        """Posterior mean and variance at query rows (m x d array)."""
        _, x, chol, alpha, _ = self._fit()
        query = np.atleast_2d(np.asarray(query, dtype=float))
        k_star = _se_kernel(query, x, self.length_scales)
        mean = k_star @ alpha
        v = np.linalg.solve(chol, k_star.T)
        var = np.maximum(1.0 - np.sum(v * v, axis=0), 0.0)
        return mean, var

    def fitted_jitter(self):
        return self._fit()[4]

    def expected_improvement(self, query):
        mean, var = self.posterior(query)
        sigma = np.sqrt(var)
        improve = min(self.history_y) - mean
        ei = np.maximum(improve, 0.0)  # zero-variance limit
        pos = sigma > 1e-12
        if np.any(pos):
            z = improve[pos] / sigma[pos]
            ei[pos] = improve[pos] * ndtr(z) \
                + sigma[pos] * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        return ei

    # -- proposal -------------------------------------------------------------

    def _propose(self):
        space = self.space
        candidates = [sample_prior(space, self.rng) for _ in range(self.n_candidates)]
        reals = np.array([flatten(space, p)[0] for p in candidates])
        ei = self.expected_improvement(reals)
        best_i = int(np.argmax(ei))
        best_point = candidates[best_i]
        best_reals = reals[best_i]
        best_ei = ei[best_i]
        if len(space.ordered):
            lows, highs = space.lows(), space.highs()
            widths = highs - lows
            atoms = {p: best_point.value(p) for p in space.unordered}
            for r in range(self.refine_rounds):
                scale = 0.05 * widths / (2.0 ** r)
                for _ in range(self.refine_samples):
                    cand = np.clip(best_reals + self.rng.normal(0.0, 1.0, widths.size) * scale,
                                   lows, highs)
                    assignments = dict(zip(space.ordered, (float(v) for v in cand)))
                    assignments.update(atoms)
                    point = Point(assignments)
                    if not space.satisfies_constraints(point):
                        continue
                    cand_ei = self.expected_improvement(cand[None, :])[0]
                    if cand_ei > best_ei:
                        best_ei = cand_ei
                        best_reals = cand
                        best_point = point
        return best_point

    def propose_reals(self):
        """The raw real-vector proposal (requires at least one observation)."""
        point = self._propose()
        return flatten(self.space, point)[0]

    def next_point(self):
        if not self.history_x:
            return sample_prior(self.space, self.rng)
        return self._propose()

    def state_snapshot(self):
        return ("bayes_opt", len(self.history_x), _rng_state(self.rng))


# ---------------------------------------------------------------------------
# Factory
# ---------------------------------------------------------------------------

_KINDS = {
    "uniform": (UniformSampler, {}),
    "halton": (HaltonSampler, {}),
    "annealing": (AnnealingSampler,
                  {"step_frac": "step_frac", "cooling": "cooling",
                   "warmup": "warmup", "redraw_prob": "redraw_prob"}),
    "cross_entropy": (CrossEntropySampler,
                      {"batch": "batch_size", "batch_size": "batch_size",
                       "elite_frac": "elite_frac", "min_elites": "min_elites",
                       "smoothing": "smoothing",
                       "stddev_floor_frac": "stddev_floor_frac",
                       "stddev_smoothing": "stddev_smoothing"}),
    "bayes_opt": (BayesOptSampler,
                  {"length_scale_frac": "length_scale_frac", "jitter": "jitter",
                   "jitter_max": "jitter_max", "n_candidates": "n_candidates",
                   "refine_rounds": "refine_rounds",
                   "refine_samples": "refine_samples"}),
}


def make_sampler(spec, space, rng):
    """Build a sampler from a config mapping like
    ``{"kind": "cross_entropy", "batch": 20}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _KINDS:
        raise ConfigInvalid(f"unknown sampler kind {kind!r}", "sampler.kind")
    cls, key_map = _KINDS[kind]
    kwargs = {}
    for key, value in spec.items():
        if key not in key_map:
            raise ConfigInvalid(f"unknown sampler option {key!r}", f"sampler.{key}")
        kwargs[key_map[key]] = value
    return cls(space, rng, **kwargs)
