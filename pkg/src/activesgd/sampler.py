"""Dynamic weighted sampling over training instances.

The sampling distribution mixes a uniform floor with normalized per-instance
weights: p_i = beta/n + (1 - beta) * w_i / total. A Fenwick (binary indexed)
tree keeps draws and single-weight updates at O(log n) because weights change
on every training iteration.
"""

import numpy as np


class WeightIndex:
    """Non-negative per-instance weights with O(log n) weighted sampling.

    Draw protocol (shared with `naive_draw_batch` so both consume a given
    random stream identically): when total == 0 or beta >= 1 a draw is one
    uniform integer; when 0 < beta < 1 a routing uniform decides between the
    uniform branch and a prefix search on a second uniform; when beta == 0
    only the search uniform is drawn.
    """

    def __init__(self, weights, beta):
        weights = np.asarray(weights, dtype=np.float64).copy()
        if weights.ndim != 1 or weights.size < 1:
            raise ValueError("weights must be a non-empty 1-d vector")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and non-negative")
        if not 0.0 <= beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        self.n = weights.size
        self.beta = float(beta)
        self.weights = weights
        self._top = 1 << (self.n.bit_length() - 1)
        if self._top > self.n:
            self._top >>= 1
        self._updates = 0
        self._rebuild()

    def _rebuild(self):
        tree = np.zeros(self.n + 1)
        tree[1:] = self.weights
        for i in range(1, self.n + 1):
            j = i + (i & -i)
            if j <= self.n:
                tree[j] += tree[i]
        self._tree = tree
        self.total = float(np.sum(self.weights))
        self._updates = 0

    def recompute(self):
        """Rebuild prefix sums and total from the stored weights (drift control)."""
        self._rebuild()

    def update(self, i, new_weight):
        """Set weights[i] = new_weight, keeping prefix sums consistent."""
        i = int(i)
        if not 0 <= i < self.n:
            raise ValueError(f"id {i} out of range")
        new_weight = float(new_weight)
        if not np.isfinite(new_weight) or new_weight < 0:
            raise ValueError("weight must be finite and non-negative")
        delta = new_weight - self.weights[i]
        self.weights[i] = new_weight
        j = i + 1
        while j <= self.n:
            self._tree[j] += delta
            j += j & -j
        self.total += delta
        self._updates += 1
        if self._updates >= self.n:
            self._rebuild()

    def probability(self, i):
        """Exact sampling probability p_i = beta/n + (1-beta) w_i/total."""
        i = int(i)
        if not 0 <= i < self.n:
            raise ValueError(f"id {i} out of range")
        if self.total <= 0.0:
            return 1.0 / self.n
        return self.beta / self.n + (1.0 - self.beta) * self.weights[i] / self.total

    def probabilities(self, ids=None):
        """Vectorized `probability`; all n entries when `ids` is None."""
        w = self.weights if ids is None else self.weights[ids]
        if self.total <= 0.0:
            return np.full(w.shape, 1.0 / self.n)
        return self.beta / self.n + (1.0 - self.beta) * w / self.total

    def _find_batch(self, targets):
        """Smallest ids whose weight prefix sums exceed the targets."""
        size = targets.shape[0]
        pos = np.zeros(size, dtype=np.int64)
        rem = targets.astype(np.float64, copy=True)
        k = self._top
        while k:
            nxt = pos + k
            node = np.where(nxt <= self.n, self._tree[np.minimum(nxt, self.n)], np.inf)
            take = node <= rem
            pos = np.where(take, nxt, pos)
            rem = np.where(take, rem - node, rem)
            k >>= 1
        # guard against float drift walking past the last positive weight
        return np.minimum(pos, self.n - 1)

    def draw_batch(self, b, rng):
        """b independent draws (with replacement) following the draw protocol."""
        if b < 1:
            raise ValueError("batch size must be at least 1")
        if self.total <= 0.0 or self.beta >= 1.0:
            return rng.integers(0, self.n, size=b)
        if self.beta <= 0.0:
            return self._find_batch(rng.random(b) * self.total)
        routing = rng.random(b)
        uniform = routing < self.beta
        ids = np.empty(b, dtype=np.int64)
        k = int(uniform.sum())
        if k:
            ids[uniform] = rng.integers(0, self.n, size=k)
        if b - k:
            ids[~uniform] = self._find_batch(rng.random(b - k) * self.total)
        return ids

    def sample(self, rng):
        """One draw; identical to draw_batch(1) on the same stream."""
        return int(self.draw_batch(1, rng)[0])

    def dump_csv(self, path):
        """Debug dump of (id, weight, probability) triples."""
        probs = self.probabilities()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("id,weight,probability\n")
            for i in range(self.n):
                fh.write(f"{i},{float(self.weights[i])!r},{float(probs[i])!r}\n")


def naive_draw_batch(weights, beta, b, rng):
    """Linear-scan reference sampler with the same draw protocol as WeightIndex."""
    weights = np.asarray(weights, dtype=np.float64)
    n = weights.size
    total = float(np.sum(weights))

    def _scan(target):
        acc = 0.0
        for i in range(n):
            acc += weights[i]
            if target < acc:
                return i
        return n - 1

    if total <= 0.0 or beta >= 1.0:
        return rng.integers(0, n, size=b)
    if beta <= 0.0:
        return np.array([_scan(u * total) for u in rng.random(b)], dtype=np.int64)
    routing = rng.random(b)
    uniform = routing < beta
    ids = np.empty(b, dtype=np.int64)
    k = int(uniform.sum())
    if k:
        ids[uniform] = rng.integers(0, n, size=k)
    if b - k:
        ids[~uniform] = [_scan(u * total) for u in rng.random(b - k)]
    return ids


def stage_subset(n, m, rng):
    """m distinct ids drawn uniformly without replacement, returned sorted."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    return np.sort(rng.choice(n, size=m, replace=False))


class HistoryStore:
    """Last-visit iteration per instance; -1 marks never visited."""

    def __init__(self, n):
        if n < 1:
            raise ValueError("n must be at least 1")
        self.last_visit = np.full(n, -1, dtype=np.int64)
        self.current_iteration = 0

    def advance(self, iteration):
        if iteration < self.current_iteration:
            raise ValueError("iterations must not go backwards")
        self.current_iteration = int(iteration)

    def record_visits(self, ids):
        self.last_visit[np.asarray(ids, dtype=np.int64)] = self.current_iteration

    def interval(self, i):
        """Iterations since the last visit; never-visited ids report current + 1."""
        return int(self.current_iteration - self.last_visit[int(i)])

    def intervals(self):
        return self.current_iteration - self.last_visit
