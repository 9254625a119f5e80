"""Modified-cluster statistics over binary control inputs.

A site is *modified* when its final digit differs from its input digit.
Two modified sites belong to the same cluster when some gate that actually
changed the basis string acted on both of them; clusters are the connected
components of that relation. On the linear Type-B chain this reproduces the
"0 followed by a run of 1s" pattern; on trees it yields paths through the
representatives.

Enumeration is vectorised over blocks of inputs with numpy and may be split
across worker processes over disjoint input ranges. Counts are Python ints,
so merged histograms are exact and independent of the partitioning.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import numpy as np

from .core import (
    BasisString,
    CapacityError,
    Circuit,
    Controlled,
    CyclicShift,
    Gate,
    SubspaceFlip,
    SubspaceHadamard,
    SubspacePhase,
    SubspaceSwap,
    ValidationError,
    check_basis,
    classical_map,
    classify_classical,
)
from .decomposer import Topology

EXHAUSTIVE_CAP = 24
BLOCK = 1 << 15


class NonClassicalError(ValidationError):
    """The circuit does not act as a basis permutation."""


def classical_image(circuit: Circuit, digits: Sequence[int]) -> BasisString:
    if classify_classical(circuit) is None:
        raise NonClassicalError("circuit contains phase or Hadamard gates; no classical image")
    return classical_map(circuit, check_basis(digits, circuit.dims))


# ---------------------------------------------------------------------------
# vectorised evaluation


def _apply_batch(gate: Gate, arr: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Apply ``gate`` to every row of ``arr`` in place; return the rows it changed."""
    rows = np.ones(arr.shape[0], dtype=bool)
    while isinstance(gate, Controlled):
        for s, lv in gate.controls:
            rows &= arr[:, s] == lv
        gate = gate.inner
    if isinstance(gate, SubspaceFlip):
        x = arr[:, gate.site]
        hit = rows & ((x == gate.a) | (x == gate.b))
        arr[hit, gate.site] = np.where(x[hit] == gate.a, gate.b, gate.a)
        return hit
    if isinstance(gate, CyclicShift):
        d = dims[gate.site]
        arr[rows, gate.site] = (arr[rows, gate.site].astype(np.int16) + gate.direction) % d
        return rows
    if isinstance(gate, SubspaceSwap):
        x, y = arr[:, gate.site1], arr[:, gate.site2]
        fwd = rows & (x == gate.a) & (y == gate.d)
        back = rows & (x == gate.b) & (y == gate.c)
        arr[fwd, gate.site1], arr[fwd, gate.site2] = gate.b, gate.c
        arr[back, gate.site1], arr[back, gate.site2] = gate.a, gate.d
        return fwd | back
    if isinstance(gate, SubspacePhase):
        return np.zeros(arr.shape[0], dtype=bool)
    if isinstance(gate, SubspaceHadamard):
        raise NonClassicalError("subspace Hadamard has no classical image")
    raise ValidationError(f"unknown gate type {type(gate).__name__}")


def _bits(start: int, stop: int, n_inputs: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n_inputs - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def cluster_sizes_batch(circuit: Circuit, inputs: np.ndarray) -> np.ndarray:
    """Per-input cluster-size table: entry ``[row, r]`` is the size of the cluster rooted at site r."""
    n_sites = circuit.n_sites
    arr = np.zeros((inputs.shape[0], n_sites), dtype=np.uint8)
    arr[:, :inputs.shape[1]] = inputs
    start = arr.copy()
    fired = [(g.sites, _apply_batch(g, arr, circuit.dims)) for g in circuit.gates]
    modified = arr != start
    sentinel = n_sites
    labels = np.where(modified, np.arange(n_sites, dtype=np.int32), sentinel)
    links = []
    for sites, hit in fired:
        for i, a in enumerate(sites):
            for b in sites[i + 1:]:
                mask = hit & modified[:, a] & modified[:, b]
                if mask.any():
                    links.append((a, b, mask))
    changed = True
    while changed:
        changed = False
        for a, b, mask in links:
            low = np.minimum(labels[:, a], labels[:, b])
            for s in (a, b):
                upd = mask & (labels[:, s] > low)
                if upd.any():
                    labels[upd, s] = low[upd]
                    changed = True
    return np.stack([(labels == r).sum(axis=1) for r in range(n_sites)], axis=1)


def _count_range(circuit: Circuit, n_inputs: int, start: int, stop: int) -> Counter:
    out: Counter = Counter()
    for lo in range(start, stop, BLOCK):
        hi = min(stop, lo + BLOCK)
        sizes = cluster_sizes_batch(circuit, _bits(lo, hi, n_inputs))
        hist = np.bincount(sizes.ravel())
        for s in np.flatnonzero(hist[1:]) + 1:
            out[int(s)] += int(hist[s])
    return out


@dataclass
class ClusterHistogram:
    n: int
    total_configs: int
    counts: dict[int, int] = field(default_factory=dict)
    mode: str = "exhaustive"
    samples: int | None = None
    seed: int | None = None

    def merge(self, other: "ClusterHistogram") -> "ClusterHistogram":
        if self.n != other.n or self.mode != other.mode:
            raise ValidationError("cannot merge histograms of different shape or mode")
        counts = Counter(self.counts)
        counts.update(other.counts)
        return ClusterHistogram(self.n, self.total_configs + other.total_configs,
                                dict(sorted(counts.items())), self.mode, self.samples, self.seed)

    def frequency(self, size: int) -> float:
        return self.counts.get(size, 0) / self.total_configs if self.total_configs else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size", "count", "total_configs", "frequency"])
        for size, count in sorted(self.counts.items()):
            w.writerow([size, count, self.total_configs, f"{count / self.total_configs:.12g}"])
        return buf.getvalue()


def _n_inputs(circuit: Circuit, n_inputs: int | None) -> int:
    if n_inputs is None:
        n_inputs = int(circuit.meta.get("n", circuit.n_sites))
    if not 1 <= n_inputs <= circuit.n_sites:
        raise ValidationError(f"input width {n_inputs} invalid for {circuit.n_sites} sites")
    return n_inputs


def _worker(args):
    circuit, n_inputs, lo, hi = args
    return _count_range(circuit, n_inputs, lo, hi)


def cluster_histogram(circuit: Circuit, mode: str = "exhaustive", *, samples: int = 100_000,
                      seed: int = 0, workers: int = 1, n_inputs: int | None = None,
                      cap: int = EXHAUSTIVE_CAP) -> ClusterHistogram:
    """Histogram of modified-cluster sizes over binary inputs on the first ``n_inputs`` sites.

    Remaining sites start at 0. ``mode`` is ``"exhaustive"`` (all 2**n inputs,
    split into ``workers`` contiguous ranges) or ``"sampled"`` (``samples``
    uniform inputs drawn from a generator seeded with ``seed``).
    """
    if classify_classical(circuit) is None:
        raise NonClassicalError("cluster statistics need a classical circuit")
    n = _n_inputs(circuit, n_inputs)
    if mode == "exhaustive":
        if n > cap:
            raise CapacityError(f"exhaustive enumeration of 2^{n} inputs exceeds cap 2^{cap}")
        total = 1 << n
        workers = max(1, int(workers))
        edges = [total * i // workers for i in range(workers + 1)]
        jobs = [(circuit, n, edges[i], edges[i + 1]) for i in range(workers) if edges[i] < edges[i + 1]]
        if workers == 1:
            parts = [_worker(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_worker, jobs))
        counts: Counter = Counter()
        for p in parts:
            counts.update(p)
        return ClusterHistogram(n, total, dict(sorted(counts.items())), "exhaustive")
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        counts = Counter()
        left = samples
        while left > 0:
            m = min(BLOCK, left)
            inputs = rng.integers(0, 2, size=(m, n), dtype=np.uint8)
            hist = np.bincount(cluster_sizes_batch(circuit, inputs).ravel())
            for s in np.flatnonzero(hist[1:]) + 1:
                counts[int(s)] += int(hist[s])
            left -= m
        return ClusterHistogram(n, samples, dict(sorted(counts.items())), "sampled", samples, seed)
    raise ValidationError(f"unknown mode {mode!r}; use 'exhaustive' or 'sampled'")


def empirical_S(histogram: ClusterHistogram) -> float:
    """Mean total size of modified clusters per input configuration."""
    if not histogram.total_configs:
        return 0.0
    return float(Fraction(sum(s * c for s, c in histogram.counts.items()), histogram.total_configs))


# ---------------------------------------------------------------------------
# runs of ones


def runs_exact(n: int, k: int) -> int:
    """Number of maximal 1-runs of length exactly k over all n-bit strings, for 1 <= k <= n-2."""
    if not 1 <= k <= n - 2:
        raise ValidationError(f"closed form needs 1 <= k <= n-2, got n={n}, k={k}")
    return (n - k + 3) << (n - k - 2)


def runs_brute(n: int, k: int) -> int:
    """Count maximal 1-runs of length exactly k by enumerating all 2**n strings."""
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got n={n}, k={k}")
    if n > EXHAUSTIVE_CAP:
        raise CapacityError(f"enumeration of 2^{n} strings exceeds cap 2^{EXHAUSTIVE_CAP}")
    bits = _bits(0, 1 << n, n).astype(bool)
    padded = np.zeros((bits.shape[0], n + 2), dtype=bool)
    padded[:, 1:-1] = bits
    total = 0
    for p in range(1, n - k + 2):
        window = padded[:, p:p + k].all(axis=1)
        total += int(np.count_nonzero(window & ~padded[:, p - 1] & ~padded[:, p + k]))
    return total


# ---------------------------------------------------------------------------
# predicted frequencies and the figure of merit


def predicted_frequency(topology: "Topology | str", n: int, k: int) -> float:
    """Expected number of size-k clusters per configuration, as a closed form in n and k."""
    topology = Topology.parse(topology)
    if k < 1:
        raise ValidationError("cluster size k must be >= 1")
    if topology is Topology.TYPE_A_LINEAR:
        return 2.0**-k
    if topology is Topology.TYPE_B_LINEAR:
        return (n - k + 3) * 2.0 ** (-k - 2) - 2.0**-k
    if topology is Topology.TYPE_B_TREE:
        return n * 2.0 ** (-(2**k) - k)
    if topology is Topology.TYPE_A_REUSE_TREE:
        return (n / k) * 2.0**-k
    if topology is Topology.TYPE_A_TWO_CONTROL_TREE:
        return (n + 1) / (k + 1) * 2.0 ** (-k - (n + 1) / (k + 1))
    raise ValidationError(f"no f(k) closed form is available for {topology.value}")


def figure_of_merit_sum(topology: "Topology | str", n: int) -> float:
    """Partial sum over k = 1..n of k times the per-size cluster weight.

    For the linear Type-B chain the weight is (n - k) 2^(-k-2), the summand
    whose sum is the known closed form; it differs from
    :func:`predicted_frequency` by 2^(-k-2).
    """
    topology = Topology.parse(topology)
    if n < 1:
        raise ValidationError("n must be >= 1")
    if topology is Topology.TYPE_B_LINEAR:
        return math.fsum(k * (n - k) * 2.0 ** (-k - 2) for k in range(1, n + 1))
    return math.fsum(k * predicted_frequency(topology, n, k) for k in range(1, n + 1))


def figure_of_merit(topology: "Topology | str", n: int) -> float:
    """Closed form where one exists (both linear chains), otherwise the partial sum."""
    topology = Topology.parse(topology)
    if n < 1:
        raise ValidationError("n must be >= 1")
    if topology is Topology.TYPE_A_LINEAR:
        return 2 - (n + 2) / 2**n
    if topology is Topology.TYPE_B_LINEAR:
        return (n / 4) * (2 - (n + 2) / 2**n) - 0.25 * (6 - (n * n + 4 * n + 6) / 2**n)
    return figure_of_merit_sum(topology, n)


# ---------------------------------------------------------------------------
# tree recurrence

RECURRENCE_CAP = 6


@dataclass(frozen=True)
class RecurrenceTable:
    depth: int
    values: Mapping[int, Mapping[int, int]]

    def get(self, N: int, k: int) -> int:
        """Value for depth ``N`` and path length ``k``, including the boundary cases."""
        if k > N - 1:
            return 0
        if k == N - 1:
            return 1
        return self.values[N][k]

    def rows(self) -> Iterator[tuple[int, int, int]]:
        for N in sorted(self.values):
            for k in sorted(self.values[N]):
                yield N, k, self.values[N][k]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "k", "R"])
        for row in self.rows():
            w.writerow(row)
        return buf.getvalue()


def tree_recurrence(n_max: int, cap: int = RECURRENCE_CAP) -> RecurrenceTable:
    """Exact integer table R[N][k] for 1 <= N <= n_max and 1 <= k <= N - 1.

    Step from N to N + 1 for k < N::

        R[N+1][k] = 2^(2^(N-1)+1) R[N][k]
                    + (2^(2^(N-k-1)+1) - 1) R[N-k][k]
                    + 2^(2^(N-k-1)) (2^(2^(N-k-1)) - 1)

    with R[N+1][N] = 1 and R[N+1][k] = 0 for k > N.
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    if n_max > cap:
        raise CapacityError(f"recurrence depth {n_max} exceeds cap {cap}")
    values: dict[int, dict[int, int]] = {1: {}}
    table = RecurrenceTable(n_max, values)
    for N in range(1, n_max):
        row = {}
        for k in range(1, N):
            e = 1 << (N - k - 1)
            row[k] = ((1 << ((1 << (N - 1)) + 1)) * table.get(N, k)
                      + ((1 << (e + 1)) - 1) * table.get(N - k, k)
                      + (1 << e) * ((1 << e) - 1))
        row[N] = 1
        values[N + 1] = row
    return table


def layered_path_counts(n: int) -> dict[int, int]:
    """Diagnostic: counts of maximal chains of fired swaps on the balanced Type-B tree.

    A chain ends at a representative whose own gate fired and grows through
    its left child while that child's gate also fired. Used to compare the
    recurrence with direct enumeration.
    """
    if n < 2 or n & (n - 1):
        raise ValidationError("n must be a power of two >= 2")
    if n > EXHAUSTIVE_CAP:
        raise CapacityError(f"enumeration of 2^{n} inputs exceeds cap 2^{EXHAUSTIVE_CAP}")
    out: Counter = Counter()
    for lo in range(0, 1 << n, BLOCK):
        s = _bits(lo, min(1 << n, lo + BLOCK), n).astype(np.int8)
        chain = np.zeros_like(s, dtype=np.int32)
        reps = list(range(n))
        while len(reps) > 1:
            nxt = []
            for a, b in zip(reps[::2], reps[1::2]):
                fired = (s[:, a] == 0) & (s[:, b] == 1)
                s[fired, a], s[fired, b] = 2, 0
                length = np.where(fired, chain[:, a] + 1, 0)
                for c in np.flatnonzero(np.bincount(length)[1:]) + 1:
                    out[int(c)] += int(np.count_nonzero(length == c))
                chain[:, b] = length
                nxt.append(b)
            reps = nxt
    return dict(sorted(out.items()))
