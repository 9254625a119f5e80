"""Encoder and full multi-controlled-Toffoli builders for every topology.

Pair convention for the two-site atoms: in a pair ``(first, second)`` taken
in site order, the *second* site survives as the representative carrying
the AND of its sub-tree to the next layer. Trees are built over
``range(n)``; the last site is always the root of Type-B and re-use trees.

Balanced trees need ``n`` a power of two (``2**m - 1`` for the two-control
tree). ``ragged=True`` lifts that: an unpaired representative is carried
up unchanged, and the two-control tree splits its sites as evenly as
possible.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import Sequence

from .core import (
    Circuit,
    Controlled,
    CyclicShift,
    Gate,
    SubspaceFlip,
    SubspaceSwap,
    SubspaceHadamard,
    ValidationError,
    inverse_gate,
)

QUTRIT = 3


class ShapeError(ValidationError):
    """Control count incompatible with the requested topology."""


class Topology(enum.Enum):
    TYPE_A_LINEAR = "type-a-linear"
    TYPE_B_LINEAR = "type-b-linear"
    TYPE_B_TREE = "type-b-tree"
    TYPE_A_REUSE_TREE = "type-a-reuse-tree"
    TYPE_A_TWO_CONTROL_TREE = "type-a-two-control-tree"
    STAR_FLIP = "star-flip"
    STAR_SHIFT = "star-shift"

    @classmethod
    def parse(cls, value: "str | Topology") -> "Topology":
        if isinstance(value, Topology):
            return value
        key = value.strip().lower().replace("_", "-")
        for t in cls:
            if t.value == key or t.name.lower().replace("_", "-") == key:
                return t
        raise ValueError(f"unknown topology {value!r}; choose from {[t.value for t in cls]}")


TREES = (Topology.TYPE_B_TREE, Topology.TYPE_A_REUSE_TREE, Topology.TYPE_A_TWO_CONTROL_TREE)


@dataclass(frozen=True)
class BuildReport:
    circuit: Circuit
    depth: int
    gate_count: int
    max_level_used: tuple[int, ...]
    root: int
    activation_level: int

    @property
    def topology(self) -> Topology:
        return Topology(self.circuit.meta["topology"])


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def check_shape(topology: Topology, n: int, ragged: bool = False) -> None:
    if n < 2:
        raise ShapeError(f"{topology.value} needs at least 2 controls, got n={n}")
    if ragged:
        return
    if topology in (Topology.TYPE_B_TREE, Topology.TYPE_A_REUSE_TREE) and not _is_pow2(n):
        raise ShapeError(f"{topology.value} requires n to be a power of two, got n={n}")
    if topology is Topology.TYPE_A_TWO_CONTROL_TREE and not (n >= 3 and _is_pow2(n + 1)):
        raise ShapeError(f"{topology.value} requires n = 2**m - 1 with m >= 2, got n={n}")


# ---------------------------------------------------------------------------
# builders return (gates, dims, root, activation level)


def _type_a_linear(n):
    gates = [Controlled(((k - 1, 1 if k == 1 else 2),), SubspaceFlip(k, 1, 2)) for k in range(1, n)]
    return gates, [QUTRIT] * n, n - 1, 2


def _type_b_linear(n):
    gates = [SubspaceSwap(k - 1, 0, 2, k, 0, 1) for k in range(1, n)]
    return gates, [QUTRIT] * n, n - 1, 1


def _type_b_tree(n):
    gates = []
    reps = list(range(n))
    while len(reps) > 1:
        nxt = []
        for i in range(0, len(reps) - 1, 2):
            gates.append(SubspaceSwap(reps[i], 0, 2, reps[i + 1], 0, 1))
            nxt.append(reps[i + 1])
        if len(reps) % 2:
            nxt.append(reps[-1])
        reps = nxt
    return gates, [QUTRIT] * n, reps[0], 1


def _type_a_reuse_tree(n):
    gates = []
    level = [1] * n
    reps = list(range(n))
    while len(reps) > 1:
        nxt = []
        for i in range(0, len(reps) - 1, 2):
            left, right = reps[i], reps[i + 1]
            lv = level[right]
            gates.append(Controlled(((left, level[left]),), SubspaceFlip(right, lv, lv + 1)))
            level[right] = lv + 1
            nxt.append(right)
        if len(reps) % 2:
            nxt.append(reps[-1])
        reps = nxt
    dims = [max(QUTRIT, lv + 1) for lv in level]
    return gates, dims, reps[0], level[reps[0]]


def _two_control(sites: Sequence[int], gates: list) -> tuple[int, int]:
    if len(sites) == 1:
        return sites[0], 1
    if len(sites) == 2:
        gates.append(Controlled(((sites[0], 1),), SubspaceFlip(sites[1], 1, 2)))
        return sites[1], 2
    # left branch: the largest complete tree that still leaves a right branch at least as big
    a = 1
    while 2 * (2 * a + 1) + 1 <= len(sites):
        a = 2 * a + 1
    left, mid, right = sites[:a], sites[a], sites[a + 1:]
    lrep, llv = _two_control(left, gates)
    rrep, rlv = _two_control(right, gates)
    gates.append(Controlled(((lrep, llv), (rrep, rlv)), SubspaceFlip(mid, 1, 2)))
    return mid, 2


def _type_a_two_control_tree(n):
    gates: list = []
    root, lv = _two_control(list(range(n)), gates)
    return gates, [QUTRIT] * n, root, lv


def _star(n, shift):
    hub = n - 1
    if shift:
        gates = [Controlled(((i, 1),), CyclicShift(hub, 1)) for i in range(n - 1)]
    else:
        gates = [Controlled(((i - 1, 1),), SubspaceFlip(hub, i, i + 1)) for i in range(1, n)]
    dims = [QUTRIT] * n
    dims[hub] = max(QUTRIT, n + 1)
    return gates, dims, hub, n


_BUILDERS = {
    Topology.TYPE_A_LINEAR: _type_a_linear,
    Topology.TYPE_B_LINEAR: _type_b_linear,
    Topology.TYPE_B_TREE: _type_b_tree,
    Topology.TYPE_A_REUSE_TREE: _type_a_reuse_tree,
    Topology.TYPE_A_TWO_CONTROL_TREE: _type_a_two_control_tree,
    Topology.STAR_FLIP: lambda n: _star(n, shift=False),
    Topology.STAR_SHIFT: lambda n: _star(n, shift=True),
}


def circuit_depth(circuit: Circuit) -> int:
    """ASAP layer count: gates on disjoint sites share a layer."""
    busy = [0] * circuit.n_sites
    depth = 0
    for g in circuit.gates:
        layer = 1 + max(busy[s] for s in g.sites)
        for s in g.sites:
            busy[s] = layer
        depth = max(depth, layer)
    return depth


def reachable_levels(circuit: Circuit, start: Sequence[int] = (0, 1)) -> list[set[int]]:
    """Per-site over-approximation of levels reachable from qubit-subspace inputs."""
    levels = [set(x for x in start if x < d) for d in circuit.dims]
    for g in circuit.gates:
        inner = g
        if isinstance(g, Controlled):
            if not all(lv in levels[s] for s, lv in g.controls):
                continue
            inner = g.inner
        if isinstance(inner, (SubspaceFlip, SubspaceHadamard)):
            cur = levels[inner.site]
            if inner.a in cur or inner.b in cur:
                cur |= {inner.a, inner.b} if isinstance(inner, SubspaceHadamard) else (
                    ({inner.b} if inner.a in cur else set()) | ({inner.a} if inner.b in cur else set()))
        elif isinstance(inner, CyclicShift):
            d = circuit.dims[inner.site]
            levels[inner.site] |= {(x + inner.direction) % d for x in levels[inner.site]}
        elif isinstance(inner, SubspaceSwap):
            l1, l2 = levels[inner.site1], levels[inner.site2]
            if inner.a in l1 and inner.d in l2:
                l1.add(inner.b)
                l2.add(inner.c)
            if inner.b in l1 and inner.c in l2:
                l1.add(inner.a)
                l2.add(inner.d)
    return levels


def _report(gates, dims, root, act, meta) -> BuildReport:
    circuit = Circuit(tuple(dims), tuple(gates), meta)
    levels = reachable_levels(circuit)
    return BuildReport(
        circuit=circuit,
        depth=circuit_depth(circuit),
        gate_count=len(circuit.gates),
        max_level_used=tuple(max(lv) for lv in levels),
        root=root,
        activation_level=act,
    )


def build_encoder(topology: "Topology | str", n: int, ragged: bool = False) -> BuildReport:
    """First-half circuit computing the n-way AND into the root site.

    The root reaches ``activation_level`` exactly when every control input
    is 1.
    """
    topology = Topology.parse(topology)
    check_shape(topology, n, ragged)
    gates, dims, root, act = _BUILDERS[topology](n)
    meta = {"topology": topology.value, "part": "encoder", "n": n, "root": root,
            "activation_level": act, "ragged": bool(ragged)}
    return _report(gates, dims, root, act, meta)


def _retarget(gate: Gate, site: int) -> Gate:
    if isinstance(gate, Controlled):
        raise ValidationError("target_op must be a single-site gate")
    if isinstance(gate, SubspaceSwap):
        raise ValidationError("target_op must be a single-site gate")
    return dataclasses.replace(gate, site=site)


def build_full_mct(topology: "Topology | str", n: int, target_op: Gate | None = None,
                   target_dim: int = QUTRIT, ragged: bool = False) -> BuildReport:
    """Encoder, root-controlled ``target_op`` on site ``n``, then the exact mirror.

    ``target_op`` is any single-site gate; its site index is replaced by the
    dedicated target site ``n``. Defaults to X^(01).
    """
    enc = build_encoder(topology, n, ragged=ragged)
    target_op = SubspaceFlip(n, 0, 1) if target_op is None else _retarget(target_op, n)
    dims = enc.circuit.dims + (target_dim,)
    central = Controlled(((enc.root, enc.activation_level),), target_op)
    mirror = [inverse_gate(g) for g in reversed(enc.circuit.gates)]
    gates = list(enc.circuit.gates) + [central] + mirror
    meta = dict(enc.circuit.meta, part="full", target=n, encoder_length=len(enc.circuit.gates))
    return _report(gates, dims, enc.root, enc.activation_level, meta)


def reference_mct(n: int, target_op: Gate | None = None, target_dim: int = QUTRIT,
                  control_dims: Sequence[int] | None = None) -> Circuit:
    """Directly constructed n-controlled ``target_op`` on site ``n``."""
    target_op = SubspaceFlip(n, 0, 1) if target_op is None else _retarget(target_op, n)
    dims = tuple(control_dims or [QUTRIT] * n) + (target_dim,)
    return Circuit(dims, (Controlled(tuple((i, 1) for i in range(n)), target_op),))


def interaction_graph(circuit: Circuit) -> dict[int, tuple[int, ...]]:
    """Adjacency of sites that share at least one gate, with sorted neighbours."""
    adj: dict[int, set[int]] = {s: set() for s in range(circuit.n_sites)}
    for g in circuit.gates:
        sites = g.sites
        for i, a in enumerate(sites):
            for b in sites[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
    return {s: tuple(sorted(nb)) for s, nb in adj.items()}


def graph_edges(adjacency: dict[int, Sequence[int]]) -> list[tuple[int, int]]:
    return sorted({(min(a, b), max(a, b)) for a, nbs in adjacency.items() for b in nbs})


def is_connected(adjacency: dict[int, Sequence[int]]) -> bool:
    if not adjacency:
        return True
    start = next(iter(adjacency))
    seen, stack = {start}, [start]
    while stack:
        for nb in adjacency[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(adjacency)


__all__ = [
    "Topology", "BuildReport", "ShapeError", "TREES", "build_encoder", "build_full_mct",
    "reference_mct", "interaction_graph", "graph_edges", "is_connected", "circuit_depth",
    "reachable_levels", "check_shape",
]
