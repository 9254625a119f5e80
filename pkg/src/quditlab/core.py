"""Computational-basis data model and elementary qudit gate semantics.

Basis strings are tuples of level indices with site 0 as the leftmost
(most significant) digit. Every gate is a frozen dataclass; its action on a
single basis string is given by :func:`gate_action`, from which both the
sparse state update and the dense unitary are derived.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy import sparse

DEFAULT_PRUNE = 1e-15
DEFAULT_UNITARY_CAP = 3**10

BasisString = tuple[int, ...]


class ValidationError(ValueError):
    """Raised when a gate, state or circuit is inconsistent with its dims."""


class CapacityError(RuntimeError):
    """Raised when a dense object would exceed the configured size cap."""


def max_dim(default: int) -> int:
    """Capacity cap, overridable through ``QUDITLAB_MAX_DIM``."""
    env = os.environ.get("QUDITLAB_MAX_DIM")
    if env:
        return int(env)
    return default


def check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) < 1:
        raise ValidationError("dims must contain at least one site")
    if any(d < 2 for d in dims):
        raise ValidationError(f"every site dimension must be >= 2, got {dims}")
    return dims


def check_basis(digits: Sequence[int], dims: Sequence[int]) -> BasisString:
    digits = tuple(int(x) for x in digits)
    if len(digits) != len(dims):
        raise ValidationError(f"basis string {digits} does not match {len(dims)} sites")
    for i, (x, d) in enumerate(zip(digits, dims)):
        if not 0 <= x < d:
            raise ValidationError(f"level {x} out of range at site {i} (dim {d})")
    return digits


def format_basis(digits: Sequence[int]) -> str:
    if all(x < 10 for x in digits):
        return "".join(str(x) for x in digits)
    return ",".join(str(x) for x in digits)


def parse_basis(text: str) -> BasisString:
    text = text.strip()
    if "," in text:
        return tuple(int(t) for t in text.split(","))
    return tuple(int(c) for c in text)


def basis_index(digits: Sequence[int], dims: Sequence[int]) -> int:
    idx = 0
    for x, d in zip(digits, dims):
        idx = idx * d + x
    return idx


def index_basis(idx: int, dims: Sequence[int]) -> BasisString:
    out = []
    for d in reversed(dims):
        idx, r = divmod(idx, d)
        out.append(r)
    return tuple(reversed(out))


# ---------------------------------------------------------------------------
# Gates


@dataclass(frozen=True)
class SubspaceFlip:
    """Exchange levels ``a`` and ``b`` on one site (X^(ab))."""

    site: int
    a: int
    b: int

    @property
    def sites(self) -> tuple[int, ...]:
        return (self.site,)


@dataclass(frozen=True)
class SubspacePhase:
    """Multiply level ``a`` of one site by -1 (Z^(a))."""

    site: int
    a: int

    @property
    def sites(self) -> tuple[int, ...]:
        return (self.site,)


@dataclass(frozen=True)
class CyclicShift:
    """|j> -> |j + direction mod d> on one site (X^(+) or X^(-))."""

    site: int
    direction: int = 1

    @property
    def sites(self) -> tuple[int, ...]:
        return (self.site,)


@dataclass(frozen=True)
class SubspaceHadamard:
    """Hadamard on the {a, b} subspace of one site, identity elsewhere."""

    site: int
    a: int = 0
    b: int = 1

    @property
    def sites(self) -> tuple[int, ...]:
        return (self.site,)


@dataclass(frozen=True)
class SubspaceSwap:
    """Qubit-subspace SWAP between ``(a, b)`` on site1 and ``(c, d)`` on site2.

    Exchanges |a>|d> with |b>|c>; |a>|c>, |b>|d> and everything outside both
    subspaces are fixed. With (0,2) and (0,1) this is the charge-absorption
    gate |0>|1> <-> |2>|0>.
    """

    site1: int
    a: int
    b: int
    site2: int
    c: int
    d: int

    @property
    def sites(self) -> tuple[int, ...]:
        return (self.site1, self.site2)


@dataclass(frozen=True)
class Controlled:
    """Apply ``inner`` iff every ``(site, level)`` control is satisfied."""

    controls: tuple[tuple[int, int], ...]
    inner: "Gate"

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple((int(s), int(l)) for s, l in self.controls))

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.controls) + self.inner.sites


Gate = Union[SubspaceFlip, SubspacePhase, CyclicShift, SubspaceHadamard, SubspaceSwap, Controlled]

_SQRT_HALF = 1.0 / math.sqrt(2.0)


def validate_gate(gate: Gate, dims: Sequence[int]) -> None:
    """Raise :class:`ValidationError` if ``gate`` does not fit ``dims``."""
    n = len(dims)
    for s in gate.sites:
        if not 0 <= s < n:
            raise ValidationError(f"site {s} out of range for {n} sites")
    if len(set(gate.sites)) != len(gate.sites):
        raise ValidationError(f"gate {gate} acts twice on the same site")

    def level_ok(site, *levels):
        for lv in levels:
            if not 0 <= lv < dims[site]:
                raise ValidationError(f"level {lv} invalid on site {site} (dim {dims[site]})")

    if isinstance(gate, (SubspaceFlip, SubspaceHadamard)):
        level_ok(gate.site, gate.a, gate.b)
        if gate.a == gate.b:
            raise ValidationError("subspace levels must differ")
    elif isinstance(gate, SubspacePhase):
        level_ok(gate.site, gate.a)
    elif isinstance(gate, CyclicShift):
        if gate.direction not in (1, -1):
            raise ValidationError("shift direction must be +1 or -1")
    elif isinstance(gate, SubspaceSwap):
        level_ok(gate.site1, gate.a, gate.b)
        level_ok(gate.site2, gate.c, gate.d)
        if gate.a == gate.b or gate.c == gate.d:
            raise ValidationError("subspace levels must differ")
    elif isinstance(gate, Controlled):
        if not gate.controls:
            raise ValidationError("controlled gate needs at least one control")
        for s, lv in gate.controls:
            level_ok(s, lv)
        validate_gate(gate.inner, dims)
    else:
        raise ValidationError(f"unknown gate type {type(gate).__name__}")


def gate_action(gate: Gate, digits: BasisString, dims: Sequence[int]) -> list[tuple[BasisString, complex]]:
    """Image of one basis string as a list of ``(basis, coefficient)``."""
    if isinstance(gate, Controlled):
        if all(digits[s] == lv for s, lv in gate.controls):
            return gate_action(gate.inner, digits, dims)
        return [(digits, 1.0)]
    if isinstance(gate, SubspaceFlip):
        x = digits[gate.site]
        if x == gate.a:
            return [(_set(digits, gate.site, gate.b), 1.0)]
        if x == gate.b:
            return [(_set(digits, gate.site, gate.a), 1.0)]
        return [(digits, 1.0)]
    if isinstance(gate, SubspacePhase):
        return [(digits, -1.0 if digits[gate.site] == gate.a else 1.0)]
    if isinstance(gate, CyclicShift):
        d = dims[gate.site]
        return [(_set(digits, gate.site, (digits[gate.site] + gate.direction) % d), 1.0)]
    if isinstance(gate, SubspaceHadamard):
        x = digits[gate.site]
        if x == gate.a:
            return [(_set(digits, gate.site, gate.a), _SQRT_HALF), (_set(digits, gate.site, gate.b), _SQRT_HALF)]
        if x == gate.b:
            return [(_set(digits, gate.site, gate.a), _SQRT_HALF), (_set(digits, gate.site, gate.b), -_SQRT_HALF)]
        return [(digits, 1.0)]
    if isinstance(gate, SubspaceSwap):
        x, y = digits[gate.site1], digits[gate.site2]
        if (x, y) == (gate.a, gate.d):
            out = _set(_set(digits, gate.site1, gate.b), gate.site2, gate.c)
            return [(out, 1.0)]
        if (x, y) == (gate.b, gate.c):
            out = _set(_set(digits, gate.site1, gate.a), gate.site2, gate.d)
            return [(out, 1.0)]
        return [(digits, 1.0)]
    raise ValidationError(f"unknown gate type {type(gate).__name__}")


def _set(digits: BasisString, site: int, value: int) -> BasisString:
    return digits[:site] + (value,) + digits[site + 1:]


def inverse_gate(gate: Gate) -> Gate:
    if isinstance(gate, CyclicShift):
        return CyclicShift(gate.site, -gate.direction)
    if isinstance(gate, Controlled):
        return Controlled(gate.controls, inverse_gate(gate.inner))
    # flips, phases, real subspace Hadamards and swaps are involutions
    return gate


def _classical_step(gate: Gate, digits: BasisString, dims: Sequence[int]) -> tuple[BasisString, float]:
    ((out, coeff),) = gate_action(gate, digits, dims)
    return out, coeff


# ---------------------------------------------------------------------------
# Circuit


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over fixed site dimensions."""

    dims: tuple[int, ...]
    gates: tuple[Gate, ...] = ()
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "dims", check_dims(self.dims))
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            validate_gate(g, self.dims)

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    def __len__(self) -> int:
        return len(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.dims, tuple(inverse_gate(g) for g in reversed(self.gates)), dict(self.meta))

    def then(self, other: "Circuit | Iterable[Gate]") -> "Circuit":
        gates = other.gates if isinstance(other, Circuit) else tuple(other)
        return Circuit(self.dims, self.gates + tuple(gates), dict(self.meta))


# ---------------------------------------------------------------------------
# State vectors


class StateVector:
    """Sparse pure state: a map from basis strings to complex amplitudes."""

    def __init__(self, dims: Sequence[int], amplitudes: Mapping[Sequence[int], complex],
                 prune: float = DEFAULT_PRUNE, normalize: bool = False):
        self.dims = check_dims(dims)
        self.prune = prune
        amps: dict[BasisString, complex] = {}
        for key, val in amplitudes.items():
            key = check_basis(key, self.dims)
            amps[key] = amps.get(key, 0.0) + complex(val)
        if normalize:
            nrm = math.sqrt(sum(abs(v) ** 2 for v in amps.values()))
            if nrm == 0:
                raise ValidationError("cannot normalize the zero vector")
            amps = {k: v / nrm for k, v in amps.items()}
        self.amplitudes = {k: v for k, v in amps.items() if abs(v) > prune}

    @classmethod
    def basis(cls, dims: Sequence[int], digits: Sequence[int]) -> "StateVector":
        return cls(dims, {tuple(digits): 1.0})

    @classmethod
    def product(cls, dims: Sequence[int], local: Sequence[Sequence[complex]], prune: float = DEFAULT_PRUNE) -> "StateVector":
        """Tensor product of single-site amplitude vectors."""
        dims = check_dims(dims)
        amps: dict[BasisString, complex] = {(): 1.0}
        for d, vec in zip(dims, local):
            vec = list(vec) + [0.0] * (d - len(vec))
            nxt = {}
            for key, a in amps.items():
                for lv, c in enumerate(vec):
                    if abs(c) > 0:
                        nxt[key + (lv,)] = a * c
            amps = nxt
        return cls(dims, amps, prune=prune)

    @classmethod
    def uniform_plus(cls, dims: Sequence[int]) -> "StateVector":
        """|+...+> over the {0, 1} subspace of every site."""
        return cls.product(dims, [[_SQRT_HALF, _SQRT_HALF]] * len(dims))

    def norm(self) -> float:
        return math.sqrt(sum(abs(v) ** 2 for v in self.amplitudes.values()))

    def to_dense(self) -> np.ndarray:
        total = math.prod(self.dims)
        vec = np.zeros(total, dtype=complex)
        for key, val in self.amplitudes.items():
            vec[basis_index(key, self.dims)] = val
        return vec

    @classmethod
    def from_dense(cls, dims: Sequence[int], vec: np.ndarray, prune: float = DEFAULT_PRUNE) -> "StateVector":
        dims = check_dims(dims)
        nz = np.flatnonzero(np.abs(vec) > prune)
        return cls(dims, {index_basis(int(i), dims): complex(vec[i]) for i in nz}, prune=prune)

    def support(self) -> set[BasisString]:
        return set(self.amplitudes)

    def inner(self, other: "StateVector") -> complex:
        return sum(v.conjugate() * other.amplitudes.get(k, 0.0) for k, v in self.amplitudes.items())

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.dims == other.dims and self.amplitudes == other.amplitudes

    def allclose(self, other: "StateVector", atol: float = 1e-12) -> bool:
        if self.dims != other.dims:
            return False
        keys = self.support() | other.support()
        return all(abs(self.amplitudes.get(k, 0) - other.amplitudes.get(k, 0)) <= atol for k in keys)

    def __repr__(self):
        terms = sorted(self.amplitudes.items())[:8]
        body = " + ".join(f"({v:.4g})|{format_basis(k)}>" for k, v in terms)
        more = " + ..." if len(self.amplitudes) > 8 else ""
        return f"StateVector({body}{more})"

    def to_records(self) -> list[list]:
        """JSON-ready ``[digit-string, re, im]`` triples in sorted order."""
        return [[format_basis(k), float(v.real), float(v.imag)] for k, v in sorted(self.amplitudes.items())]

    @classmethod
    def from_records(cls, dims: Sequence[int], records: Iterable[Sequence]) -> "StateVector":
        return cls(dims, {parse_basis(s): complex(re, im) for s, re, im in records})


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply one gate sparsely; amplitudes below the prune threshold are dropped."""
    validate_gate(gate, state.dims)
    out: dict[BasisString, complex] = {}
    for key, amp in state.amplitudes.items():
        for img, c in gate_action(gate, key, state.dims):
            out[img] = out.get(img, 0.0) + amp * c
    new = StateVector.__new__(StateVector)
    new.dims = state.dims
    new.prune = state.prune
    new.amplitudes = {k: v for k, v in out.items() if abs(v) > state.prune}
    return new


def gate_unitary(gate: Gate, dims: Sequence[int], cap: int | None = None, as_sparse: bool = False):
    """Matrix of ``gate`` over the full product space (column = input basis index)."""
    dims = check_dims(dims)
    validate_gate(gate, dims)
    total = math.prod(dims)
    cap = max_dim(DEFAULT_UNITARY_CAP) if cap is None else cap
    if total > cap:
        raise CapacityError(f"total dimension {total} exceeds cap {cap}")
    rows, cols, vals = [], [], []
    for col in range(total):
        digits = index_basis(col, dims)
        for img, c in gate_action(gate, digits, dims):
            rows.append(basis_index(img, dims))
            cols.append(col)
            vals.append(c)
    mat = sparse.csr_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(total, total))
    return mat if as_sparse else mat.toarray()


def circuit_unitary(circuit: Circuit, cap: int | None = None, as_sparse: bool = False):
    total = math.prod(circuit.dims)
    u = sparse.identity(total, dtype=complex, format="csr")
    for g in circuit.gates:
        u = gate_unitary(g, circuit.dims, cap=cap, as_sparse=True) @ u
    return u if as_sparse else u.toarray()


def iter_basis(dims: Sequence[int]) -> Iterable[BasisString]:
    for idx in range(math.prod(dims)):
        yield index_basis(idx, dims)


def classical_map(circuit: Circuit, digits: Sequence[int]) -> BasisString:
    """Image of a basis string under a classical circuit (phases discarded)."""
    digits = tuple(digits)
    for g in circuit.gates:
        digits, _ = _classical_step(g, digits, circuit.dims)
    return digits


class BasisPermutation(Mapping):
    """Lazy basis permutation of a classical circuit."""

    def __init__(self, circuit: Circuit):
        self.circuit = circuit

    def __getitem__(self, digits) -> BasisString:
        return classical_map(self.circuit, check_basis(digits, self.circuit.dims))

    def __iter__(self):
        return iter_basis(self.circuit.dims)

    def __len__(self) -> int:
        return math.prod(self.circuit.dims)


def is_sign_free_classical(circuit: Circuit) -> bool:
    for g in circuit.gates:
        inner = g.inner if isinstance(g, Controlled) else g
        if isinstance(inner, (SubspaceHadamard, SubspacePhase)):
            return False
    return True


def classify_classical(circuit: Circuit) -> BasisPermutation | None:
    """Basis permutation of ``circuit``, or ``None`` if it is not sign-free classical.

    A circuit qualifies when every gate sends basis states to basis states
    with coefficient +1; phase gates and subspace Hadamards disqualify it.
    The returned mapping is evaluated lazily, one basis string at a time.
    """
    if not is_sign_free_classical(circuit):
        return None
    return BasisPermutation(circuit)


# ---------------------------------------------------------------------------
# JSON


def gate_to_dict(gate: Gate) -> dict:
    if isinstance(gate, Controlled):
        return {"kind": "controlled", "controls": [list(c) for c in gate.controls], "inner": gate_to_dict(gate.inner)}
    if isinstance(gate, SubspaceFlip):
        return {"kind": "flip", "sites": [gate.site], "levels": [gate.a, gate.b]}
    if isinstance(gate, SubspacePhase):
        return {"kind": "phase", "sites": [gate.site], "levels": [gate.a]}
    if isinstance(gate, CyclicShift):
        return {"kind": "shift", "sites": [gate.site], "levels": [gate.direction]}
    if isinstance(gate, SubspaceHadamard):
        return {"kind": "hadamard", "sites": [gate.site], "levels": [gate.a, gate.b]}
    if isinstance(gate, SubspaceSwap):
        return {"kind": "swap", "sites": [gate.site1, gate.site2], "levels": [gate.a, gate.b, gate.c, gate.d]}
    raise ValidationError(f"unknown gate type {type(gate).__name__}")


def gate_from_dict(obj: Mapping) -> Gate:
    kind = obj["kind"]
    controls = [tuple(c) for c in obj.get("controls", [])]
    if kind == "controlled":
        inner = gate_from_dict(obj["inner"]) if "inner" in obj else gate_from_dict(
            {"kind": obj["inner_kind"], "sites": obj["sites"], "levels": obj["levels"]})
        return Controlled(tuple(controls), inner)
    sites, levels = list(obj.get("sites", [])), list(obj.get("levels", []))
    try:
        if kind == "flip":
            g: Gate = SubspaceFlip(sites[0], levels[0], levels[1])
        elif kind == "phase":
            g = SubspacePhase(sites[0], levels[0])
        elif kind == "shift":
            g = CyclicShift(sites[0], levels[0] if levels else 1)
        elif kind == "hadamard":
            g = SubspaceHadamard(sites[0], *(levels or [0, 1]))
        elif kind == "swap":
            g = SubspaceSwap(sites[0], levels[0], levels[1], sites[1], levels[2], levels[3])
        else:
            raise ValidationError(f"unknown gate kind {kind!r}")
    except IndexError as exc:
        raise ValidationError(f"malformed {kind} gate: {dict(obj)}") from exc
    return Controlled(tuple(controls), g) if controls else g


def circuit_to_dict(circuit: Circuit) -> dict:
    return {"dims": list(circuit.dims), "gates": [gate_to_dict(g) for g in circuit.gates], "meta": dict(circuit.meta)}


def circuit_from_dict(obj: Mapping) -> Circuit:
    return Circuit(tuple(obj["dims"]), tuple(gate_from_dict(g) for g in obj["gates"]), dict(obj.get("meta", {})))
