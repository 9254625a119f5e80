"""Sparse state evolution, error injection and small dense density matrices."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    CapacityError,
    Circuit,
    Gate,
    StateVector,
    ValidationError,
    apply_gate,
    max_dim,
    validate_gate,
)

DENSITY_CAP = 3**8


def run(state: StateVector, circuit: Circuit) -> StateVector:
    if state.dims != circuit.dims:
        raise ValidationError(f"state dims {state.dims} do not match circuit dims {circuit.dims}")
    for g in circuit.gates:
        state = apply_gate(state, g)
    return state


@dataclass(frozen=True)
class ErrorInjection:
    """Insert ``error`` before gate ``position`` (``len(circuit)`` means after the last gate)."""

    position: int
    error: Gate | None


def run_with_error(state: StateVector, circuit: Circuit, injection: ErrorInjection) -> StateVector:
    if not 0 <= injection.position <= len(circuit):
        raise ValidationError(f"injection position {injection.position} outside 0..{len(circuit)}")
    if state.dims != circuit.dims:
        raise ValidationError(f"state dims {state.dims} do not match circuit dims {circuit.dims}")
    for g in circuit.gates[:injection.position]:
        state = apply_gate(state, g)
    if injection.error is not None:
        validate_gate(injection.error, state.dims)
        state = apply_gate(state, injection.error)
    for g in circuit.gates[injection.position:]:
        state = apply_gate(state, g)
    return state


@dataclass(frozen=True)
class DensityMatrix:
    dims: tuple[int, ...]
    matrix: np.ndarray

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def check(self, atol: float = 1e-10) -> None:
        """Raise if the matrix is not a unit-trace positive Hermitian operator."""
        m = self.matrix
        if abs(self.trace() - 1) > atol:
            raise ValidationError(f"trace {self.trace()} differs from 1")
        if not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValidationError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -atol:
            raise ValidationError("density matrix has a negative eigenvalue")


def _check_cap(dims: Sequence[int], cap: int | None) -> int:
    total = math.prod(dims)
    cap = max_dim(DENSITY_CAP) if cap is None else cap
    if total > cap:
        raise CapacityError(f"total dimension {total} exceeds density-matrix cap {cap}")
    return total


def density_matrix(state: StateVector, cap: int | None = None) -> DensityMatrix:
    _check_cap(state.dims, cap)
    vec = state.to_dense()
    return DensityMatrix(state.dims, np.outer(vec, vec.conj()))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduce ``rho`` to the sites in ``keep`` (returned in ascending site order)."""
    keep = sorted(set(keep))
    n = len(rho.dims)
    if any(not 0 <= s < n for s in keep):
        raise ValidationError(f"keep sites {keep} out of range for {n} sites")
    drop = [s for s in range(n) if s not in keep]
    tensor = rho.matrix.reshape(rho.dims + rho.dims)
    # move kept row indices, then kept column indices, to the front
    order = keep + drop + [n + s for s in keep] + [n + s for s in drop]
    tensor = tensor.transpose(order)
    dk = math.prod(rho.dims[s] for s in keep)
    dd = math.prod(rho.dims[s] for s in drop)
    tensor = tensor.reshape(dk, dd, dk, dd)
    reduced = np.einsum("ajbj->ab", tensor)
    return DensityMatrix(tuple(rho.dims[s] for s in keep), reduced)


def reduced_density_matrix(state: StateVector, keep: Iterable[int]) -> DensityMatrix:
    """Partial trace of a pure state without forming the full density matrix."""
    keep = sorted(set(keep))
    n = len(state.dims)
    drop = [s for s in range(n) if s not in keep]
    kdims = tuple(state.dims[s] for s in keep)
    dk = math.prod(kdims)
    if dk > max_dim(DENSITY_CAP):
        raise CapacityError(f"reduced dimension {dk} exceeds density-matrix cap")
    groups: dict[tuple, dict[int, complex]] = {}
    for key, amp in state.amplitudes.items():
        rest = tuple(key[s] for s in drop)
        idx = 0
        for s in keep:
            idx = idx * state.dims[s] + key[s]
        groups.setdefault(rest, {})[idx] = amp
    out = np.zeros((dk, dk), dtype=complex)
    for column in groups.values():
        idx = np.fromiter(column.keys(), dtype=int)
        vals = np.fromiter(column.values(), dtype=complex)
        out[np.ix_(idx, idx)] += np.outer(vals, vals.conj())
    return DensityMatrix(kdims, out)


def purity(rho: DensityMatrix) -> float:
    m = rho.matrix
    return float(np.real(np.vdot(m.conj().T, m)))


def state_overlap(psi: Sequence[complex] | np.ndarray, rho: DensityMatrix) -> float:
    """<psi| rho |psi> for a single-site state vector ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (rho.matrix.shape[0],):
        raise ValidationError(f"state of length {psi.size} does not match dimension {rho.matrix.shape[0]}")
    return float(np.real(psi.conj() @ rho.matrix @ psi))


def state_to_json(state: StateVector) -> str:
    return json.dumps({"dims": list(state.dims), "amplitudes": state.to_records()}, sort_keys=True)


def state_from_json(text: str) -> StateVector:
    obj = json.loads(text)
    return StateVector.from_records(obj["dims"], obj["amplitudes"])
