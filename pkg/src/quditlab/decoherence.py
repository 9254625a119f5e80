"""Fidelity decay under independent per-site relaxation and dephasing.

Every site carries the same Lindblad channels:

* lowering ``sqrt(kappa_l) |l-1><l|`` for each level ``l`` with a relaxation rate;
* dephasing ``2 sqrt(gamma_ab) |b><b|`` for each adjacent transition ``(a, b)``.

On a qubit the dephasing operator has the same dissipator as
``sqrt(gamma) (|a><a| - |b><b|)``, so ``gamma`` is the rate in the usual
Pauli-Z convention. ``derive_rates`` offers two readings of the coherence
times: ``"total"`` uses ``1/T2`` directly and ``"pure"`` removes the
relaxation contribution ``1/(2 T1)`` of the upper level first.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .core import BasisString, CapacityError, StateVector, ValidationError, max_dim

EVOLVE_CAP = 3**6
DEPHASING_MODES = ("total", "pure")


@dataclass(frozen=True)
class NoiseParams:
    """Relaxation rates in 1/us and coherence times in us."""

    kappa01: float
    kappa12: float
    T2_01: float
    T2star_12: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValidationError(f"{name} must be strictly positive, got {value}")

    @classmethod
    def from_json(cls, text: str) -> "NoiseParams":
        obj = json.loads(text)
        try:
            return cls(float(obj["kappa01"]), float(obj["kappa12"]), float(obj["T2_01"]), float(obj["T2star_12"]))
        except KeyError as exc:
            raise ValidationError(f"noise parameters missing {exc.args[0]!r}") from exc

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


# transmon qutrit: T1(0,1) = 10 us, T1(1,2) = 3.7 us, T2(0,1) = 3.7 us, T2*(1,2) = 1.2 us
TRANSMON = NoiseParams(kappa01=0.1, kappa12=1 / 3.7, T2_01=3.7, T2star_12=1.2)


@dataclass(frozen=True)
class RateSet:
    relax: Mapping[int, float]
    dephase: Mapping[tuple[int, int], float]
    mode: str = "total"
    derived: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.relax.get(0, 0.0) != 0.0:
            raise ValidationError("the ground level cannot relax")
        if any(r < 0 for r in self.relax.values()) or any(g < 0 for g in self.dephase.values()):
            raise ValidationError("rates must be non-negative")


def derive_rates(params: NoiseParams, mode: str = "total") -> RateSet:
    """Per-level relaxation and per-transition dephasing rates.

    In ``"pure"`` mode ``gamma_ab = 1/T2 - kappa_b / 2``; a negative result
    means the coherence time exceeds twice the relaxation time.
    """
    if mode not in DEPHASING_MODES:
        raise ValidationError(f"dephasing mode must be one of {DEPHASING_MODES}, got {mode!r}")
    relax = {1: params.kappa01, 2: params.kappa12}
    total = {(0, 1): 1 / params.T2_01, (1, 2): 1 / params.T2star_12}
    if mode == "total":
        dephase = total
    else:
        dephase = {}
        for (a, b), g in total.items():
            pure = g - relax[b] / 2
            if pure < -1e-15:
                raise ValidationError(
                    f"coherence time of ({a},{b}) exceeds 2*T1: pure dephasing rate {pure:.6g} < 0")
            dephase[(a, b)] = max(pure, 0.0)
    derived = {f"T_phi_{a}{b}": (1 / g if g > 0 else math.inf) for (a, b), g in dephase.items()}
    derived.update({f"gamma_{a}{b}": g for (a, b), g in dephase.items()})
    return RateSet(relax, dephase, mode, derived)


def local_operators(dim: int, rates: RateSet) -> list[np.ndarray]:
    """Single-site jump operators (rates folded in) for a site of dimension ``dim``."""
    ops = []
    for level, k in sorted(rates.relax.items()):
        if 0 < level < dim and k > 0:
            op = np.zeros((dim, dim))
            op[level - 1, level] = math.sqrt(k)
            ops.append(op)
    for (a, b), g in sorted(rates.dephase.items()):
        if b < dim and g > 0:
            op = np.zeros((dim, dim))
            op[b, b] = 2 * math.sqrt(g)
            ops.append(op)
    return ops


def _apply_local(amps: Mapping[BasisString, complex], site: int, op: np.ndarray) -> dict[BasisString, complex]:
    out: dict[BasisString, complex] = {}
    cols = [np.flatnonzero(op[:, j]) for j in range(op.shape[1])]
    for key, amp in amps.items():
        x = key[site]
        for row in cols[x]:
            img = key[:site] + (int(row),) + key[site + 1:]
            out[img] = out.get(img, 0.0) + op[row, x] * amp
    return out


def fidelity_slope(state: StateVector, rates: RateSet) -> float:
    """Initial fidelity loss rate -dF/dt at t = 0, in 1/us.

    Each jump operator L contributes <L^dag L> - |<L>|^2.
    """
    if abs(state.norm() - 1) > 1e-10:
        raise ValidationError("state must be normalized")
    total = 0.0
    for site, dim in enumerate(state.dims):
        for op in local_operators(dim, rates):
            image = _apply_local(state.amplitudes, site, op)
            expect = sum(state.amplitudes.get(k, 0).conjugate() * v for k, v in image.items())
            total += sum(abs(v) ** 2 for v in image.values()) - abs(expect) ** 2
    return float(total)


def _embed(op: np.ndarray, site: int, dims: Sequence[int]) -> sparse.csr_matrix:
    left = math.prod(dims[:site])
    right = math.prod(dims[site + 1:])
    return sparse.kron(sparse.kron(sparse.identity(left), sparse.csr_matrix(op)), sparse.identity(right), format="csr")


class _Lindbladian:
    def __init__(self, dims: Sequence[int], rates: RateSet):
        self.jumps = [_embed(op, s, dims) for s, d in enumerate(dims) for op in local_operators(d, rates)]
        total = math.prod(dims)
        self.decay = sparse.csr_matrix((total, total), dtype=complex)
        for j in self.jumps:
            self.decay = self.decay + 0.5 * (j.conj().T @ j)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -(self.decay @ rho) - (self.decay @ rho.conj().T).conj().T
        for j in self.jumps:
            out += j @ (j @ rho.conj().T).conj().T  # L rho L^dag, using rho = rho^dag
        return out

    def rk4(self, rho: np.ndarray, dt: float) -> np.ndarray:
        k1 = self(rho)
        k2 = self(rho + 0.5 * dt * k1)
        k3 = self(rho + 0.5 * dt * k2)
        k4 = self(rho + dt * k3)
        return rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(gen: _Lindbladian, rho: np.ndarray, psi: np.ndarray, times: Sequence[float], step: float):
    fids, traces = [], []
    t_now = 0.0
    for t in times:
        span = t - t_now
        if span < -1e-15:
            raise ValidationError("time grid must be non-decreasing and start at >= 0")
        steps = max(1, math.ceil(span / step - 1e-9)) if span > 0 else 0
        for _ in range(steps):
            rho = gen.rk4(rho, span / steps)
        t_now = t
        fids.append(float(np.real(psi.conj() @ rho @ psi)))
        traces.append(float(np.real(np.trace(rho))))
    return fids, traces


def evolve_fidelity(state: StateVector, rates: RateSet, t_grid: Iterable[float],
                    step: float | None = None, cap: int | None = None) -> list[tuple[float, float]]:
    """Fidelity ``<psi| rho(t) |psi>`` on ``t_grid`` by fixed-step RK4 on the dense density matrix.

    Without an explicit ``step`` the step is halved from 0.05 us until the
    fidelity at the end of the grid moves by less than 0.1% of ``1 - F``.
    """
    times = [float(t) for t in t_grid]
    total = math.prod(state.dims)
    cap = max_dim(EVOLVE_CAP) if cap is None else cap
    if total > cap:
        raise CapacityError(f"dimension {total} exceeds master-equation cap {cap}")
    psi = state.to_dense()
    rho0 = np.outer(psi, psi.conj())
    gen = _Lindbladian(state.dims, rates)
    if step is not None:
        fids, _ = _integrate(gen, rho0, psi, times, step)
        return list(zip(times, fids))
    step = 0.05
    fids, _ = _integrate(gen, rho0, psi, times, step)
    for _ in range(20):
        finer, _ = _integrate(gen, rho0, psi, times, step / 2)
        loss = max(1e-300, 1 - finer[-1]) if finer else 1.0
        settled = not finer or abs(finer[-1] - fids[-1]) <= 1e-3 * loss
        step /= 2
        fids = finer
        if settled:
            break
    return list(zip(times, fids))


def numerical_slope(state: StateVector, rates: RateSet, dt: float = 1e-4) -> float:
    """-dF/dt at t = 0 from a short integration, halving the step until it settles to 0.1%."""
    previous = None
    h = dt
    for _ in range(12):
        (_, f1), = evolve_fidelity(state, rates, [h], step=h)
        (_, f2), = evolve_fidelity(state, rates, [2 * h], step=h)
        slope = (4 * (1 - f1) - (1 - f2)) / (2 * h)  # cancels the quadratic term
        if previous is not None and abs(slope - previous) <= 1e-3 * abs(slope):
            return slope
        previous = slope
        h /= 2
    return previous


def trace_deviation(state: StateVector, rates: RateSet, t_grid: Iterable[float], step: float = 0.01) -> float:
    """Largest |Tr rho(t) - 1| over the grid."""
    psi = state.to_dense()
    gen = _Lindbladian(state.dims, rates)
    _, traces = _integrate(gen, np.outer(psi, psi.conj()), psi, [float(t) for t in t_grid], step)
    return max(abs(t - 1) for t in traces)


def decay_csv(series: Iterable[tuple[float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_us", "fidelity"])
    for t, f in series:
        w.writerow([f"{t:.12g}", f"{f:.12g}"])
    return buf.getvalue()
