"""Entanglement, error dispersion and error propagation for the Type-A linear chain.

Inputs are product states with site ``j`` in ``alpha_j |0> + beta_j |1>``.
The Type-A linear encoder raises site ``j >= 1`` to level 2 exactly when
sites ``0..j`` all hold 1, so its output is known in closed form and so are
the single-site purities. ``propagate_error`` rewrites an error that strikes
the encoded state as an equivalent operator acting before the encoder.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    Circuit,
    Controlled,
    CyclicShift,
    Gate,
    StateVector,
    SubspaceFlip,
    SubspacePhase,
    ValidationError,
    circuit_unitary,
    gate_unitary,
)
from .decomposer import build_encoder, build_full_mct
from .simulator import ErrorInjection, reduced_density_matrix, run_with_error, state_overlap

ERROR_KINDS = ("Z0", "Z1", "Z2", "X01", "X12", "X02")
PLUS = (1 / math.sqrt(2), 1 / math.sqrt(2))


@dataclass(frozen=True)
class AmplitudeProfile:
    alphas: tuple[complex, ...]
    betas: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(complex(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(complex(b) for b in self.betas))
        if len(self.alphas) != len(self.betas) or not self.alphas:
            raise ValidationError("alphas and betas must be non-empty and of equal length")
        for j, (a, b) in enumerate(zip(self.alphas, self.betas)):
            if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-12:
                raise ValidationError(f"site {j} amplitudes are not normalized")

    @property
    def n(self) -> int:
        return len(self.alphas)

    @classmethod
    def uniform(cls, n: int) -> "AmplitudeProfile":
        return cls((PLUS[0],) * n, (PLUS[1],) * n)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "AmplitudeProfile":
        theta = rng.uniform(0, math.pi / 2, n)
        phases = rng.uniform(0, 2 * math.pi, (2, n))
        alphas = [math.cos(t) * cmath.exp(1j * p) for t, p in zip(theta, phases[0])]
        betas = [math.sin(t) * cmath.exp(1j * p) for t, p in zip(theta, phases[1])]
        return cls(tuple(alphas), tuple(betas))

    @classmethod
    def from_json(cls, text: str) -> "AmplitudeProfile":
        """``{"alphas": [[re, im], ...], "betas": [...]}``; plain reals are accepted too."""
        obj = json.loads(text)

        def num(v):
            return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)

        return cls(tuple(num(a) for a in obj["alphas"]), tuple(num(b) for b in obj["betas"]))

    def site_vector(self, j: int, dim: int = 3) -> np.ndarray:
        vec = np.zeros(dim, dtype=complex)
        vec[0], vec[1] = self.alphas[j], self.betas[j]
        return vec

    def product_state(self, dims: Sequence[int] | None = None,
                      extra: Sequence[Sequence[complex]] = ()) -> StateVector:
        """Product input with any sites beyond the profile taken from ``extra``."""
        local = [[a, b] for a, b in zip(self.alphas, self.betas)] + [list(v) for v in extra]
        dims = tuple(dims) if dims is not None else (3,) * len(local)
        return StateVector.product(dims, local)


def prefix_products(profile: AmplitudeProfile) -> np.ndarray:
    """P[j] = product of |beta_k|^2 over k < j, so P[0] = 1."""
    probs = np.abs(np.asarray(profile.betas)) ** 2
    return np.concatenate([[1.0], np.cumprod(probs)[:-1]])


def closed_final_state(profile: AmplitudeProfile) -> StateVector:
    """Type-A linear encoder output written down directly, without simulation."""
    n = profile.n
    if n < 2:
        raise ValidationError("need at least two sites")
    amps: dict[tuple[int, ...], complex] = {}
    for idx in range(1 << n):
        bits = [(idx >> (n - 1 - j)) & 1 for j in range(n)]
        amp = 1.0 + 0j
        for j, x in enumerate(bits):
            amp *= profile.betas[j] if x else profile.alphas[j]
        if amp == 0:
            continue
        out, prefix = [], True
        for j, x in enumerate(bits):
            prefix = prefix and x == 1
            out.append(2 if j >= 1 and prefix else x)
        amps[tuple(out)] = amp
    return StateVector((3,) * n, amps)


def purity_prediction(j: int, profile: AmplitudeProfile) -> float:
    """Closed-form purity of site ``j`` in the encoder output.

    The successor amplitude for the last site is taken as 1.
    """
    if not 0 <= j < profile.n:
        raise ValidationError(f"site {j} out of range")
    p = prefix_products(profile)[j]
    a2, b2 = abs(profile.alphas[j]) ** 2, abs(profile.betas[j]) ** 2
    nxt = abs(profile.alphas[j + 1]) ** 2 if j + 1 < profile.n else 1.0
    return float(a2**2 + b2**2 * (p**2 + (1 - p) ** 2) + 2 * a2 * b2 * (nxt**2 * p**2 + (1 - p) ** 2))


def purity_numerical(j: int, profile: AmplitudeProfile) -> float:
    from .simulator import purity

    return purity(reduced_density_matrix(closed_final_state(profile), [j]))


# ---------------------------------------------------------------------------
# error propagation


def error_gate(kind: str, k: int) -> Gate:
    table = {
        "Z0": SubspacePhase(k, 0), "Z1": SubspacePhase(k, 1), "Z2": SubspacePhase(k, 2),
        "X01": SubspaceFlip(k, 0, 1), "X12": SubspaceFlip(k, 1, 2), "X02": SubspaceFlip(k, 0, 2),
    }
    if kind not in table:
        raise ValidationError(f"unknown error kind {kind!r}; choose from {ERROR_KINDS}")
    return table[kind]


@dataclass(frozen=True)
class PropagatedError:
    """Input-side equivalent of an error striking the encoded state.

    ``gates`` act in order on the encoder input and ``sign`` is a global
    phase. The equivalence holds on inputs in the qubit subspace.
    """

    kind: str
    k: int
    n: int
    gates: tuple[Gate, ...]
    sign: int
    description: str

    def circuit(self, dims: Sequence[int] | None = None) -> Circuit:
        return Circuit(tuple(dims) if dims else (3,) * self.n, self.gates)

    def matrix(self, dims: Sequence[int] | None = None) -> np.ndarray:
        return self.sign * circuit_unitary(self.circuit(dims))


def _all_ones(sites: Iterable[int]) -> tuple[tuple[int, int], ...]:
    return tuple((j, 1) for j in sites)


def _z2_gates(k: int) -> list[Gate]:
    if k == 0:
        return []
    return [Controlled(_all_ones(range(k)), SubspacePhase(k, 1))]


def propagate_error(kind: str, k: int, n: int) -> PropagatedError:
    """Rewrite ``kind`` at site ``k`` after the Type-A linear encoder as gates before it."""
    if not 0 <= k < n:
        raise ValidationError(f"site {k} out of range for n={n}")
    error_gate(kind, k)
    sign = 1
    nxt = k + 1 < n
    if kind == "Z0":
        gates: list[Gate] = [SubspacePhase(k, 0)]
        text = f"Z(0) on site {k}, local"
    elif kind == "Z2":
        gates = _z2_gates(k)
        text = f"-1 phase when sites 0..{k} are all 1" if k else "identity on the qubit subspace"
    elif kind == "Z1":
        sign = -1
        gates = [SubspacePhase(k, 0)] + _z2_gates(k)
        text = f"-Z(0) on site {k} times the Z2 form"
    elif kind == "X12":
        gates = ([Controlled(((k, 1),), SubspaceFlip(k + 1, 1, 2))] if nxt else []) + [SubspaceFlip(k, 1, 2)]
        text = f"X(12) on site {k}" + (f" with a controlled X(12) on site {k + 1}" if nxt else "")
    elif kind == "X01":
        if k == 0:
            gates = [SubspaceFlip(0, 0, 1), SubspaceFlip(1, 1, 2)] if n > 1 else [SubspaceFlip(0, 0, 1)]
            text = "X(01) on site 0 with X(12) on site 1"
        else:
            gates = [SubspaceFlip(k, 0, 1), Controlled(_all_ones(range(k)), CyclicShift(k, 1))]
            text = f"X(01) on site {k} then X(+) on site {k} when sites 0..{k - 1} are all 1"
    elif kind == "X02":
        if k == 0:
            gates = [SubspaceFlip(0, 0, 2)]
            text = "X(02) on site 0, local"
        else:
            gates = []
            if nxt:
                gates += [Controlled(((k, 0),), SubspaceFlip(k + 1, 1, 2)),
                          Controlled(_all_ones(range(k + 1)), SubspaceFlip(k + 1, 1, 2))]
            gates += [SubspaceFlip(k, 0, 2), Controlled(_all_ones(range(k)), CyclicShift(k, -1))]
            text = f"X(02) on site {k} with conditional X(-) on site {k} and X(12) on site {k + 1}"
    else:
        raise ValidationError(f"unknown error kind {kind!r}")
    return PropagatedError(kind, k, n, tuple(gates), sign, text)


def conjugated_error(kind: str, k: int, n: int) -> np.ndarray:
    """U_enc^dag E U_enc for the Type-A linear encoder, computed densely."""
    enc = build_encoder("type-a-linear", n).circuit
    u = circuit_unitary(enc)
    e = gate_unitary(error_gate(kind, k), enc.dims)
    return u.conj().T @ e @ u


def qubit_subspace_columns(n: int, dims: Sequence[int] | None = None) -> np.ndarray:
    dims = tuple(dims) if dims else (3,) * n
    cols = []
    for idx in range(1 << n):
        c = 0
        for j in range(n):
            c = c * dims[j] + ((idx >> (n - 1 - j)) & 1)
        cols.append(c)
    return np.array(cols)


# ---------------------------------------------------------------------------
# dispersion


def dispersion(circuit: Circuit, injection: ErrorInjection, i: int, profile: AmplitudeProfile,
               target_state: Sequence[complex] = PLUS) -> float:
    """Overlap of site ``i`` of the output with its own input state.

    Sites beyond the profile (the MCT target) start in ``target_state``;
    the default |+> is left unchanged by an X(01) target operation.
    """
    extra = [target_state] * (circuit.n_sites - profile.n)
    psi = profile.product_state(circuit.dims, extra)
    out = run_with_error(psi, circuit, injection)
    rho = reduced_density_matrix(out, [i])
    if i < profile.n:
        ref = profile.site_vector(i, circuit.dims[i])
    else:
        ref = np.zeros(circuit.dims[i], dtype=complex)
        ref[: len(target_state)] = target_state
    return min(1.0, max(0.0, state_overlap(ref, rho)))


def center_injection(n: int, kind: str, k: int) -> tuple[Circuit, ErrorInjection]:
    """Full Type-A linear MCT with ``kind`` at site ``k`` struck right after the encoder."""
    report = build_full_mct("type-a-linear", n)
    pos = report.circuit.meta["encoder_length"]
    return report.circuit, ErrorInjection(pos, error_gate(kind, k))


def dispersion_prediction(kind: str, i: int, profile: AmplitudeProfile) -> float:
    p = prefix_products(profile)[i]
    a2, b2 = abs(profile.alphas[i]) ** 2, abs(profile.betas[i]) ** 2
    if kind == "Z2":
        return float(1 - 4 * p * a2 * b2)
    if kind == "X01":
        return float(1 - p * (1 - a2 * b2))
    raise ValidationError(f"no closed-form dispersion for {kind!r}; use Z2 or X01")


def dispersion_at_error_site(kind: str, k: int, profile: AmplitudeProfile) -> float:
    """Exact dispersion at the struck site ``k`` for errors hitting the encoded state.

    Unlike :func:`dispersion_prediction` this holds for arbitrary complex
    amplitudes, and also for ``k = 0``.
    """
    p = prefix_products(profile)[k]
    alpha, beta = profile.alphas[k], profile.betas[k]
    a2, b2 = abs(alpha) ** 2, abs(beta) ** 2
    cross = 4 * (alpha.conjugate() * beta).real ** 2
    if kind == "Z2":
        return 1.0 if k == 0 else float(1 - 4 * p * a2 * b2)
    if kind == "X01":
        return float(cross) if k == 0 else float(p * b2**2 + (1 - p) * cross)
    if kind == "Z0":
        return float((a2 - b2) ** 2)
    raise ValidationError(f"no exact single-site dispersion for {kind!r}")


# ---------------------------------------------------------------------------
# reports


def purity_table(profile: AmplitudeProfile) -> list[tuple[int, float, float, float]]:
    from .simulator import purity

    state = closed_final_state(profile)
    rows = []
    for j in range(profile.n):
        pred = purity_prediction(j, profile)
        num = purity(reduced_density_matrix(state, [j]))
        rows.append((j, pred, num, abs(pred - num)))
    return rows


def dispersion_table(profile: AmplitudeProfile, kinds: Sequence[str] = ("Z2", "X01"),
                     sites: Sequence[int] | None = None) -> list[tuple[str, int, int, float, float]]:
    n = profile.n
    rows = []
    for kind in kinds:
        for k in (range(n) if sites is None else sites):
            circuit, inj = center_injection(n, kind, k)
            for i in range(n):
                pred = dispersion_prediction(kind, i, profile) if kind in ("Z2", "X01") else float("nan")
                rows.append((kind, k, i, dispersion(circuit, inj, i, profile), pred))
    return rows


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def purity_csv(rows) -> str:
    return _csv(["site", "purity_pred", "purity_num", "abs_err"], rows)


def dispersion_csv(rows) -> str:
    return _csv(["kind", "k", "i", "D_num", "D_pred"], rows)
