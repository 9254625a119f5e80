"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import itertools
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from quditlab.clusters import (
    classical_image,
    cluster_histogram,
    empirical_S,
    figure_of_merit,
    figure_of_merit_sum,
    runs_brute,
    tree_recurrence,
)
from quditlab.core import StateVector, circuit_unitary
from quditlab.decoherence import TRANSMON, derive_rates, fidelity_slope, numerical_slope
from quditlab.decomposer import ShapeError, Topology, build_encoder, build_full_mct, reference_mct
from quditlab.entanglement import (
    ERROR_KINDS,
    AmplitudeProfile,
    center_injection,
    closed_final_state,
    conjugated_error,
    dispersion,
    dispersion_prediction,
    propagate_error,
    purity_prediction,
    qubit_subspace_columns,
)
from quditlab.simulator import purity, reduced_density_matrix, run


def verdict(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_state_reproduction():
    excitation = {"0000", "0001", "0010", "0011", "0100", "0101", "0110", "0111",
                  "1000", "1001", "1010", "1011", "1200", "1201", "1220", "1222"}
    absorption = {"0000", "0020", "0200", "0220", "2000", "2020", "2200", "2220",
                  "1000", "1020", "1200", "1220", "1100", "1120", "1110", "1111"}
    start = time.perf_counter()
    ok, worst = True, 0.0
    for topology, terms in (("type-a-linear", excitation), ("type-b-linear", absorption)):
        out = run(StateVector.uniform_plus((3,) * 4), build_encoder(topology, 4).circuit)
        ok &= {"".join(map(str, k)) for k in out.amplitudes} == terms
        worst = max(worst, max(abs(v - 0.25) for v in out.amplitudes.values()))
    elapsed = time.perf_counter() - start
    ok = ok and worst <= 1e-12 and elapsed < 1
    verdict(1, "state reproduction", ok, f"supports exact, max amplitude error {worst:.1e}, {elapsed:.3f}s")


def test_criterion_02_worked_string():
    circuit = build_encoder("type-b-linear", 16).circuit
    digits = tuple(int(c) for c in "1110110100001100")
    start = time.perf_counter()
    image = classical_image(circuit, digits)
    elapsed = time.perf_counter() - start
    got = "".join(map(str, image))
    verdict(2, "worked string", got == "1112202000022000" and elapsed < 1e-3, f"{got} in {elapsed * 1e3:.3f} ms")


def test_criterion_03_mct_oracle():
    start = time.perf_counter()
    worst, checked = 0.0, 0
    for topology in Topology:
        for n in (2, 3, 4):
            try:
                report = build_full_mct(topology, n)
            except ShapeError:
                continue
            dims = report.circuit.dims
            u = circuit_unitary(report.circuit)
            ref = circuit_unitary(reference_mct(n, control_dims=dims[:n]))
            cols = [sum(x * math.prod(dims[j + 1:]) for j, x in enumerate(bits + (t,)))
                    for bits in itertools.product((0, 1), repeat=n) for t in range(dims[n])]
            worst = max(worst, float(np.abs(u[:, cols] - ref[:, cols]).max()))
            checked += 1
    elapsed = time.perf_counter() - start
    verdict(3, "MCT correctness oracle", worst <= 1e-10 and elapsed < 30,
            f"{checked} topology/n pairs, max deviation {worst:.1e}, {elapsed:.2f}s")


def test_criterion_04_run_count():
    start = time.perf_counter()
    bad = [(n, k) for n in range(3, 17) for k in range(1, n - 1)
           if runs_brute(n, k) != (n - k + 3) * 2 ** (n - k - 2)]
    elapsed = time.perf_counter() - start
    verdict(4, "run-count formula", not bad and elapsed < 60, f"mismatches {bad}, {elapsed:.2f}s")


def test_criterion_05_closed_form_S():
    start = time.perf_counter()
    worst = 0.0
    for n in range(1, 31):
        worst = max(worst, abs(figure_of_merit_sum("type-a-linear", n) - (2 - (n + 2) / 2**n)))
        closed_b = (n / 4) * (2 - (n + 2) / 2**n) - 0.25 * (6 - (n * n + 4 * n + 6) / 2**n)
        worst = max(worst, abs(figure_of_merit_sum("type-b-linear", n) - closed_b))
    limit_a = abs(figure_of_merit("type-a-linear", 40) - 2)
    ratio_b = figure_of_merit("type-b-linear", 40) / ((40 - 3) / 2)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and limit_a < 0.02 * 2 and abs(ratio_b - 1) <= 0.02 and elapsed < 1
    verdict(5, "closed-form S identities", ok,
            f"partial-sum error {worst:.1e}, |S_A(40)-2|={limit_a:.1e}, S_B(40)/18.5={ratio_b:.4f}")


def test_criterion_06_recurrence():
    start = time.perf_counter()
    table = tree_recurrence(5)
    boundary = all(table.values[N + 1][N] == 1 and table.get(N + 1, N + 1) == 0 for N in range(1, 5))
    counts = {N: cluster_histogram(build_encoder("type-b-tree", 2 ** (N - 1)).circuit).counts for N in range(2, 6)}
    results = {}
    for offset in (0, 1):
        misses = [(N, k, table.values[N][k], counts[N].get(k + offset, 0))
                  for N in range(2, 6) for k in range(1, N) if table.values[N][k] != counts[N].get(k + offset, 0)]
        results[offset] = misses
    elapsed = time.perf_counter() - start
    matched = [o for o, m in results.items() if not m]
    detail = "; ".join(f"offset {o}: {len(m)} mismatches, first (N,k,R,count)={m[0] if m else None}"
                       for o, m in results.items())
    verdict(6, "tree recurrence", boundary and bool(matched) and elapsed < 60, f"boundaries {boundary}; {detail}")


def test_criterion_07_scaling_laws():
    start = time.perf_counter()
    sizes = np.array([8, 12, 16, 20])
    S = {}
    for topology in ("type-a-linear", "star-flip", "type-a-two-control-tree", "type-b-linear", "type-b-tree"):
        S[topology] = np.array([empirical_S(cluster_histogram(build_encoder(topology, int(n), ragged=True).circuit))
                                for n in sizes])
    bounded = {t: float(np.polyfit(sizes[1:], S[t][1:], 1)[0])
               for t in ("type-a-linear", "star-flip", "type-a-two-control-tree")}
    fits = {}
    for t in ("type-b-linear", "type-b-tree"):
        slope, icpt = np.polyfit(sizes, S[t], 1)
        resid = S[t] - (slope * sizes + icpt)
        fits[t] = (float(slope), float(1 - resid @ resid / np.sum((S[t] - S[t].mean()) ** 2)))
    factor = fits["type-b-linear"][0] / fits["type-b-tree"][0]
    elapsed = time.perf_counter() - start
    ok = (all(abs(s) < 0.01 for s in bounded.values())
          and all(r2 > 0.99 for _, r2 in fits.values())
          and fits["type-b-tree"][0] < 0.5 * fits["type-b-linear"][0]
          and 2.5 <= factor <= 6 and elapsed < 600)
    detail = (", ".join(f"{t} slope {s:.4f}" for t, s in bounded.items())
              + "; " + ", ".join(f"{t} slope {s:.4f} R2 {r2:.5f}" for t, (s, r2) in fits.items())
              + f"; linear/tree factor {factor:.3f}; {elapsed:.1f}s")
    verdict(7, "scaling laws", ok, detail)


def test_criterion_08_decoherence():
    start = time.perf_counter()
    rates = derive_rates(TRANSMON, "total")
    states = {t: run(StateVector.uniform_plus((3,) * 4), build_encoder(t, 4).circuit)
              for t in ("type-a-linear", "type-b-linear")}
    excite = fidelity_slope(states["type-a-linear"], rates)
    absorb = fidelity_slope(states["type-b-linear"], rates)
    numeric = {t: numerical_slope(s, rates) for t, s in states.items()}
    agree = max(abs(numeric["type-a-linear"] / excite - 1), abs(numeric["type-b-linear"] / absorb - 1))
    elapsed = time.perf_counter() - start
    ratio = absorb / excite
    ok = (abs(ratio - 1.35) <= 0.10 and abs(excite / 2.49 - 1) <= 0.15 and abs(absorb / 3.36 - 1) <= 0.15
          and agree <= 0.01 and elapsed < 10)
    verdict(8, "decoherence", ok,
            f"mode total: slopes {excite:.3f}, {absorb:.3f} per us, ratio {ratio:.3f}, "
            f"analytic vs integrated {agree:.1e}, {elapsed:.2f}s")


def test_criterion_09_entanglement_formulas():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_purity = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        profile = AmplitudeProfile.random(n, rng)
        state = closed_final_state(profile)
        for j in range(n):
            worst_purity = max(worst_purity, abs(purity_prediction(j, profile)
                                                 - purity(reduced_density_matrix(state, [j]))))
    # oracle-identified relation: error on site k struck between encoder and decoder,
    # measured at i = k >= 1; the flip formula additionally assumes equal-weight real amplitudes
    worst_disp = 0.0
    for n in (3, 4):
        profiles = {"Z2": [AmplitudeProfile.uniform(n)] + [AmplitudeProfile.random(n, rng) for _ in range(5)],
                    "X01": [AmplitudeProfile.uniform(n)]}
        for kind, plist in profiles.items():
            for profile in plist:
                for k in range(1, n):
                    circuit, inj = center_injection(n, kind, k)
                    worst_disp = max(worst_disp, abs(dispersion(circuit, inj, k, profile)
                                                     - dispersion_prediction(kind, k, profile)))
    worst_local = 0.0
    for n in (3, 4):
        profile = AmplitudeProfile.random(n, rng)
        for kind, reach in (("Z0", 0), ("X12", 1)):
            for k in range(n):
                circuit, inj = center_injection(n, kind, k)
                for i in range(n):
                    if not k <= i <= k + reach:
                        worst_local = max(worst_local, abs(dispersion(circuit, inj, i, profile) - 1))
    elapsed = time.perf_counter() - start
    ok = worst_purity <= 1e-10 and worst_disp <= 1e-10 and worst_local <= 1e-12 and elapsed < 60
    verdict(9, "entanglement formulas", ok,
            f"purity {worst_purity:.1e}, dispersion {worst_disp:.1e}, locality {worst_local:.1e}, {elapsed:.1f}s")


def test_criterion_10_propagation_identities():
    start = time.perf_counter()
    worst, count = 0.0, 0
    for n in (2, 3, 4):
        cols = qubit_subspace_columns(n)
        for kind in ERROR_KINDS:
            for k in range(n):
                diff = propagate_error(kind, k, n).matrix()[:, cols] - conjugated_error(kind, k, n)[:, cols]
                worst = max(worst, float(np.abs(diff).max()))
                count += 1
    elapsed = time.perf_counter() - start
    verdict(10, "propagation identities", worst <= 1e-10 and elapsed < 30,
            f"{count} forms, max deviation {worst:.1e}, {elapsed:.2f}s")


def test_criterion_11_determinism():
    outputs = {}
    for topology in Topology:
        circuit = build_encoder(topology, 16, ragged=True).circuit
        outputs[topology.value] = {w: cluster_histogram(circuit, workers=w).to_csv() for w in (1, 2, 8)}
    identical = all(len(set(by_worker.values())) == 1 for by_worker in outputs.values())
    verdict(11, "determinism", identical, f"{len(outputs)} topologies at n=16, workers 1/2/8")
