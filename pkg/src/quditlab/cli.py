"""``quditlab`` command-line front end.

Every subcommand writes to ``--out`` (or stdout) and is deterministic for a
fixed configuration. Validation failures exit with status 1 and capacity
overruns with status 2, each with a one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .clusters import cluster_histogram, figure_of_merit, predicted_frequency, tree_recurrence
from .core import CapacityError, StateVector, ValidationError, circuit_from_dict, circuit_to_dict, parse_basis
from .decoherence import DEPHASING_MODES, TRANSMON, NoiseParams, decay_csv, derive_rates, evolve_fidelity, fidelity_slope
from .decomposer import Topology, build_encoder, build_full_mct
from .entanglement import (
    ERROR_KINDS,
    AmplitudeProfile,
    center_injection,
    dispersion,
    dispersion_csv,
    dispersion_prediction,
    dispersion_table,
    purity_csv,
    purity_table,
)
from .simulator import run


def _num(x: float) -> float:
    return float(f"{x:.12g}")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_circuit(path: str):
    return circuit_from_dict(json.loads(Path(path).read_text()))


def _input_state(source: str, dims) -> StateVector:
    if source == "uniform":
        return StateVector.uniform_plus(dims)
    digits = parse_basis(source)
    if len(digits) > len(dims):
        raise ValidationError(f"input {source!r} has more digits than the circuit has sites")
    return StateVector.basis(dims, digits + (0,) * (len(dims) - len(digits)))


def cmd_compile(args) -> None:
    build = build_full_mct if args.full else build_encoder
    report = build(args.topology, args.n, ragged=args.ragged)
    obj = circuit_to_dict(report.circuit)
    obj["report"] = {
        "depth": report.depth,
        "gate_count": report.gate_count,
        "max_level_used": list(report.max_level_used),
        "root": report.root,
        "activation_level": report.activation_level,
    }
    _emit(json.dumps(obj, sort_keys=True, indent=1) + "\n", args.out)


def cmd_simulate(args) -> None:
    circuit = _load_circuit(args.circuit)
    state = run(_input_state(args.input, circuit.dims), circuit)
    records = [[k, _num(re), _num(im)] for k, re, im in state.to_records()]
    _emit(json.dumps({"dims": list(state.dims), "amplitudes": records}, sort_keys=True) + "\n", args.out)


def cmd_stats(args) -> None:
    circuit = _load_circuit(args.circuit)
    if args.samples is not None:
        hist = cluster_histogram(circuit, "sampled", samples=args.samples, seed=args.seed)
    else:
        hist = cluster_histogram(circuit, "exhaustive", workers=args.workers)
    _emit(hist.to_csv(), args.out)


def cmd_predict(args) -> None:
    topology = Topology.parse(args.topology)
    kmax = args.kmax or args.n
    freqs = [(k, predicted_frequency(topology, args.n, k)) for k in range(1, kmax + 1)]
    s = figure_of_merit(topology, args.n)
    if args.format == "json":
        obj = {"topology": topology.value, "n": args.n, "S": _num(s),
               "frequencies": [{"k": k, "f": _num(f)} for k, f in freqs]}
        _emit(json.dumps(obj, sort_keys=True) + "\n", args.out)
        return
    lines = ["k,frequency"] + [f"{k},{f:.12g}" for k, f in freqs] + [f"S,{s:.12g}"]
    _emit("\n".join(lines) + "\n", args.out)


def cmd_recurrence(args) -> None:
    _emit(tree_recurrence(args.depth).to_csv(), args.out)


def cmd_decay(args) -> None:
    circuit = _load_circuit(args.circuit)
    params = NoiseParams.from_json(Path(args.params).read_text()) if args.params else TRANSMON
    rates = derive_rates(params, args.mode)
    state = run(_input_state(args.input, circuit.dims), circuit)
    grid = np.linspace(0.0, args.t_max, args.steps + 1)
    series = evolve_fidelity(state, rates, grid)
    print(f"initial slope {fidelity_slope(state, rates):.12g} per us ({args.mode} dephasing)", file=sys.stderr)
    _emit(decay_csv(series), args.out)


def _profile(source: str, n: int) -> AmplitudeProfile:
    if source == "uniform":
        return AmplitudeProfile.uniform(n)
    profile = AmplitudeProfile.from_json(Path(source).read_text())
    if profile.n != n:
        raise ValidationError(f"profile has {profile.n} sites but --n is {n}")
    return profile


def cmd_analyze(args) -> None:
    profile = _profile(args.profile, args.n)
    if args.what == "purity":
        _emit(purity_csv(purity_table(profile)), args.out)
        return
    if args.error is None:
        rows = dispersion_table(profile)
    else:
        ks = [args.at] if args.at is not None else list(range(args.n))
        rows = []
        for k in ks:
            circuit, inj = center_injection(args.n, args.error, k)
            for i in range(args.n):
                pred = dispersion_prediction(args.error, i, profile) if args.error in ("Z2", "X01") else float("nan")
                rows.append((args.error, k, i, dispersion(circuit, inj, i, profile), pred))
    _emit(dispersion_csv(rows), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quditlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    topologies = [t.value for t in Topology]

    p = sub.add_parser("compile", help="build an encoder or full MCT circuit as JSON")
    p.add_argument("--topology", required=True, choices=topologies)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--full", action="store_true", help="encoder + controlled target + mirror")
    p.add_argument("--ragged", action="store_true", help="allow any n for tree topologies")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", help="run a circuit JSON on an input state")
    p.add_argument("--circuit", required=True)
    p.add_argument("--input", default="uniform", help="'uniform' or a digit string")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="modified-cluster histogram as CSV")
    p.add_argument("--circuit", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", help="enumerate all inputs (default)")
    mode.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("predict", help="closed-form cluster frequencies and S")
    p.add_argument("--topology", required=True, choices=topologies)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kmax", type=int)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("recurrence", help="tree recurrence table as CSV")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_recurrence)

    p = sub.add_parser("decay", help="fidelity decay of a circuit output under noise")
    p.add_argument("--circuit", required=True)
    p.add_argument("--params", help="noise parameter JSON (defaults to the transmon set)")
    p.add_argument("--mode", choices=DEPHASING_MODES, default="total")
    p.add_argument("--input", default="uniform")
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("analyze", help="purity or dispersion tables for the Type-A linear chain")
    p.add_argument("what", choices=["purity", "dispersion"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--profile", default="uniform", help="'uniform' or a profile JSON file")
    p.add_argument("--error", choices=ERROR_KINDS)
    p.add_argument("--at", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
