"""Command-line front end: one experiment per invocation.

Each run writes CSV series, JSON reports and a ``metadata.json`` sidecar
into ``--out-dir``.  Exit status is 0 on success, 2 for configuration
problems and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from qsaw import analysis, classical, echo, gates, io, measurement, propagator
from qsaw.errors import (
    ConfigError,
    InsufficientSupport,
    NonDecaying,
    NumericalFailure,
    ParamsError,
    QsawError,
)
from qsaw.params import CYLINDER, TORUS, derive_params

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_PARAM_KEYS = ("K", "k", "T", "n", "L", "m0", "boundary")

RECIPES = [
    ("Fig. 1", "momentum distribution frozen by dynamical localization",
     ["localization --n 6 --K sqrt2 --k sqrt3 --boundary cylinder "
      "--window 10 20 --window 290 300"]),
    ("Fig. 2", "three-qubit ergodic (L=1) and localized (L=5) regimes",
     ["localization --n 3 --L 1 --K 1.45 --K-average 1.4 1.5 100 "
      "--window 3 3 --window 50 50 --out-dir fig2_L1",
      "localization --n 3 --L 5 --K 1.45 --K-average 1.4 1.5 10 "
      "--window 3 3 --window 50 50 --out-dir fig2_L5"]),
    ("Fig. 3", "simulated measurement experiment and l against N_M",
     ["measure --n 6 --K sqrt2 --L 10 --t 50 --n-runs 5000 --dropped-bits 2 "
      "--scan-runs 100 200 500 1000 2000 5000 10000 20000"]),
    ("Fig. 4", "anomalous diffusion exponent across the stable regime",
     ["anomalous-scan --K-range -3.9 -0.1 39 --n-traj 10000 --t-max 10000 "
      "--fit-window 100 10000"]),
    ("Fig. 5", "scattering circuit check: fidelity through the ancilla",
     ["fidelity --n 6 --K sqrt2 --k sqrt3 --boundary cylinder --epsilon 0.01 --t 50 "
      "--method scattering_sampled --n-samples 10000",
      "fidelity --n 6 --K sqrt2 --k sqrt3 --boundary cylinder --epsilon 0.01 --t 50 "
      "--method direct"]),
]


def figure_recipes() -> list[tuple[str, str, list[str]]]:
    """``(figure, description, commands)`` for every reproducible figure."""
    return [(f, d, list(c)) for f, d, c in RECIPES]


# argument parsing --------------------------------------------------------


def _add_params(p: argparse.ArgumentParser, boundary: str = TORUS, n: int = 6):
    g = p.add_argument_group("map parameters")
    g.add_argument("--K", help="classical kick strength (accepts e.g. sqrt2)")
    g.add_argument("--k", help="quantum kick strength")
    g.add_argument("--T", help="kick period (effective Planck constant)")
    g.add_argument("--n", type=int, default=n, help="number of qubits")
    g.add_argument("--L", type=int, help="number of torus cells (torus mode)")
    g.add_argument("--m0", type=int, default=0, help="initial momentum level")
    g.add_argument("--boundary", choices=(TORUS, CYLINDER), default=boundary)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsaw", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--config", help="JSON file whose keys override command-line flags")
    sub = parser.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("lyapunov", parents=[common], help="tangent-map Lyapunov exponent")
    p.add_argument("--K", nargs="+", required=True)
    p.add_argument("--t-max", type=int, default=10_000)

    p = sub.add_parser("classical-diffusion", parents=[common],
                       help="ensemble spreading and diffusion coefficient")
    _add_params(p, boundary=CYLINDER)
    p.add_argument("--n-traj", type=int, default=10_000)
    p.add_argument("--t-max", type=int, default=100)

    p = sub.add_parser("anomalous-scan", parents=[common],
                       help="anomalous diffusion exponent against K")
    p.add_argument("--K", nargs="+", help="explicit K values")
    p.add_argument("--K-range", nargs=3, metavar=("LO", "HI", "COUNT"),
                   help="evenly spaced K values, endpoints included")
    p.add_argument("--m0", type=int, default=0, help="initial action J0 (integer)")
    p.add_argument("--n-traj", type=int, default=10_000)
    p.add_argument("--t-max", type=int, default=10_000)
    p.add_argument("--fit-window", nargs=2, type=float, default=(100.0, 10_000.0))
    p.add_argument("--n-times", type=int, default=41, help="log-spaced record times")

    p = sub.add_parser("quantum-evolve", parents=[common], help="evolve |m0> and save the state")
    _add_params(p)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--engine", choices=("spectral", "gates"), default="spectral")
    p.add_argument("--circuit-in", help="gate list text file used by the gates engine")
    p.add_argument("--circuit-out", help="write the one-step gate list here")

    p = sub.add_parser("localization", parents=[common],
                       help="time-averaged distribution, l fit and participation ratio")
    _add_params(p)
    p.add_argument("--window", nargs=2, type=int, action="append", metavar=("T0", "T1"),
                   help="inclusive averaging window (repeatable)")
    p.add_argument("--K-average", nargs=3, metavar=("LO", "HI", "COUNT"),
                   help="also average over COUNT values of K at fixed L or T")

    p = sub.add_parser("measure", parents=[common], help="simulated projective measurements")
    _add_params(p)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--n-runs", type=int, default=5000)
    p.add_argument("--dropped-bits", type=int,
                   help="least significant qubits left unmeasured (default: two-stage choice)")
    p.add_argument("--scan-runs", nargs="+", type=int,
                   help="also fit l for these N_M, full and coarse resolution")

    p = sub.add_parser("fidelity", parents=[common], help="Loschmidt echo")
    _add_params(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--method", choices=echo.METHODS, default="direct")
    p.add_argument("--n-samples", type=int, default=10_000)

    p = sub.add_parser("gate-verify", parents=[common],
                       help="compare gate-built and spectral Floquet operators")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--circuit-out", help="write a sample Floquet gate list here")

    sub.add_parser("recipes", help="print the command for each figure")
    return parser


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    nested = data.pop("params", {})
    if "boundary_mode" in nested:
        nested["boundary"] = nested.pop("boundary_mode")
    data.update(nested)
    data.pop("experiment", None)
    for key, value in data.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ConfigError(f"unknown config key {key!r} for {args.experiment}")
        setattr(args, dest, value)
    return args


def _params(args, **override):
    fields = {key: getattr(args, key, None) for key in _PARAM_KEYS}
    fields.update(override)
    try:
        return derive_params(fields["K"], fields["k"], fields["T"], n=int(fields["n"]),
                             L=fields["L"], m0=fields["m0"] or 0, boundary=fields["boundary"])
    except ParamsError as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from None


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


# experiments -------------------------------------------------------------


def run_lyapunov(args, out: Path) -> list[Path]:
    rows = []
    for raw in args.K:
        K = float(_params_number(raw))
        lam = classical.lyapunov_exponent(K, args.t_max)
        rows.append((K, lam, classical.analytic_lyapunov(K)))
    return [io._write_rows(out / "lyapunov.csv", ["K", "lambda", "lambda_analytic"], rows)]


def _params_number(raw):
    from qsaw.params import resolve_number

    try:
        return resolve_number(raw)
    except ParamsError as exc:
        raise ConfigError(str(exc)) from None


def run_classical_diffusion(args, out: Path) -> list[Path]:
    _require(args.K is not None, "classical-diffusion needs --K")
    torus_from_L = args.boundary == TORUS and args.L is not None
    params = _params(args, T=args.T if args.T is not None or torus_from_L else 1.0)
    moments = classical.ensemble_evolve(params, args.n_traj, args.t_max, args.seed,
                                        threads=args.threads)
    report = analysis.fit_diffusion_coefficient(moments, units="J")
    if params.K > 0:
        theory = analysis.rpa_diffusion(params.K)
        report.diagnostics.update(theory=theory.value, theory_regime=theory.regime)
    return [io.write_ensemble_csv(out / "ensemble.csv", moments),
            io.write_report(out / "diffusion.json", report)]


def _k_values(args) -> list[float]:
    if args.K_range:
        lo, hi, count = args.K_range
        grid = np.linspace(_params_number(lo), _params_number(hi), int(count))
        return [float(x) for x in np.round(grid, 12)]
    _require(bool(args.K), "anomalous-scan needs --K or --K-range")
    return [float(_params_number(x)) for x in args.K]


def run_anomalous_scan(args, out: Path) -> list[Path]:
    lo, hi = args.fit_window
    _require(0 < lo < hi <= args.t_max, "fit window must satisfy 0 < lo < hi <= t-max")
    times = np.unique(np.round(np.geomspace(1, args.t_max, args.n_times)).astype(int))
    rows, files = [], []
    for i, K in enumerate(_k_values(args)):
        # classical run: T = 1 makes the initial action J0 = m0; n only bounds m0
        params = derive_params(K=K, T=1.0, n=16, m0=args.m0, boundary=CYLINDER)
        moments = classical.ensemble_evolve(params, args.n_traj, args.t_max, args.seed,
                                            record_times=times, threads=args.threads)
        files.append(io.write_ensemble_csv(out / f"ensemble_{i:03d}.csv", moments))
        try:
            fit = analysis.fit_anomalous_exponent(moments, window=(lo, hi))
            rows.append((K, fit.value, fit.std_error))
        except QsawError:
            rows.append((K, math.nan, math.nan))
    files.insert(0, io._write_rows(out / "alpha.csv", ["K", "alpha", "std_error"], rows))
    return files


def _load_circuit(path: str) -> gates.GateList:
    try:
        return gates.GateList.from_text(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load circuit {path}: {exc}") from None


def run_quantum_evolve(args, out: Path) -> list[Path]:
    params = _params(args)
    files = []
    circuit = None
    if args.circuit_in:
        circuit = _load_circuit(args.circuit_in)
        _require(circuit.width == params.n, f"circuit width {circuit.width} != n={params.n}")
    if args.circuit_out:
        text = (circuit or gates.build_floquet_circuit(params)).to_text()
        Path(args.circuit_out).write_text(text)
        files.append(Path(args.circuit_out))
    psi0 = propagator.init_momentum_state(params)
    if args.engine == "gates" or circuit is not None:
        psi = gates.evolve_with_circuit(psi0, args.t, circuit)
    else:
        psi = propagator.evolve(psi0, args.t)
    if abs(psi.norm_squared() - 1) > 1e-8:
        raise NumericalFailure(f"norm drifted to {psi.norm_squared()!r}")
    files += [io.write_state_csv(out / "state.csv", psi),
              io.write_state_binary(out / "state.bin", psi)]
    return files


def _averaged_distribution(args, params, t0: int, t1: int) -> np.ndarray:
    if not args.K_average:
        return propagator.time_averaged_probabilities(params, t0, t1)
    lo, hi, count = args.K_average
    acc = np.zeros(params.N)
    Ks = np.linspace(_params_number(lo), _params_number(hi), int(count))
    for K in Ks:
        q = derive_params(K=float(K), T=params.T, n=params.n, L=params.L, m0=params.m0,
                          boundary=params.boundary)
        acc += propagator.time_averaged_probabilities(q, t0, t1)
    return acc / len(Ks)


def run_localization(args, out: Path) -> list[Path]:
    params = _params(args)
    windows = args.window or [(10, 20)]
    files, rows = [], []
    for t0, t1 in windows:
        _require(0 <= t0 <= t1, f"bad window {t0}..{t1}")
        W = _averaged_distribution(args, params, t0, t1)
        tag = f"t{t0}-{t1}"
        files.append(io.write_distribution_csv(out / f"distribution_{tag}.csv", W))
        ipr = analysis.inverse_participation_ratio(W)
        files.append(io.write_report(out / f"ipr_{tag}.json", ipr))
        try:
            fit = analysis.fit_localization_length(W, m0=params.m0)
            files.append(io.write_report(out / f"localization_{tag}.json", fit))
            ell = fit.value
        except (NonDecaying, InsufficientSupport) as exc:
            if len(windows) == 1:
                raise NumericalFailure(f"localization fit failed: {exc}") from None
            ell = math.nan
        rows.append((t0, t1, ell, ipr.diagnostics["xi"], W[params.m0_index]))
    files.insert(0, io._write_rows(out / "localization_summary.csv",
                                   ["t_start", "t_stop", "ell", "xi", "W_m0"], rows))
    return files


def _safe_fit(h) -> float:
    try:
        return analysis.fit_localization_length(h, m0=h.metadata.get("m0", 0)).value
    except (NonDecaying, InsufficientSupport):
        return math.nan


def run_measure(args, out: Path) -> list[Path]:
    params = _params(args)
    psi = propagator.evolve(propagator.init_momentum_state(params), args.t)
    hist = measurement.run_measurement_experiment(params, args.t, args.n_runs, args.dropped_bits,
                                                  args.seed, final_state=psi)
    hist.metadata["m0"] = params.m0
    files = [io.write_state_csv(out / "exact_state.csv", psi),
             io.write_histogram(out / "histogram.csv", hist),
             io.write_report(out / "ipr.json", analysis.inverse_participation_ratio(hist))]
    try:
        fit = analysis.fit_localization_length(hist, m0=params.m0)
        files.append(io.write_report(out / "localization.json", fit))
    except (NonDecaying, InsufficientSupport) as exc:
        print(f"warning: coarse fit failed: {exc}", file=sys.stderr)
    if args.scan_runs:
        b = hist.dropped_bits
        rows = []
        for NM in args.scan_runs:
            full = measurement.histogram_from_state(psi, NM, 0, args.seed, {"m0": params.m0})
            coarse = measurement.histogram_from_state(psi, NM, b, args.seed, {"m0": params.m0})
            rows.append((NM, _safe_fit(full), _safe_fit(coarse)))
        files.append(io._write_rows(out / "ell_vs_runs.csv", ["n_runs", "ell_full", "ell_coarse"],
                                    rows))
    return files


def run_fidelity(args, out: Path) -> list[Path]:
    params = _params(args)
    _require(args.epsilon >= 0 and args.t >= 0, "need epsilon >= 0 and t >= 0")
    n_samples = args.n_samples if args.method == "scattering_sampled" else 0
    rows = []
    report = None
    for t in range(args.t + 1):
        report = echo.fidelity(params, args.epsilon, t, args.method, n_samples, args.seed + t)
        rows.append((t, report.value, report.std_error))
    return [io._write_rows(out / "fidelity.csv", ["t", "fidelity", "std_error"], rows),
            io.write_report(out / "fidelity.json", report)]


def run_gate_verify(args, out: Path) -> list[Path]:
    _require(args.n >= 1, "n must be >= 1")
    result = gates.gate_verify(args.n, args.draws, args.seed)
    result["tolerance"] = args.tolerance
    result["passed"] = bool(result["max_error"] < args.tolerance
                            and result["gate_count"] == result["expected_gate_count"])
    files = [io.write_json(out / "gate_verify.json", result)]
    if args.circuit_out:
        params = derive_params(K=1.0, k=1.0, n=args.n, boundary=CYLINDER)
        Path(args.circuit_out).write_text(gates.build_floquet_circuit(params).to_text())
        files.append(Path(args.circuit_out))
    if not result["passed"]:
        raise NumericalFailure(
            f"gate check failed: max error {result['max_error']:.3g}, "
            f"{result['gate_count']} gates (expected {result['expected_gate_count']})")
    return files


EXPERIMENTS = {
    "lyapunov": run_lyapunov,
    "classical-diffusion": run_classical_diffusion,
    "anomalous-scan": run_anomalous_scan,
    "quantum-evolve": run_quantum_evolve,
    "localization": run_localization,
    "measure": run_measure,
    "fidelity": run_fidelity,
    "gate-verify": run_gate_verify,
}


def print_recipes(stream=None):
    stream = stream or sys.stdout
    for fig, desc, commands in figure_recipes():
        print(f"# {fig}: {desc}", file=stream)
        for c in commands:
            print(f"qsaw {c}", file=stream)


def run_experiment(args: argparse.Namespace) -> int:
    """Run one parsed experiment, writing outputs and the metadata sidecar."""
    args = _apply_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files = EXPERIMENTS[args.experiment](args, out)
    config = {k: v for k, v in vars(args).items() if k not in ("out_dir",)}
    io.write_metadata(out / "metadata.json", config, args.seed, time.perf_counter() - start,
                      [Path(f).name for f in files])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.experiment == "recipes":
        print_recipes()
        return EXIT_OK
    try:
        return run_experiment(args)
    except ConfigError as exc:
        print(f"qsaw: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QsawError as exc:
        print(f"qsaw: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def recipe_argv(command: str) -> list[str]:
    return shlex.split(command)


if __name__ == "__main__":
    sys.exit(main())
