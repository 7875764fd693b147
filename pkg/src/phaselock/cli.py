"""Command-line interface.

Subcommands: simulate, plv, rpa, ipa, psca, gradcheck, pipeline. Each
accepts --config JSON (keys = the command's parameter names); explicit
flags override config values, which override defaults. The resolved
configuration is echoed into every report, so a run is reproducible from
its report alone.

Exit codes: 0 success, 1 usage/config error, 2 computation error,
3 optimizer hit its iteration cap (result still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import fileio, gradcheck, pipeline
from .exceptions import PhaseLockError
from .ipa import IPAProblem, ipa_solve
from .kuramoto import clustered, mix, simulate, synth_sources
from .optim import OptimizerConfig, Termination
from .pipeline import PipelineConfig, conditioned_mixing_matrix, leading_plv_eigenvectors
from .psca import PSCAProblem, psca_solve
from .rpa import RPAProblem, rpa_solve
from .signalcore import analytic, mean_offdiag_magnitude, plv_matrix

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTE = 2
EXIT_MAXITERS = 3


class _UsageError(Exception):
    pass


@contextmanager
def _usage_scope():
    """Convert validation/IO failures while assembling a run into usage errors."""
    try:
        yield
    except (ValueError, OSError, json.JSONDecodeError) as err:
        raise _UsageError(str(err)) from err


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve(args, defaults):
    """defaults < config file < explicit flags; rejects unknown config keys."""
    merged = dict(defaults)
    if args.config:
        with _usage_scope():
            with open(args.config) as handle:
                loaded = json.load(handle)
            unknown = sorted(set(loaded) - set(defaults))
            if unknown:
                raise ValueError(f"unknown config keys: {', '.join(unknown)}")
            merged.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _say(args, message):
    if not args.quiet:
        print(message)


def _opt_config(cfg):
    return OptimizerConfig(seed=int(cfg["seed"]), max_iters=int(cfg["max_iters"]))


def _trace_summary(trace):
    return {
        "termination": trace.termination.value,
        "iterations": trace.n_iterations,
        "final_objective": trace.objectives[-1],
        "tail": [list(rec) for rec in trace.tail()],
    }


def _finish_solver_report(args, cfg, command, metrics, artifacts, trace):
    report = {
        "command": command,
        "config": cfg,
        "metrics": metrics,
        "artifacts": artifacts,
    }
    fileio.write_report(_out_path(args, "report.json"), report)
    _say(args, f"{command}: {metrics.get('summary', '')} -> {args.out}/report.json")
    if trace is not None and trace.termination is Termination.MAX_ITERS:
        return EXIT_MAXITERS
    return EXIT_OK


def _load_signals(cfg, key="input"):
    path = cfg.get(key)
    if not path:
        raise _UsageError(f"missing required input: --{key.replace('_', '-')}")
    if not os.path.exists(path):
        raise _UsageError(f"no such file: {path}")
    return fileio.read_signals_csv(path)


# ---------------------------------------------------------------- simulate

SIMULATE_DEFAULTS = {
    "cluster_sizes": [2, 2],
    "freq_centers": [1.0, 1.7],
    "freq_band": 0.05,
    "kappa_intra": 0.5,
    "kappa_inter": 0.0,
    "dt": 0.01,
    "n_samples": 16384,
    "amplitude_mode": "smooth_random",
    "freq_jitter": 0.0,
    "mixing": "random",
    "mixing_cond": 2.5,
    "seed": 0,
}


def run_simulate(args):
    cfg = _resolve(args, SIMULATE_DEFAULTS)
    with _usage_scope():
        sizes = [int(s) for s in cfg["cluster_sizes"]]
        centers = [float(c) for c in cfg["freq_centers"]]
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"cluster sizes must all be >= 1, got {sizes}")
        if len(centers) != len(sizes):
            raise ValueError("need one frequency center per cluster")
        n = sum(sizes)
        rng = np.random.default_rng(int(cfg["seed"]))
        edges = np.cumsum([0] + sizes)
        clusters = [np.arange(edges[i], edges[i + 1]) for i in range(len(sizes))]
        omega = np.concatenate([
            c + rng.uniform(-cfg["freq_band"] / 2, cfg["freq_band"] / 2, s)
            for c, s in zip(centers, sizes)
        ])
        network = clustered(omega, clusters, cfg["kappa_intra"], cfg["kappa_inter"])
        mixing = cfg["mixing"]
        if mixing == "random":
            mixing_matrix = conditioned_mixing_matrix(rng, n, float(cfg["mixing_cond"]))
        elif mixing == "none":
            mixing_matrix = None
        else:
            mixing_matrix = fileio.read_matrix_csv(mixing)
            if mixing_matrix.shape != (n, n):
                raise ValueError(
                    f"mixing matrix is {mixing_matrix.shape}, expected {(n, n)}"
                )
        phases0 = rng.uniform(-np.pi, np.pi, n)

    trajectory = simulate(
        network, phases0, float(cfg["dt"]), int(cfg["n_samples"]),
        seed=int(cfg["seed"]), freq_jitter=float(cfg["freq_jitter"]),
    )
    sources = synth_sources(trajectory, mode=cfg["amplitude_mode"], seed=int(cfg["seed"]))
    mixtures = mix(sources, mixing_matrix) if mixing_matrix is not None else None

    artifacts = {"sources": "sources.csv", "phases": "phases.csv"}
    fileio.write_signals_csv(_out_path(args, "sources.csv"), sources.data)
    fileio.write_signals_csv(_out_path(args, "phases.csv"), trajectory.phases)
    if mixtures is not None:
        fileio.write_signals_csv(_out_path(args, "mixtures.csv"), mixtures.data)
        artifacts["mixtures"] = "mixtures.csv"

    tail = trajectory.phases[:, -(trajectory.n_samples // 4):]
    plvs = plv_matrix(tail)
    metrics = {
        "n_oscillators": n,
        "natural_frequencies": list(omega),
        "clusters": [[int(i) for i in c] for c in clusters],
        "within_cluster_mean_plv": [
            mean_offdiag_magnitude(plvs, c) for c in clusters
        ],
        "global_mean_plv": mean_offdiag_magnitude(plvs),
        "summary": f"{n} oscillators x {cfg['n_samples']} samples",
    }
    if mixing_matrix is not None:
        metrics["mixing_matrix"] = [list(row) for row in mixing_matrix]
        metrics["mixing_condition"] = float(np.linalg.cond(mixing_matrix))
    return _finish_solver_report(args, cfg, "simulate", metrics, artifacts, None)


# ---------------------------------------------------------------- plv

PLV_DEFAULTS = {"input": None, "trim": 0, "seed": 0}


def run_plv(args):
    cfg = _resolve(args, PLV_DEFAULTS)
    data = _load_signals(cfg)
    with _usage_scope():
        mat = analytic(data).trimmed(int(cfg["trim"]))
    plvs = plv_matrix(mat)
    fileio.write_matrix_csv(_out_path(args, "plv_magnitude.csv"), plvs.magnitude())
    fileio.write_matrix_csv(_out_path(args, "plv_angle.csv"), plvs.angle())
    metrics = {
        "n_channels": plvs.n_channels,
        "mean_offdiag_plv": mean_offdiag_magnitude(plvs),
        "summary": f"{plvs.n_channels}x{plvs.n_channels} locking matrix",
    }
    artifacts = {"magnitude": "plv_magnitude.csv", "angle": "plv_angle.csv"}
    return _finish_solver_report(args, cfg, "plv", metrics, artifacts, None)


# ---------------------------------------------------------------- rpa

RPA_DEFAULTS = {
    "input": None,
    "ref_phase": None,
    "ref_signal": None,
    "ref_channel": 0,
    "amp_floor": 1e-8,
    "trim": 0,
    "n_starts": 8,
    "max_iters": 2000,
    "seed": 0,
}


def run_rpa(args):
    cfg = _resolve(args, RPA_DEFAULTS)
    data = _load_signals(cfg)
    with _usage_scope():
        if bool(cfg["ref_phase"]) == bool(cfg["ref_signal"]):
            raise ValueError("provide exactly one of ref_phase / ref_signal")
        trim = int(cfg["trim"])
        if cfg["ref_phase"]:
            reference = fileio.read_signals_csv(cfg["ref_phase"])[0]
            if trim:
                reference = reference[trim:reference.size - trim]
        else:
            ref_data = fileio.read_signals_csv(cfg["ref_signal"])
            channel = int(cfg["ref_channel"])
            reference = analytic(ref_data).trimmed(trim).phase[channel]
        problem = RPAProblem(
            mixtures=analytic(data).trimmed(trim),
            ref_phase=reference,
            amp_floor=float(cfg["amp_floor"]),
        )
        opt_cfg = _opt_config(cfg)
        n_starts = int(cfg["n_starts"])

    solution = rpa_solve(problem, cfg=opt_cfg, n_starts=n_starts)
    fileio.write_vector_csv(_out_path(args, "w.csv"), solution.w)
    metrics = {
        "plv_magnitude": solution.plv.magnitude,
        "plv_angle": solution.plv.angle,
        "objective": solution.trace.objectives[-1],
        "trace": _trace_summary(solution.trace),
        "summary": f"|plv| = {solution.plv.magnitude:.6f}",
    }
    return _finish_solver_report(
        args, cfg, "rpa", metrics, {"w": "w.csv"}, solution.trace
    )


# ---------------------------------------------------------------- ipa

IPA_DEFAULTS = {
    "input": None,
    "lam": 0.3,
    "logdet_sign": -1.0,
    "amp_floor": 1e-8,
    "trim": 0,
    "n_starts": 1,
    "max_iters": 2000,
    "seed": 0,
}


def run_ipa(args):
    cfg = _resolve(args, IPA_DEFAULTS)
    data = _load_signals(cfg)
    with _usage_scope():
        problem = IPAProblem(
            subspace=analytic(data).trimmed(int(cfg["trim"])),
            lam=float(cfg["lam"]),
            amp_floor=float(cfg["amp_floor"]),
            logdet_sign=float(cfg["logdet_sign"]),
        )
        opt_cfg = _opt_config(cfg)
        n_starts = int(cfg["n_starts"])

    solution = ipa_solve(problem, cfg=opt_cfg, n_starts=n_starts)
    fileio.write_matrix_csv(_out_path(args, "unmixing.csv"), solution.W)
    fileio.write_matrix_csv(
        _out_path(args, "plv_before.csv"), solution.plv_before.magnitude()
    )
    fileio.write_matrix_csv(
        _out_path(args, "plv_after.csv"), solution.plv_after.magnitude()
    )
    before = mean_offdiag_magnitude(solution.plv_before)
    after = mean_offdiag_magnitude(solution.plv_after)
    metrics = {
        "mean_offdiag_plv_before": before,
        "mean_offdiag_plv_after": after,
        "objective": solution.trace.objectives[-1],
        "trace": _trace_summary(solution.trace),
        "summary": f"mean offdiag |plv| {before:.4f} -> {after:.4f}",
    }
    artifacts = {
        "unmixing": "unmixing.csv",
        "plv_before": "plv_before.csv",
        "plv_after": "plv_after.csv",
    }
    return _finish_solver_report(args, cfg, "ipa", metrics, artifacts, solution.trace)


# ---------------------------------------------------------------- psca

PSCA_DEFAULTS = {
    "input": None,
    "features": None,
    "components": 2,
    "trim": 0,
    "n_starts": 8,
    "max_iters": 2000,
    "seed": 0,
}


def run_psca(args):
    cfg = _resolve(args, PSCA_DEFAULTS)
    with _usage_scope():
        if bool(cfg["input"]) == bool(cfg["features"]):
            raise ValueError("provide exactly one of input / features")
        if cfg["features"]:
            if not os.path.exists(cfg["features"]):
                raise ValueError(f"no such file: {cfg['features']}")
            features = fileio.read_complex_matrix_csv(cfg["features"])
        else:
            data = _load_signals(cfg)
            mat = analytic(data).trimmed(int(cfg["trim"]))
            features, _ = leading_plv_eigenvectors(
                plv_matrix(mat), int(cfg["components"])
            )
        problem = PSCAProblem(V=features)
        opt_cfg = _opt_config(cfg)
        n_starts = int(cfg["n_starts"])

    solution = psca_solve(problem, cfg=opt_cfg, n_starts=n_starts)
    fileio.write_matrix_csv(_out_path(args, "rotation.csv"), solution.W)
    fileio.write_complex_matrix_csv(_out_path(args, "components.csv"), solution.U)
    fileio.write_vector_csv(_out_path(args, "assignment.csv"), solution.assignment, fmt="%d")
    sizes = np.bincount(solution.assignment, minlength=problem.n_components)
    metrics = {
        "objective": solution.J,
        "assignment": [int(a) for a in solution.assignment],
        "cluster_sizes": [int(s) for s in sizes],
        "trace": _trace_summary(solution.trace),
        "summary": f"J = {solution.J:.6f}, clusters {list(sizes)}",
    }
    artifacts = {
        "rotation": "rotation.csv",
        "components": "components.csv",
        "assignment": "assignment.csv",
    }
    return _finish_solver_report(args, cfg, "psca", metrics, artifacts, solution.trace)


# ---------------------------------------------------------------- gradcheck

GRADCHECK_DEFAULTS = {"algorithm": "all", "trials": 100, "seed": 0, "step": 1e-5}
_GRADCHECK_ALGOS = ("rpa", "ipa", "psca")


def run_gradcheck(args):
    cfg = _resolve(args, GRADCHECK_DEFAULTS)
    with _usage_scope():
        algorithm = cfg["algorithm"]
        choices = _GRADCHECK_ALGOS + ("meanfield", "all")
        if algorithm not in choices:
            raise ValueError(f"algorithm must be one of {choices}, got {algorithm!r}")
        trials = int(cfg["trials"])
        seed = int(cfg["seed"])
        step = float(cfg["step"])

    results = []
    if algorithm in ("meanfield", "all"):
        if algorithm == "all":
            results.extend(
                gradcheck.run_gradcheck(a, trials=trials, seed=seed, h=step)
                for a in _GRADCHECK_ALGOS
            )
        elif algorithm != "meanfield":
            pass
        if algorithm in ("meanfield", "all"):
            meanfield = gradcheck.run_meanfield_check(trials=trials, seed=seed)
            meanfield["algorithm"] = "meanfield"
            results.append(meanfield)
    else:
        results.append(gradcheck.run_gradcheck(algorithm, trials=trials, seed=seed, h=step))

    all_passed = all(r["passed"] for r in results)
    for result in results:
        name = result["algorithm"]
        verdict = "PASS" if result["passed"] else "FAIL"
        if name == "meanfield":
            detail = (
                f"factor-1 err {result['max_abs_err_factor1']:.3e}, "
                f"best-fit factor {result['best_fit_factor']:.12f}"
            )
        else:
            detail = (
                f"max rel err {result['max_rel_error']:.3e} "
                f"(tol {result['tolerance']:.0e}), "
                f"{len(result['skipped'])} skipped"
            )
        _say(args, f"[{verdict}] {name}: {detail}")

    report = {
        "command": "gradcheck",
        "config": cfg,
        "metrics": {"results": results, "passed": all_passed},
        "artifacts": {},
    }
    fileio.write_report(_out_path(args, "report.json"), report)
    return EXIT_OK if all_passed else EXIT_COMPUTE


# ---------------------------------------------------------------- pipeline

PIPELINE_DEFAULTS = {
    "cluster_sizes": [2, 2],
    "freq_centers": [1.0, 1.7],
    "freq_band": 0.05,
    "kappa_intra": 0.5,
    "kappa_inter": 0.0,
    "dt": 0.01,
    "n_samples": 16384,
    "amplitude_mode": "smooth_random",
    "mixing_cond": 2.5,
    "lam": 0.3,
    "n_components": 0,
    "trim": -1,
    "seed": 0,
    "max_iters": 500,
    "n_starts": 8,
}


def run_pipeline_cmd(args):
    cfg = _resolve(args, PIPELINE_DEFAULTS)
    with _usage_scope():
        config = PipelineConfig(
            cluster_sizes=tuple(cfg["cluster_sizes"]),
            freq_centers=tuple(cfg["freq_centers"]),
            freq_band=float(cfg["freq_band"]),
            kappa_intra=float(cfg["kappa_intra"]),
            kappa_inter=float(cfg["kappa_inter"]),
            dt=float(cfg["dt"]),
            n_samples=int(cfg["n_samples"]),
            amplitude_mode=cfg["amplitude_mode"],
            mixing_cond=float(cfg["mixing_cond"]),
            lam=float(cfg["lam"]),
            n_components=int(cfg["n_components"]),
            trim=int(cfg["trim"]),
            seed=int(cfg["seed"]),
            max_iters=int(cfg["max_iters"]),
            n_starts=int(cfg["n_starts"]),
        )
    report = pipeline.run_pipeline(config)
    fileio.write_report(_out_path(args, "report.json"), report)
    metrics = report["metrics"]
    _say(args, f"pipeline: recovery = {metrics['cluster_recovery']:.3f}")
    for entry in metrics["clusters"]:
        if "mean_offdiag_plv_before" in entry:
            _say(
                args,
                f"  component {entry['component']} channels {entry['channels']}: "
                f"|plv| {entry['mean_offdiag_plv_before']:.4f} -> "
                f"{entry['mean_offdiag_plv_after']:.4f}",
            )
    return EXIT_OK


# ---------------------------------------------------------------- wiring

def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override its keys")
    sub.add_argument("--seed", type=int, help="random seed")
    sub.add_argument("--out", default=".", help="output directory (default: .)")
    sub.add_argument("--trim", type=int, help="samples dropped at each end of derived phases")
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser():
    parser = _Parser(prog="phaselock", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    sub = commands.add_parser("simulate", parents=[], help="generate oscillator data")
    _add_common(sub)
    sub.add_argument("--cluster-sizes", dest="cluster_sizes", type=int, nargs="+")
    sub.add_argument("--freq-centers", dest="freq_centers", type=float, nargs="+")
    sub.add_argument("--freq-band", dest="freq_band", type=float)
    sub.add_argument("--kappa-intra", dest="kappa_intra", type=float)
    sub.add_argument("--kappa-inter", dest="kappa_inter", type=float)
    sub.add_argument("--dt", type=float)
    sub.add_argument("--n-samples", dest="n_samples", type=int)
    sub.add_argument("--amplitude-mode", dest="amplitude_mode",
                     choices=["unit", "smooth_random"])
    sub.add_argument("--freq-jitter", dest="freq_jitter", type=float)
    sub.add_argument("--mixing", help="'random', 'none', or a CSV matrix path")
    sub.add_argument("--mixing-cond", dest="mixing_cond", type=float)
    sub.set_defaults(handler=run_simulate)

    sub = commands.add_parser("plv", help="pairwise phase-locking matrix of a CSV")
    _add_common(sub)
    sub.add_argument("--input", help="time-major signals CSV")
    sub.set_defaults(handler=run_plv)

    sub = commands.add_parser("rpa", help="extract a source locked to a reference")
    _add_common(sub)
    sub.add_argument("--input", help="time-major mixtures CSV")
    sub.add_argument("--ref-phase", dest="ref_phase", help="single-column phase CSV")
    sub.add_argument("--ref-signal", dest="ref_signal", help="real reference signal CSV")
    sub.add_argument("--ref-channel", dest="ref_channel", type=int)
    sub.add_argument("--amp-floor", dest="amp_floor", type=float)
    sub.add_argument("--n-starts", dest="n_starts", type=int)
    sub.add_argument("--max-iters", dest="max_iters", type=int)
    sub.set_defaults(handler=run_rpa)

    sub = commands.add_parser("ipa", help="unmix a subspace by phase independence")
    _add_common(sub)
    sub.add_argument("--input", help="time-major subspace CSV")
    sub.add_argument("--lam", type=float, help="locking/volume tradeoff in [0,1)")
    sub.add_argument("--logdet-sign", dest="logdet_sign", type=float,
                     choices=[-1.0, 1.0], help="barrier sign (default -1)")
    sub.add_argument("--amp-floor", dest="amp_floor", type=float)
    sub.add_argument("--n-starts", dest="n_starts", type=int)
    sub.add_argument("--max-iters", dest="max_iters", type=int)
    sub.set_defaults(handler=run_ipa)

    sub = commands.add_parser("psca", help="cluster channels by locking structure")
    _add_common(sub)
    sub.add_argument("--input", help="time-major signals CSV (features from PLV eigenvectors)")
    sub.add_argument("--features", help="complex feature matrix CSV (used as-is)")
    sub.add_argument("--components", type=int, help="number of clusters sought")
    sub.add_argument("--n-starts", dest="n_starts", type=int)
    sub.add_argument("--max-iters", dest="max_iters", type=int)
    sub.set_defaults(handler=run_psca)

    sub = commands.add_parser("gradcheck", help="closed-form gradients vs central differences")
    _add_common(sub)
    sub.add_argument("--algorithm", choices=["rpa", "ipa", "psca", "meanfield", "all"])
    sub.add_argument("--trials", type=int)
    sub.add_argument("--step", type=float, help="finite-difference step")
    sub.set_defaults(handler=run_gradcheck)

    sub = commands.add_parser("pipeline", help="simulate -> mix -> cluster -> unmix")
    _add_common(sub)
    sub.add_argument("--cluster-sizes", dest="cluster_sizes", type=int, nargs="+")
    sub.add_argument("--freq-centers", dest="freq_centers", type=float, nargs="+")
    sub.add_argument("--freq-band", dest="freq_band", type=float)
    sub.add_argument("--kappa-intra", dest="kappa_intra", type=float)
    sub.add_argument("--kappa-inter", dest="kappa_inter", type=float)
    sub.add_argument("--dt", type=float)
    sub.add_argument("--n-samples", dest="n_samples", type=int)
    sub.add_argument("--amplitude-mode", dest="amplitude_mode",
                     choices=["unit", "smooth_random"])
    sub.add_argument("--mixing-cond", dest="mixing_cond", type=float)
    sub.add_argument("--lam", type=float)
    sub.add_argument("--n-components", dest="n_components", type=int)
    sub.add_argument("--max-iters", dest="max_iters", type=int)
    sub.add_argument("--n-starts", dest="n_starts", type=int)
    sub.set_defaults(handler=run_pipeline_cmd)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.handler(args)
    except _UsageError as err:
        print(f"phaselock {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE
    except PhaseLockError as err:
        print(f"phaselock {args.command}: {err}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
