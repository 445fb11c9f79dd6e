"""Command line interface.

Subcommands:

* ``simulate``   forward run only, persisting the public belief stream
* ``learn``      estimate the graph from a recorded belief stream
* ``experiment`` forward run plus online estimation, end to end
* ``sweep``      one experiment per grid point over mu and/or delta

Flags mirror the experiment configuration; ``--config FILE`` loads a
JSON configuration (or a previously written manifest) and explicit
flags override its values. Exit codes: 0 success, 1 invalid
configuration, 2 runtime failure, 3 divergence flagged.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from . import io
from .estimator import NoSeparationError, classify_edges, learn_graph
from .harness import (
    MANIFEST_FORMAT,
    ConfigError,
    ExperimentConfig,
    run_experiment,
    run_forward,
    steady_state_mean,
    sweep,
)
from .model import CombinationMatrix
from .simulate import SimulationStep

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_DIVERGED = 3


def _parse_signals(text: str):
    parts = [int(p) for p in text.split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("experiment configuration")
    g.add_argument("--config", metavar="FILE",
                   help="JSON config file or manifest; flags override it")
    g.add_argument("--agents", type=int, help="number of agents")
    g.add_argument("--states", type=int, help="number of hypotheses")
    g.add_argument("--signals", type=_parse_signals, metavar="N[,N...]",
                   help="signal-space size, one value or one per agent")
    g.add_argument("--edge-prob", type=float, help="arc probability of the random graph")
    g.add_argument("--delta", type=float, help="belief adaptation step size, in (0,1)")
    g.add_argument("--mu", type=float, help="estimator learning rate")
    g.add_argument("--iters", type=int, dest="iterations", help="number of iterations")
    g.add_argument("--seed-graph", type=int, help="seed for the adjacency draw")
    g.add_argument("--seed-weights", type=int, help="seed for the weight draw")
    g.add_argument("--seed-likelihoods", type=int, help="seed for the observation models")
    g.add_argument("--seed-signals", type=int, help="seed for the signal stream")
    g.add_argument("--mode", choices=["known", "estimated", "both"],
                   help="estimator variant(s) to run")
    g.add_argument("--true-state", type=int, help="initial true hypothesis index")
    g.add_argument("--reference", type=int, help="reference hypothesis index")
    g.add_argument("--set-state-at", action="append", metavar="ITER:STATE",
                   default=None, help="switch the true state at an iteration; repeatable")
    g.add_argument("--regen-graph-at", action="append", metavar="ITER[:SEED]",
                   default=None,
                   help="regenerate the graph at an iteration; the seed defaults "
                        "to seed_graph + 1001 + event index")
    g.add_argument("--test-mode", action="store_const", const=True, default=None,
                   help="record private signal data for validation")
    g.add_argument("--likelihood-floor", type=float, help="probability floor")
    g.add_argument("--kl-floor", type=float, help="identifiability margin")
    g.add_argument("--max-attempts", type=int, help="resampling budget for generation")
    g.add_argument("--classify-method", choices=["two-means", "threshold"],
                   help="edge classification method")
    g.add_argument("--classify-threshold", type=float,
                   help="threshold for the threshold classifier")
    g.add_argument("--out", help="output directory")


_CONFIG_FIELDS = (
    "agents", "states", "signals", "edge_prob", "delta", "mu", "iterations",
    "seed_graph", "seed_weights", "seed_likelihoods", "seed_signals", "mode",
    "true_state", "reference", "test_mode", "likelihood_floor", "kl_floor",
    "max_attempts", "classify_method", "classify_threshold",
)


def _parse_timed(text: str, flag: str) -> tuple[int, int | None]:
    match = re.fullmatch(r"(\d+)(?::(-?\d+))?", text.strip())
    if not match:
        raise ConfigError(f"{flag} expects ITER or ITER:VALUE, got {text!r}")
    return int(match.group(1)), None if match.group(2) is None else int(match.group(2))


def build_config(args, require_out: bool = True) -> ExperimentConfig:
    """Merge dataclass defaults, an optional config file and explicit
    flags into a validated configuration."""
    base: dict = {}
    file_out = None
    if getattr(args, "config", None):
        payload = io.load_json(args.config)
        if isinstance(payload, dict) and payload.get("format") == MANIFEST_FORMAT:
            payload = payload["config"]
        if not isinstance(payload, dict):
            raise ConfigError("config file must hold a JSON object")
        file_out = payload.pop("out", None)
        base = payload

    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value

    events = list(base.get("schedule", []))
    for text in args.set_state_at or []:
        iteration, value = _parse_timed(text, "--set-state-at")
        if value is None:
            raise ConfigError("--set-state-at expects ITER:STATE")
        events.append({"iteration": iteration, "action": "set_true_state",
                       "value": value})
    seed_graph = base.get("seed_graph", ExperimentConfig.seed_graph)
    for index, text in enumerate(args.regen_graph_at or []):
        iteration, value = _parse_timed(text, "--regen-graph-at")
        if value is None:
            value = seed_graph + 1001 + index
        events.append({"iteration": iteration, "action": "regenerate_graph",
                       "value": value})
    if events:
        base["schedule"] = sorted(events, key=lambda e: e["iteration"])

    out = getattr(args, "out", None) or file_out
    if require_out and not out:
        raise ConfigError("an output directory is required (--out)")
    try:
        return ExperimentConfig.from_dict(base, out=out)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def _print_mode_summary(result) -> None:
    for mode in sorted(result.modes):
        mres = result.modes[mode]
        status = f"diverged at {mres.diverged_at}" if mres.diverged_at else "ok"
        acc = "n/a" if mres.edge_accuracy is None else f"{mres.edge_accuracy:.4f}"
        print(f"{mode:9s} steady-state msd {mres.steady_state_msd:.6g}  "
              f"edge accuracy {acc}  [{status}]")


def _cmd_experiment(args) -> int:
    config = build_config(args)
    result = run_experiment(config)
    print(f"wrote {result.out_dir}")
    print(f"initial msd {result.initial_msd:.6g}")
    _print_mode_summary(result)
    return EXIT_DIVERGED if result.divergent else EXIT_OK


def _cmd_simulate(args) -> int:
    config = build_config(args)
    out = run_forward(config)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = build_config(args)
    mu_values = [float(x) for x in args.mu_grid.split(",")] if args.mu_grid else None
    delta_values = (
        [float(x) for x in args.delta_grid.split(",")] if args.delta_grid else None
    )
    if not mu_values and not delta_values:
        raise ConfigError("sweep needs --mu-grid and/or --delta-grid")
    rows = sweep(config, mu_values, delta_values)
    print("mu,delta,mode,steady_state_msd,divergent")
    for row in rows:
        print(f"{row['mu']:g},{row['delta']:g},{row['mode']},"
              f"{row['steady_state_msd']:.6g},{int(row['divergent'])}")
    return EXIT_DIVERGED if any(r["divergent"] for r in rows) else EXIT_OK


def _load_truth(run_dir: Path | None, trace_file: Path | None):
    """Ground truth for deviation tracking, when available."""
    trace = None
    if trace_file and trace_file.exists():
        trace = io.read_trace(trace_file)
    matrices: list[CombinationMatrix] = []
    if run_dir is not None:
        for path in sorted(run_dir.glob("true_matrix_*.csv")):
            tag = path.stem.split("_")[-1]
            adjacency_path = run_dir / f"true_adjacency_{tag}.csv"
            weights = io.read_matrix(path)
            if adjacency_path.exists():
                adjacency = io.read_adjacency(adjacency_path)
            else:
                adjacency = weights > 0
            matrices.append(CombinationMatrix(weights, adjacency))
    return trace, matrices


def _cmd_learn(args) -> int:
    run_dir = Path(args.run) if args.run else None
    stream = Path(args.stream) if args.stream else None
    model_file = Path(args.model_file) if args.model_file else None
    trace_file = Path(args.trace_file) if args.trace_file else None
    if run_dir is not None:
        stream = stream or run_dir / "beliefs.csv"
        model_file = model_file or run_dir / "model.json"
        trace_file = trace_file or run_dir / "trace.csv"
    if stream is None or model_file is None:
        raise ConfigError("learn needs --run DIR or both --stream and --model-file")
    if not args.out:
        raise ConfigError("an output directory is required (--out)")

    manifest_config: dict = {}
    if run_dir is not None and (run_dir / "manifest.json").exists():
        payload = io.load_json(run_dir / "manifest.json")
        if payload.get("format") == MANIFEST_FORMAT:
            manifest_config = payload["config"]

    delta = args.delta if args.delta is not None else manifest_config.get("delta")
    if delta is None:
        raise ConfigError("learn needs --delta (not found in a manifest)")
    mu = args.mu if args.mu is not None else manifest_config.get("mu", 0.01)
    reference = (
        args.reference if args.reference is not None
        else manifest_config.get("reference", 0)
    )
    mode = args.mode or manifest_config.get("mode", "estimated")
    modes = ("known", "estimated") if mode == "both" else (mode,)

    model = io.load_model(model_file)
    iterations, beliefs = io.read_belief_stream(stream)
    if (beliefs <= 0).any():
        raise ValueError("belief stream contains non-positive values")
    trace, matrices = _load_truth(run_dir, trace_file)
    if trace is not None and len(trace["iterations"]) != len(iterations):
        raise ValueError("trace and belief stream lengths differ")

    def steps(current_mode: str):
        log_beliefs = np.log(beliefs)
        for idx, iteration in enumerate(iterations):
            true_state = None
            combination = None
            if trace is not None:
                true_state = int(trace["true_states"][idx])
                epoch = int(trace["graph_epochs"][idx])
                if epoch < len(matrices):
                    combination = matrices[epoch]
            elif matrices:
                combination = matrices[0]
            if current_mode == "known" and true_state is None:
                raise ConfigError("known mode needs a ground-truth trace")
            yield SimulationStep(
                iteration=int(iteration),
                shared_log_beliefs=log_beliefs[idx],
                true_state=true_state,
                combination=combination,
            )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    diverged = False
    summary: dict = {"modes": {}}
    deviations = {}
    for current_mode in modes:
        result = learn_graph(steps(current_mode), model, mu, delta,
                             mode=current_mode, reference=reference)
        io.write_matrix(out / f"learned_matrix_{current_mode}.csv", result.estimate)
        classify_error = None
        try:
            classified = classify_edges(result.estimate)
            io.write_adjacency(
                out / f"classified_adjacency_{current_mode}.csv", classified
            )
        except NoSeparationError as err:
            classify_error = str(err)
        has_truth = not np.isnan(result.msd).all()
        if has_truth:
            deviations[current_mode] = result.msd
        steady = steady_state_mean(result.msd) if has_truth else None
        summary["modes"][current_mode] = {
            "steady_state_msd": steady,
            "diverged_at": result.diverged_at,
            "classify_error": classify_error,
        }
        diverged = diverged or result.diverged_at is not None
        shown = "n/a" if steady is None else f"{steady:.6g}"
        print(f"{current_mode:9s} steady-state msd {shown}"
              f"{'  DIVERGED' if result.diverged_at else ''}")
    if deviations:
        io.write_msd_table(out / "msd.csv", iterations, deviations, {})
    io.save_json(out / "summary.json", summary)
    print(f"wrote {out}")
    return EXIT_DIVERGED if diverged else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beliefgraph",
        description="Simulate social learning over a hidden network and "
                    "recover the influence graph from the shared beliefs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="forward simulation only")
    _add_config_arguments(p_sim)
    p_sim.set_defaults(handler=_cmd_simulate)

    p_exp = sub.add_parser("experiment", help="end-to-end experiment")
    _add_config_arguments(p_exp)
    p_exp.set_defaults(handler=_cmd_experiment)

    p_sweep = sub.add_parser("sweep", help="grid of experiments over mu/delta")
    _add_config_arguments(p_sweep)
    p_sweep.add_argument("--mu-grid", help="comma-separated mu values")
    p_sweep.add_argument("--delta-grid", help="comma-separated delta values")
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_learn = sub.add_parser("learn", help="estimate the graph from a recorded run")
    p_learn.add_argument("--run", help="directory written by simulate/experiment")
    p_learn.add_argument("--stream", help="belief stream file")
    p_learn.add_argument("--model-file", help="likelihood model JSON")
    p_learn.add_argument("--trace-file", help="ground-truth trace CSV")
    p_learn.add_argument("--mode", choices=["known", "estimated", "both"])
    p_learn.add_argument("--mu", type=float)
    p_learn.add_argument("--delta", type=float)
    p_learn.add_argument("--reference", type=int)
    p_learn.add_argument("--out", help="output directory")
    p_learn.set_defaults(handler=_cmd_learn)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
