"""Reproducible end-to-end experiments and parameter sweeps.

An experiment generates the hidden network and observation models from
named seeds, runs the forward protocol, feeds the public belief stream
to the requested estimator variants and persists every artifact along
with a manifest echoing the full configuration. Re-running a manifest
reproduces each output file byte for byte; the output directory itself
is not part of the manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .estimator import (
    ESTIMATED,
    KNOWN,
    GraphLearner,
    NoSeparationError,
    SteadyStateDiagnostics,
    belief_log_ratios,
    classify_edges,
    msd,
    steady_state_diagnostics,
)
from .model import (
    CombinationMatrix,
    LikelihoodModel,
    erdos_renyi_adjacency,
    mean_likelihood_matrix,
    random_combination_matrix,
    random_likelihoods,
)
from .simulate import Event, EventSchedule, run_simulation

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ModeResult",
    "ExperimentResult",
    "run_experiment",
    "run_forward",
    "sweep",
    "steady_state_mean",
    "MANIFEST_FORMAT",
]

MANIFEST_FORMAT = "beliefgraph-manifest-v1"

MODES = (KNOWN, ESTIMATED)


class ConfigError(ValueError):
    """An experiment configuration violates its invariants."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, explicit description of one experiment.

    Every random choice is pinned by one of the named seeds, so a
    configuration identifies its outputs exactly. ``mode`` selects
    which estimator variants run: ``"known"``, ``"estimated"`` or
    ``"both"``. ``out`` is the output directory; with ``None`` the
    experiment runs in memory only.
    """

    agents: int = 30
    states: int = 4
    signals: int | tuple[int, ...] = 4
    edge_prob: float = 0.2
    delta: float = 0.05
    mu: float = 0.01
    iterations: int = 15000
    seed_graph: int = 0
    seed_weights: int = 1
    seed_likelihoods: int = 2
    seed_signals: int = 3
    mode: str = "both"
    true_state: int = 0
    reference: int = 0
    schedule: EventSchedule = field(default_factory=EventSchedule)
    test_mode: bool = False
    likelihood_floor: float = 0.01
    kl_floor: float = 1e-3
    max_attempts: int = 1000
    classify_method: str = "two-means"
    classify_threshold: float | None = None
    out: str | None = None

    def modes(self) -> tuple[str, ...]:
        return MODES if self.mode == "both" else (self.mode,)

    def validate(self) -> None:
        problems = []
        if self.agents < 1:
            problems.append("agents must be at least 1")
        if self.states < 2:
            problems.append("states must be at least 2")
        sizes = (
            (self.signals,) * max(self.agents, 1)
            if np.isscalar(self.signals)
            else tuple(self.signals)
        )
        if not np.isscalar(self.signals) and len(sizes) != self.agents:
            problems.append("signals must be a scalar or one size per agent")
        if sizes and min(sizes) < 2:
            problems.append("signal spaces need at least two outcomes")
        if not 0 < self.edge_prob <= 1:
            problems.append("edge_prob must be in (0, 1]")
        if not 0 < self.delta < 1:
            problems.append("delta must be in (0, 1)")
        if self.mu <= 0:
            problems.append("mu must be positive")
        if self.iterations < 1:
            problems.append("iterations must be at least 1")
        for name in ("seed_graph", "seed_weights", "seed_likelihoods", "seed_signals"):
            if not isinstance(getattr(self, name), int):
                problems.append(f"{name} must be an explicit integer")
        if self.mode not in ("known", "estimated", "both"):
            problems.append("mode must be known, estimated or both")
        if not 0 <= self.true_state < self.states:
            problems.append("true_state out of range")
        if not 0 <= self.reference < self.states:
            problems.append("reference out of range")
        if self.likelihood_floor <= 0:
            problems.append("likelihood_floor must be positive")
        elif sizes and self.likelihood_floor * max(sizes) >= 1:
            problems.append("likelihood_floor too large for the signal space")
        if self.kl_floor <= 0:
            problems.append("kl_floor must be positive")
        if self.max_attempts < 1:
            problems.append("max_attempts must be at least 1")
        if self.classify_method not in ("two-means", "threshold"):
            problems.append("classify_method must be two-means or threshold")
        if self.classify_method == "threshold" and self.classify_threshold is None:
            problems.append("threshold classification needs classify_threshold")
        for event in self.schedule:
            if event.iteration > self.iterations:
                problems.append(
                    f"event at iteration {event.iteration} is beyond the run"
                )
            if event.action == "set_true_state" and not 0 <= event.value < self.states:
                problems.append(f"event state {event.value} out of range")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict:
        """JSON-ready mapping of all fields except the output directory."""
        payload = {}
        for f in fields(self):
            if f.name == "out":
                continue
            value = getattr(self, f.name)
            if f.name == "schedule":
                value = [
                    {"iteration": e.iteration, "action": e.action, "value": e.value}
                    for e in value
                ]
            elif isinstance(value, tuple):
                value = list(value)
            payload[f.name] = value
        return payload

    @classmethod
    def from_dict(cls, payload: dict, out: str | None = None) -> "ExperimentConfig":
        """Build a configuration from a mapping (a config file or the
        ``config`` section of a manifest)."""
        payload = dict(payload)
        payload.pop("out", None)
        known_names = {f.name for f in fields(cls)}
        unknown = set(payload) - known_names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "schedule" in payload:
            payload["schedule"] = EventSchedule(
                tuple(
                    Event(int(e["iteration"]), str(e["action"]), int(e["value"]))
                    for e in payload["schedule"]
                )
            )
        if isinstance(payload.get("signals"), list):
            payload["signals"] = tuple(payload["signals"])
        return cls(out=out, **payload)


def steady_state_mean(values: np.ndarray) -> float:
    """Mean over the final tenth of a trajectory (at least one point)."""
    values = np.asarray(values, dtype=float)
    window = max(1, values.shape[0] // 10)
    return float(values[-window:].mean())


@dataclass
class ModeResult:
    """Estimator outcome for one variant."""

    mode: str
    estimate: np.ndarray
    msd: np.ndarray
    votes: np.ndarray | None
    diverged_at: int | None
    steady_state_msd: float
    final_msd: float
    classified: np.ndarray | None
    edge_accuracy: float | None
    classify_error: str | None


@dataclass
class ExperimentResult:
    """Everything produced by one experiment."""

    config: ExperimentConfig
    model: LikelihoodModel
    combination: CombinationMatrix
    final_combination: CombinationMatrix
    initial_msd: float
    graph_attempts: int
    modes: dict[str, ModeResult]
    true_states: np.ndarray
    graph_epochs: np.ndarray
    diagnostics: SteadyStateDiagnostics | None
    out_dir: Path | None

    @property
    def divergent(self) -> bool:
        return any(m.diverged_at is not None for m in self.modes.values())

    @property
    def vote_match_rate(self) -> float | None:
        est = self.modes.get(ESTIMATED)
        if est is None or est.votes is None:
            return None
        return float((est.votes == self.true_states).mean())


def _diagnostics_payload(diag: SteadyStateDiagnostics | None):
    if diag is None:
        return None
    return {
        "alpha": diag.alpha,
        "gamma": diag.gamma,
        "nu": diag.nu,
        "kappa": diag.kappa,
        "bound": diag.bound,
        "stable": diag.stable,
        "samples": diag.samples,
        "ratio_second_moment": diag.ratio_second_moment.tolist(),
        "signal_covariance": diag.signal_covariance.tolist(),
    }


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Generate, simulate, learn and persist one full experiment.

    The observer variants see only the shared belief stream and the
    likelihood model; private signals are recorded (to the ratio stream
    file and for the steady-state diagnostics) only when
    ``config.test_mode`` is set.
    """
    config.validate()
    out = Path(config.out) if config.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    adjacency, graph_attempts = erdos_renyi_adjacency(
        config.agents, config.edge_prob, config.seed_graph, config.max_attempts
    )
    combination = random_combination_matrix(adjacency, config.seed_weights)
    model = random_likelihoods(
        config.agents,
        config.states,
        config.signals,
        config.seed_likelihoods,
        floor=config.likelihood_floor,
        kl_floor=config.kl_floor,
        max_attempts=config.max_attempts,
    )
    initial_msd = float(np.sum(combination.weights**2))

    modes = config.modes()
    learners = {m: GraphLearner(model, config.mu, config.delta, m, config.reference) for m in modes}
    T = config.iterations
    deviations = {m: np.empty(T) for m in modes}
    votes = np.empty(T, dtype=int) if ESTIMATED in modes else None
    true_states = np.empty(T, dtype=int)
    graph_epochs = np.empty(T, dtype=int)
    events_seen: dict[int, str] = {}

    stationary_start = max(1, config.schedule.last_iteration())
    collect_diag = config.test_mode
    lam_samples: list[np.ndarray] = []
    sig_samples: list[np.ndarray] = []

    belief_writer = io.BeliefStreamWriter(out / "beliefs.csv") if out else None
    ratio_writer = (
        io.RatioStreamWriter(out / "private_ratios.csv")
        if out and config.test_mode
        else None
    )
    written_epochs: set[int] = set()
    final_combination = combination

    try:
        steps = run_simulation(
            model,
            combination,
            config.true_state,
            config.delta,
            T,
            config.seed_signals,
            schedule=config.schedule,
            record_private=config.test_mode,
            edge_prob=config.edge_prob,
            regen_max_attempts=config.max_attempts,
            reference=config.reference,
        )
        for step in steps:
            i = step.iteration
            if step.event:
                events_seen[i] = step.event
            if out is not None and step.graph_epoch not in written_epochs:
                tag = f"{step.graph_epoch:03d}"
                io.write_matrix(out / f"true_matrix_{tag}.csv", step.combination.weights)
                io.write_adjacency(
                    out / f"true_adjacency_{tag}.csv", step.combination.adjacency
                )
                written_epochs.add(step.graph_epoch)
            if belief_writer is not None:
                belief_writer.append(i, step.shared_log_beliefs)
            if ratio_writer is not None:
                ratio_writer.append(i, step.signal_log_ratios)
            true_states[i - 1] = step.true_state
            graph_epochs[i - 1] = step.graph_epoch
            final_combination = step.combination
            for mode in modes:
                learner = learners[mode]
                estimate = learner.step(step.shared_log_beliefs, step.true_state)
                if learner.diverged_at is not None:
                    deviations[mode][i - 1] = np.inf
                else:
                    deviations[mode][i - 1] = msd(step.combination.weights, estimate)
                if mode == ESTIMATED:
                    votes[i - 1] = learner.last_vote
            if collect_diag and i >= stationary_start:
                lam_samples.append(
                    belief_log_ratios(step.shared_log_beliefs, config.reference)
                )
                sig_samples.append(step.signal_log_ratios)
    finally:
        if belief_writer is not None:
            belief_writer.close()
        if ratio_writer is not None:
            ratio_writer.close()

    diagnostics = None
    if collect_diag and lam_samples:
        expected = mean_likelihood_matrix(model, int(true_states[-1]), config.reference)
        try:
            diagnostics = steady_state_diagnostics(
                np.array(lam_samples),
                np.array(sig_samples),
                expected,
                config.mu,
                config.delta,
            )
        except ValueError:
            diagnostics = None  # run too short for moment estimates

    mode_results: dict[str, ModeResult] = {}
    for mode in modes:
        learner = learners[mode]
        classified = None
        classify_error = None
        edge_accuracy = None
        try:
            classified = classify_edges(
                learner.estimate, config.classify_method, config.classify_threshold
            )
            edge_accuracy = float(
                (classified == final_combination.adjacency).mean()
            )
        except NoSeparationError as err:
            classify_error = str(err)
        mode_results[mode] = ModeResult(
            mode=mode,
            estimate=learner.estimate,
            msd=deviations[mode],
            votes=votes if mode == ESTIMATED else None,
            diverged_at=learner.diverged_at,
            steady_state_msd=steady_state_mean(deviations[mode]),
            final_msd=float(deviations[mode][-1]),
            classified=classified,
            edge_accuracy=edge_accuracy,
            classify_error=classify_error,
        )

    result = ExperimentResult(
        config=config,
        model=model,
        combination=combination,
        final_combination=final_combination,
        initial_msd=initial_msd,
        graph_attempts=graph_attempts,
        modes=mode_results,
        true_states=true_states,
        graph_epochs=graph_epochs,
        diagnostics=diagnostics,
        out_dir=out,
    )

    if out is not None:
        io.save_model(out / "model.json", model)
        io.write_trace(
            out / "trace.csv",
            np.arange(1, T + 1),
            true_states,
            graph_epochs,
            events_seen,
        )
        io.write_msd_table(
            out / "msd.csv",
            np.arange(1, T + 1),
            {m: deviations[m] for m in modes},
            events_seen,
        )
        for mode, mres in mode_results.items():
            io.write_matrix(out / f"learned_matrix_{mode}.csv", mres.estimate)
            if mres.classified is not None:
                io.write_adjacency(
                    out / f"classified_adjacency_{mode}.csv", mres.classified
                )
        io.save_json(out / "manifest.json", {
            "format": MANIFEST_FORMAT,
            "config": config.to_dict(),
        })
        summary = {
            "initial_msd": initial_msd,
            "graph_attempts": graph_attempts,
            "divergent": result.divergent,
            "vote_match_rate": result.vote_match_rate,
            "modes": {
                mode: {
                    "final_msd": mres.final_msd,
                    "steady_state_msd": mres.steady_state_msd,
                    "diverged_at": mres.diverged_at,
                    "edge_accuracy": mres.edge_accuracy,
                    "classify_error": mres.classify_error,
                }
                for mode, mres in mode_results.items()
            },
            "diagnostics": _diagnostics_payload(diagnostics),
        }
        io.save_json(out / "summary.json", summary)

    return result


def run_forward(config: ExperimentConfig) -> Path:
    """Run and persist the forward simulation only.

    Writes the manifest, the likelihood model, the true matrices per
    graph epoch, the public belief stream and the ground-truth trace
    (plus the private ratio stream in test mode) to ``config.out``,
    which is required here. Returns the output directory.
    """
    config.validate()
    if not config.out:
        raise ConfigError("a forward run needs an output directory")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    adjacency, _ = erdos_renyi_adjacency(
        config.agents, config.edge_prob, config.seed_graph, config.max_attempts
    )
    combination = random_combination_matrix(adjacency, config.seed_weights)
    model = random_likelihoods(
        config.agents,
        config.states,
        config.signals,
        config.seed_likelihoods,
        floor=config.likelihood_floor,
        kl_floor=config.kl_floor,
        max_attempts=config.max_attempts,
    )

    T = config.iterations
    true_states = np.empty(T, dtype=int)
    graph_epochs = np.empty(T, dtype=int)
    events_seen: dict[int, str] = {}
    written_epochs: set[int] = set()
    ratio_writer = (
        io.RatioStreamWriter(out / "private_ratios.csv") if config.test_mode else None
    )
    try:
        with io.BeliefStreamWriter(out / "beliefs.csv") as belief_writer:
            for step in run_simulation(
                model,
                combination,
                config.true_state,
                config.delta,
                T,
                config.seed_signals,
                schedule=config.schedule,
                record_private=config.test_mode,
                edge_prob=config.edge_prob,
                regen_max_attempts=config.max_attempts,
                reference=config.reference,
            ):
                i = step.iteration
                if step.event:
                    events_seen[i] = step.event
                if step.graph_epoch not in written_epochs:
                    tag = f"{step.graph_epoch:03d}"
                    io.write_matrix(
                        out / f"true_matrix_{tag}.csv", step.combination.weights
                    )
                    io.write_adjacency(
                        out / f"true_adjacency_{tag}.csv", step.combination.adjacency
                    )
                    written_epochs.add(step.graph_epoch)
                belief_writer.append(i, step.shared_log_beliefs)
                if ratio_writer is not None:
                    ratio_writer.append(i, step.signal_log_ratios)
                true_states[i - 1] = step.true_state
                graph_epochs[i - 1] = step.graph_epoch
    finally:
        if ratio_writer is not None:
            ratio_writer.close()

    io.save_model(out / "model.json", model)
    io.write_trace(
        out / "trace.csv", np.arange(1, T + 1), true_states, graph_epochs, events_seen
    )
    io.save_json(out / "manifest.json", {
        "format": MANIFEST_FORMAT,
        "config": config.to_dict(),
    })
    return out


def sweep(
    config: ExperimentConfig,
    mu_values=None,
    delta_values=None,
) -> list[dict]:
    """Run one experiment per grid point over ``mu`` and/or ``delta``.

    Each grid point reruns the base configuration, in memory, with the
    substituted parameters; the steady-state deviation is the mean over
    the final tenth of each trajectory. Rows come back sorted by
    (mu, delta, mode) and are written to ``sweep.csv`` under the base
    configuration's output directory, when one is set.

    Per-run failures are re-raised with the offending grid point named.
    Divergent runs are flagged in their row, not raised.
    """
    config.validate()
    mu_list = (
        [config.mu] if mu_values is None
        else sorted(set(float(m) for m in mu_values))
    )
    delta_list = (
        [config.delta] if delta_values is None
        else sorted(set(float(d) for d in delta_values))
    )
    if not mu_list or not delta_list:
        raise ConfigError("the sweep grid is empty")

    rows: list[dict] = []
    for mu in mu_list:
        for delta in delta_list:
            point = replace(config, mu=mu, delta=delta, out=None)
            try:
                result = run_experiment(point)
            except Exception as err:
                raise RuntimeError(
                    f"grid point mu={mu}, delta={delta} failed: {err}"
                ) from err
            for mode in sorted(result.modes):
                mres = result.modes[mode]
                rows.append({
                    "mu": mu,
                    "delta": delta,
                    "mode": mode,
                    "steady_state_msd": mres.steady_state_msd,
                    "divergent": mres.diverged_at is not None,
                })

    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["mu,delta,mode,steady_state_msd,divergent"]
        for row in rows:
            lines.append(
                f"{row['mu']:.17g},{row['delta']:.17g},{row['mode']},"
                f"{row['steady_state_msd']:.17g},{int(row['divergent'])}"
            )
        (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    return rows
