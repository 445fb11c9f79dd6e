"""Acceptance suite: one test per shipping criterion.

Each test prints a line with its measured quantities before asserting,
so a verbose run doubles as the experiment log. The heavyweight runs
are shared through module-scoped fixtures.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from beliefgraph.estimator import (
    belief_log_ratios,
    classify_edges,
    gradient_step,
    majority_vote,
)
from beliefgraph.harness import ExperimentConfig, run_experiment
from beliefgraph.model import (
    erdos_renyi_adjacency,
    log_likelihood_ratio_matrix,
    mean_likelihood_matrix,
    random_combination_matrix,
    random_likelihoods,
)
from beliefgraph.simulate import (
    Event,
    EventSchedule,
    run_simulation,
    sample_observations,
)

REFERENCE = dict(
    agents=30, states=4, signals=4, edge_prob=0.2, delta=0.05, mu=0.01,
    true_state=2,
)

DESK = dict(
    agents=10, states=3, signals=4, edge_prob=0.35, delta=0.3,
    true_state=1, seed_graph=21, seed_weights=22, seed_likelihoods=23,
    seed_signals=24, mode="known", test_mode=True,
)


@pytest.fixture(scope="module")
def reference_run():
    """The reference experiment: both estimator variants on the
    30-agent network, 15000 iterations."""
    config = ExperimentConfig(**REFERENCE, iterations=15000, mode="both",
                              test_mode=True)
    start = time.perf_counter()
    result = run_experiment(config)
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def desk_rate_runs():
    """Two long desk-scale runs differing only in the learning rate,
    both reaching their steady-state plateau."""
    base = ExperimentConfig(**DESK, iterations=30000)
    return {
        mu: run_experiment(replace(base, mu=mu))
        for mu in (0.01, 0.005)
    }


def test_criterion_1_ratio_recursion_identity():
    """Consecutive belief-ratio matrices follow the linear recursion in
    the true combination matrix, entrywise within 1e-9, across twenty
    randomly drawn configurations."""
    rng = np.random.default_rng(1000)
    start = time.perf_counter()
    worst = 0.0
    for trial in range(20):
        agents = int(rng.integers(3, 11))
        states = int(rng.integers(2, 6))
        delta = 0.05 if trial % 2 == 0 else 0.3
        edge_prob = float(rng.uniform(0.4, 0.9))
        seed = int(rng.integers(0, 2**31))
        adjacency, _ = erdos_renyi_adjacency(agents, edge_prob, seed)
        combination = random_combination_matrix(adjacency, seed + 1)
        model = random_likelihoods(agents, states, 4, seed + 2)
        prev = np.zeros((agents, states - 1))
        for step in run_simulation(
            model, combination, trial % states, delta, 40, seed + 3,
            record_private=True,
        ):
            ratios = belief_log_ratios(step.shared_log_beliefs)
            predicted = (
                (1 - delta) * combination.weights.T @ prev
                + delta * step.signal_log_ratios
            )
            worst = max(worst, float(np.abs(ratios - predicted).max()))
            prev = ratios
    elapsed = time.perf_counter() - start
    print(f"[criterion 1] max recursion residual {worst:.3e} "
          f"(tolerance 1e-9), runtime {elapsed:.2f}s")
    assert worst <= 1e-9
    assert elapsed < 5.0


def test_criterion_2_sampled_mean_matches_closed_form():
    """The empirical mean of the signal log-ratio matrix over 1e5 draws
    agrees with the KL-difference formula within 0.01, for five models."""
    start = time.perf_counter()
    worst = 0.0
    samples = 100_000
    for seed in (11, 12, 13, 14, 15):
        model = random_likelihoods(6, 3, 4, seed)
        rng = np.random.default_rng(seed + 500)
        counts = np.zeros((6, 4))
        for _ in range(samples):
            counts[np.arange(6), sample_observations(model, 1, rng)] += 1
        empirical = np.zeros((6, 2))
        for z in range(4):
            ratio_for_z = log_likelihood_ratio_matrix(model, np.full(6, z))
            empirical += (counts[:, z] / samples)[:, None] * ratio_for_z
        closed_form = mean_likelihood_matrix(model, 1)
        worst = max(worst, float(np.abs(empirical - closed_form).max()))
    elapsed = time.perf_counter() - start
    print(f"[criterion 2] max |sampled mean - closed form| {worst:.4f} "
          f"(tolerance 0.01), runtime {elapsed:.2f}s")
    assert worst <= 0.01
    assert elapsed < 10.0


def test_criterion_3_update_matches_finite_differences():
    """The estimator update equals the negative gradient of the
    instantaneous loss, checked by central differences on fifty random
    5x5 instances within 1e-6 relative error."""

    def loss(estimate, prev, ratios, expected, delta):
        residual = ratios - (1 - delta) * estimate.T @ prev - delta * expected
        return 0.5 * np.sum(residual**2)

    rng = np.random.default_rng(2000)
    worst = 0.0
    for _ in range(50):
        estimate = rng.standard_normal((5, 5))
        prev = rng.standard_normal((5, 3))
        ratios = rng.standard_normal((5, 3))
        expected = rng.standard_normal((5, 3))
        mu = float(rng.uniform(0.01, 0.2))
        delta = float(rng.uniform(0.05, 0.5))
        stepped = gradient_step(estimate, prev, ratios, expected, mu, delta)
        grad = np.zeros_like(estimate)
        h = 1e-6
        for i in range(5):
            for j in range(5):
                bump = np.zeros_like(estimate)
                bump[i, j] = h
                grad[i, j] = (
                    loss(estimate + bump, prev, ratios, expected, delta)
                    - loss(estimate - bump, prev, ratios, expected, delta)
                ) / (2 * h)
        expected_change = -mu * grad
        actual_change = stepped - estimate
        rel = np.linalg.norm(actual_change - expected_change) / np.linalg.norm(
            expected_change
        )
        worst = max(worst, float(rel))
    print(f"[criterion 3] max relative gradient error {worst:.3e} "
          f"(tolerance 1e-6)")
    assert worst <= 1e-6


def test_criterion_4_reference_run_convergence(reference_run):
    """On the 30-agent reference setup the deviation must fall to 1% of
    its initial value within 15000 iterations, with the known-state and
    estimated-state variants ending within 10% of each other."""
    result, elapsed = reference_run
    window = 1000
    final_known = float(result.modes["known"].msd[-window:].mean())
    final_estimated = float(result.modes["estimated"].msd[-window:].mean())
    gap = abs(final_known - final_estimated) / final_known
    ratio = final_known / result.initial_msd
    print(f"[criterion 4] initial msd {result.initial_msd:.4f}, "
          f"final-window known {final_known:.4f} / estimated "
          f"{final_estimated:.4f}, mode gap {gap:.4%}, "
          f"final/initial {ratio:.4%} (target <= 1%), "
          f"runtime {elapsed:.1f}s")
    assert elapsed < 60.0
    assert gap <= 0.10
    assert ratio <= 0.01, (
        f"final-window msd is {ratio:.2%} of the initial msd; with this "
        f"step size the off-consensus excitation scales with delta^2, "
        f"which makes the slowest error directions decay far beyond "
        f"15000 iterations (see the long-run edge-recovery criterion)"
    )


def test_reference_run_deviation_trend(reference_run):
    """Windowed deviation averages on the reference run never regress
    by more than 5% between consecutive 500-iteration windows."""
    result, _ = reference_run
    windows = result.modes["known"].msd.reshape(-1, 500).mean(axis=1)
    regressions = windows[1:] / windows[:-1]
    print(f"[invariant] worst window-to-window deviation regression "
          f"{regressions.max():.4f} (limit 1.05)")
    assert (regressions <= 1.05).all()


def test_criterion_5_rate_scaling_and_bound(desk_rate_runs, reference_run):
    """Halving the learning rate halves the steady-state deviation
    (ratio within [1.4, 2.6]), and measured plateaus stay below the
    diagnostic bound."""
    fast = desk_rate_runs[0.01].modes["known"]
    slow = desk_rate_runs[0.005].modes["known"]
    ratio = fast.steady_state_msd / slow.steady_state_msd
    print(f"[criterion 5] steady-state msd {fast.steady_state_msd:.5f} "
          f"(mu=0.01) vs {slow.steady_state_msd:.5f} (mu=0.005), "
          f"ratio {ratio:.3f} (target [1.4, 2.6])")
    assert 1.4 <= ratio <= 2.6
    for mu, run in sorted(desk_rate_runs.items()):
        diag = run.diagnostics
        measured = run.modes["known"].steady_state_msd
        print(f"[criterion 5] mu={mu}: measured {measured:.5f} <= "
              f"bound {diag.bound:.4f} (stable={diag.stable})")
        assert diag.stable
        assert measured <= diag.bound
    reference_result, _ = reference_run
    reference_diag = reference_result.diagnostics
    reference_measured = reference_result.modes["known"].steady_state_msd
    print(f"[criterion 5] reference setup: measured {reference_measured:.4f} "
          f"<= bound {reference_diag.bound:.4f}")
    assert reference_measured <= reference_diag.bound


def test_criterion_6_adapts_to_graph_regeneration():
    """Regenerating the graph mid-run makes the deviation jump by more
    than 10x the pre-event plateau, decay roughly exponentially
    (log-linear fit R^2 >= 0.8) and settle within 2x of the old
    plateau."""
    event_iteration = 15000
    config = ExperimentConfig(
        **{**DESK, "test_mode": False}, mu=0.01, iterations=30000,
        schedule=EventSchedule((Event(event_iteration, "regenerate_graph", 900),)),
    )
    trajectory = run_experiment(config).modes["known"].msd
    event_idx = event_iteration - 1
    pre = float(trajectory[13000:event_idx].mean())
    spike = float(trajectory[event_idx:event_idx + 100].max())
    final = float(trajectory[-1000:].mean())

    start = event_idx + 5
    below = np.nonzero(trajectory[start:] <= 2 * final)[0]
    stop = start + int(below[0]) if below.size else trajectory.shape[0]
    segment = trajectory[start:stop]
    assert segment.size >= 50
    x = np.arange(segment.size, dtype=float)
    design = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(design, np.log(segment), rcond=None)
    fitted = design @ coef
    residual = np.log(segment) - fitted
    r_squared = 1.0 - residual.var() / np.log(segment).var()

    print(f"[criterion 6] pre-event plateau {pre:.5f}, post-event peak "
          f"{spike:.4f} ({spike / pre:.0f}x), final window {final:.5f} "
          f"({final / pre:.2f}x), decay fit R^2 {r_squared:.3f} over "
          f"{segment.size} points")
    assert spike >= 10 * pre
    assert final <= 2 * pre
    assert r_squared >= 0.8


def test_criterion_7_edge_recovery_on_converged_run():
    """Two-cluster classification of the learned weights against the
    true adjacency, on the reference setup run to convergence. The
    achieved accuracy is recorded below."""
    config = ExperimentConfig(**REFERENCE, iterations=100000, mode="known")
    result = run_experiment(config)
    mres = result.modes["known"]
    edges = classify_edges(mres.estimate, "two-means")
    accuracy = float((edges == result.final_combination.adjacency).mean())
    tail = float(mres.msd[-1000:].mean())
    print(f"[criterion 7] achieved two-means edge accuracy {accuracy:.4f} "
          f"(target >= 0.95); converged deviation {tail:.4f} "
          f"({tail / result.initial_msd:.3%} of initial)")
    assert accuracy >= 0.95, (
        f"two-means accuracy is {accuracy:.4f}: the smallest true "
        f"weights of a column-normalized uniform draw fall below any "
        f"two-cluster boundary of the pooled entries, so they are "
        f"classified as non-edges even from a converged estimate"
    )


def test_criterion_8_majority_vote_finds_truth():
    """Across five seeded worlds, the network majority vote equals the
    true hypothesis in at least 99% of the last 1000 of 2000
    iterations."""
    rates = []
    for s in range(5):
        adjacency, _ = erdos_renyi_adjacency(30, 0.2, 100 + s)
        combination = random_combination_matrix(adjacency, 200 + s)
        model = random_likelihoods(30, 4, 4, 300 + s)
        votes = [
            majority_vote(step.shared_log_beliefs)
            for step in run_simulation(model, combination, 2, 0.05, 2000, 400 + s)
        ]
        rates.append(float(np.mean(np.array(votes[-1000:]) == 2)))
    mean_rate = float(np.mean(rates))
    print(f"[criterion 8] vote accuracy per seed {rates}, mean "
          f"{mean_rate:.4f} (target >= 0.99)")
    assert mean_rate >= 0.99


def test_criterion_9_manifest_determinism(tmp_path):
    """Re-running a manifest reproduces every artifact byte for byte."""
    first = tmp_path / "first"
    config = ExperimentConfig(
        agents=6, states=3, signals=3, edge_prob=0.5, delta=0.3, mu=0.05,
        iterations=250, true_state=1, test_mode=True,
        schedule=EventSchedule((Event(100, "set_true_state", 2),)),
        out=str(first),
    )
    run_experiment(config)
    manifest = __import__("json").loads((first / "manifest.json").read_text())
    second = tmp_path / "second"
    run_experiment(ExperimentConfig.from_dict(manifest["config"], out=str(second)))
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    mismatched = [
        name for name in names
        if (first / name).read_bytes() != (second / name).read_bytes()
    ]
    print(f"[criterion 9] {len(names)} files compared, "
          f"{len(mismatched)} mismatched")
    assert mismatched == []
