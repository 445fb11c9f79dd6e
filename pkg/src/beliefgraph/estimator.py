"""Online recovery of the combination matrix from shared beliefs.

Writing ``lam_i`` for the matrix of log-ratios of the shared beliefs
against a reference hypothesis and ``lbar_i`` for the expected
log-likelihood ratio matrix, consecutive snapshots of the forward
protocol satisfy a linear recursion in the (unknown, transposed)
combination matrix. The estimator runs stochastic gradient descent on
the instantaneous squared residual of that recursion,

    Q(A) = 0.5 * || lam_i - (1-delta) A^T lam_{i-1} - delta lbar_i ||_F^2,

one update per received snapshot. The expected ratios require the true
hypothesis, which is either supplied (``known`` mode) or estimated from
the same snapshot by a majority vote (``estimated`` mode).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import LikelihoodModel, mean_likelihood_matrix, ratio_columns

__all__ = [
    "NoSeparationError",
    "belief_log_ratios",
    "majority_vote",
    "gradient_step",
    "GraphLearner",
    "LearnResult",
    "learn_graph",
    "msd",
    "classify_edges",
    "two_means_split",
    "SteadyStateDiagnostics",
    "steady_state_diagnostics",
]

# Estimates this far outside the stochastic-matrix range carry no
# information any more; the learner freezes and flags divergence.
DIVERGENCE_LIMIT = 1e6

KNOWN = "known"
ESTIMATED = "estimated"


class NoSeparationError(RuntimeError):
    """Two-cluster edge classification found no separation."""


def belief_log_ratios(shared_log_beliefs: np.ndarray, reference: int = 0) -> np.ndarray:
    """Log-ratios of each agent's shared belief against the reference
    hypothesis, shape ``(num_agents, num_states - 1)``.

    Entry ``(k, j)`` is ``log b_k(reference) - log b_k(other_j)`` with
    the non-reference hypotheses enumerated ascending. This is the
    observer's state variable; it is computable from public data alone.
    """
    shared_log_beliefs = np.asarray(shared_log_beliefs)
    cols = ratio_columns(shared_log_beliefs.shape[1], reference)
    return shared_log_beliefs[:, [reference]] - shared_log_beliefs[:, cols]


def majority_vote(shared_log_beliefs: np.ndarray) -> int:
    """Network-level hypothesis estimate: the most common per-agent
    argmax. Ties, per agent and across agents, go to the lowest index."""
    shared_log_beliefs = np.asarray(shared_log_beliefs)
    per_agent = np.argmax(shared_log_beliefs, axis=1)
    counts = np.bincount(per_agent, minlength=shared_log_beliefs.shape[1])
    return int(np.argmax(counts))


def gradient_step(
    estimate: np.ndarray,
    prev_ratios: np.ndarray,
    ratios: np.ndarray,
    expected_ratios: np.ndarray,
    mu: float,
    delta: float,
) -> np.ndarray:
    """One stochastic-gradient update of the combination-matrix estimate.

    Returns ``A`` with ``A^T = estimate^T + mu * (1 - delta) *
    (ratios - (1 - delta) * estimate^T @ prev_ratios - delta *
    expected_ratios) @ prev_ratios^T``, the exact negative gradient step
    of the instantaneous loss ``Q``. No projection is applied; the
    iterate is free to leave the set of stochastic matrices.
    """
    estimate = np.asarray(estimate, dtype=float)
    prev_ratios = np.asarray(prev_ratios, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    expected_ratios = np.asarray(expected_ratios, dtype=float)
    n = estimate.shape[0]
    if estimate.shape != (n, n) or prev_ratios.shape != ratios.shape \
            or expected_ratios.shape != ratios.shape or ratios.shape[0] != n:
        raise ValueError("estimate and ratio matrices have mismatched shapes")
    scale = 1.0 - delta
    residual = ratios - scale * (estimate.T @ prev_ratios) - delta * expected_ratios
    return estimate + mu * scale * (prev_ratios @ residual.T)


@dataclass
class GraphLearner:
    """Sequential state of the online graph estimator.

    The estimate starts at the zero matrix and the previous-ratio
    register at zero, which makes the very first update a no-op. In
    ``known`` mode each step must be told the current true hypothesis;
    in ``estimated`` mode the learner votes on the snapshot itself.
    Expected-ratio matrices are cached per hypothesis, so re-voting the
    same state costs nothing.

    When an update stops being finite (or leaves ``DIVERGENCE_LIMIT``),
    the learner keeps its last good estimate, records the iteration in
    ``diverged_at`` and ignores further steps.
    """

    model: LikelihoodModel
    mu: float
    delta: float
    mode: str
    reference: int = 0
    estimate: np.ndarray = field(init=False)
    prev_ratios: np.ndarray = field(init=False)
    iterations: int = field(init=False, default=0)
    diverged_at: int | None = field(init=False, default=None)
    last_vote: int | None = field(init=False, default=None)

    def __post_init__(self):
        if self.mode not in (KNOWN, ESTIMATED):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        n = self.model.num_agents
        self.estimate = np.zeros((n, n))
        self.prev_ratios = np.zeros((n, self.model.num_states - 1))
        self._expected_cache: dict[int, np.ndarray] = {}

    def expected_ratios(self, state: int) -> np.ndarray:
        if state not in self._expected_cache:
            self._expected_cache[state] = mean_likelihood_matrix(
                self.model, state, self.reference
            )
        return self._expected_cache[state]

    def step(self, shared_log_beliefs: np.ndarray, true_state: int | None = None) -> np.ndarray:
        """Consume one belief snapshot and return the updated estimate."""
        self.iterations += 1
        ratios = belief_log_ratios(shared_log_beliefs, self.reference)
        if self.diverged_at is not None:
            self.prev_ratios = ratios
            return self.estimate
        if self.mode == KNOWN:
            if true_state is None:
                raise ValueError("known mode needs the current true state")
            state = int(true_state)
        else:
            state = majority_vote(shared_log_beliefs)
            self.last_vote = state
        with np.errstate(over="ignore", invalid="ignore"):
            updated = gradient_step(
                self.estimate, self.prev_ratios, ratios,
                self.expected_ratios(state), self.mu, self.delta,
            )
        if not np.isfinite(updated).all() or np.abs(updated).max() > DIVERGENCE_LIMIT:
            self.diverged_at = self.iterations
        else:
            self.estimate = updated
        self.prev_ratios = ratios
        return self.estimate


@dataclass
class LearnResult:
    """Outcome of feeding a belief stream through one learner."""

    mode: str
    estimate: np.ndarray
    msd: np.ndarray
    votes: np.ndarray | None
    diverged_at: int | None
    iterations: int


def learn_graph(
    steps,
    model: LikelihoodModel,
    mu: float,
    delta: float,
    mode: str = ESTIMATED,
    reference: int = 0,
) -> LearnResult:
    """Run a learner over an iterable of simulation steps.

    Only each step's shared beliefs (plus, in ``known`` mode, its true
    state) are consumed. When a step carries the governing combination
    matrix the squared deviation from it is recorded, otherwise NaN.
    After a divergence the deviation is reported as ``inf``.
    """
    learner = GraphLearner(model, mu, delta, mode, reference)
    deviations = []
    votes = [] if mode == ESTIMATED else None
    for step in steps:
        estimate = learner.step(step.shared_log_beliefs, step.true_state)
        if votes is not None:
            votes.append(learner.last_vote)
        if learner.diverged_at is not None:
            deviations.append(np.inf)
        elif step.combination is not None:
            deviations.append(msd(step.combination.weights, estimate))
        else:
            deviations.append(np.nan)
    return LearnResult(
        mode=mode,
        estimate=learner.estimate,
        msd=np.asarray(deviations),
        votes=None if votes is None else np.asarray(votes),
        diverged_at=learner.diverged_at,
        iterations=learner.iterations,
    )


def msd(true_matrix: np.ndarray, estimate: np.ndarray) -> float:
    """Squared Frobenius norm of the estimation error."""
    true_matrix = np.asarray(true_matrix, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if true_matrix.shape != estimate.shape:
        raise ValueError("matrices must have identical shapes")
    diff = true_matrix - estimate
    return float(np.sum(diff * diff))


def two_means_split(values: np.ndarray, max_iterations: int = 100) -> float:
    """Boundary of the two-cluster split of scalar values.

    Plain Lloyd iteration with centers initialized at the minimum and
    maximum; returns the midpoint between the final centers, so that
    ``value > boundary`` selects the upper cluster.

    Raises
    ------
    NoSeparationError
        If all values coincide, or a cluster empties out.
    """
    values = np.asarray(values, dtype=float).ravel()
    low, high = float(values.min()), float(values.max())
    if low == high:
        raise NoSeparationError("all values are identical")
    for _ in range(max_iterations):
        upper = np.abs(values - high) < np.abs(values - low)
        if not upper.any() or upper.all():
            raise NoSeparationError("a cluster emptied out")
        new_low = float(values[~upper].mean())
        new_high = float(values[upper].mean())
        if new_low == low and new_high == high:
            break
        low, high = new_low, new_high
    return 0.5 * (low + high)


def classify_edges(
    estimate: np.ndarray,
    method: str = "two-means",
    threshold: float | None = None,
) -> np.ndarray:
    """Turn a learned weight matrix into a boolean adjacency estimate.

    ``method="threshold"`` marks entries strictly above ``threshold``.
    ``method="two-means"`` clusters all entries into two groups and
    marks the upper one; it raises :class:`NoSeparationError` on
    degenerate input.
    """
    estimate = np.asarray(estimate, dtype=float)
    if not np.isfinite(estimate).all():
        raise ValueError("estimate must be finite")
    if method == "threshold":
        if threshold is None:
            raise ValueError("threshold method needs a threshold")
        return estimate > threshold
    if method == "two-means":
        return estimate > two_means_split(estimate)
    raise ValueError(f"unknown classification method {method!r}")


@dataclass(frozen=True)
class SteadyStateDiagnostics:
    """Empirical ingredients of the steady-state error bound.

    ``ratio_second_moment`` is the second-moment matrix of the belief
    log-ratios over the steady-state tail; ``signal_covariance`` the
    covariance of the signal log-ratios around their exact mean. From
    their extreme eigenvalues: ``nu <= kappa``, the per-step contraction
    ``alpha = 1 - 2 mu nu`` (higher-order terms dropped) and the noise
    level ``gamma``. The bound ``mu^2 gamma / (1 - alpha)`` is O(mu)
    and only meaningful while ``stable`` is set.
    """

    alpha: float
    gamma: float
    nu: float
    kappa: float
    signal_covariance: np.ndarray
    ratio_second_moment: np.ndarray
    bound: float
    stable: bool
    samples: int


def steady_state_diagnostics(
    belief_ratio_samples: np.ndarray,
    signal_ratio_samples: np.ndarray,
    expected_ratios: np.ndarray,
    mu: float,
    delta: float,
    burn_in_fraction: float = 0.2,
    min_samples: int = 1000,
) -> SteadyStateDiagnostics:
    """Estimate the steady-state deviation bound from sampled streams.

    Both sample stacks have shape ``(samples, num_agents,
    num_states - 1)`` and must come from a stationary stretch of a run;
    the first ``burn_in_fraction`` of each is discarded. The signal
    ratios are private data, so this is a validation tool rather than
    part of the observer pipeline.

    Raises
    ------
    ValueError
        If fewer than ``min_samples`` samples remain after burn-in.
    """
    lam = np.asarray(belief_ratio_samples, dtype=float)
    sig = np.asarray(signal_ratio_samples, dtype=float)
    if lam.ndim != 3 or sig.ndim != 3:
        raise ValueError("sample stacks must be 3-dimensional")
    lam = lam[int(burn_in_fraction * lam.shape[0]):]
    sig = sig[int(burn_in_fraction * sig.shape[0]):]
    if min(lam.shape[0], sig.shape[0]) < min_samples:
        raise ValueError(
            f"need at least {min_samples} samples after burn-in, have "
            f"{min(lam.shape[0], sig.shape[0])}"
        )
    num_agents = lam.shape[1]
    ratio_moment = np.einsum("mij,mkj->ik", lam, lam) / lam.shape[0]
    centered = sig - np.asarray(expected_ratios)
    signal_cov = np.einsum("mij,mkj->ik", centered, centered) / centered.shape[0]

    scale = (1.0 - delta) ** 2
    ratio_eigs = np.linalg.eigvalsh(ratio_moment)
    nu = scale * float(ratio_eigs[0])
    kappa = scale * float(ratio_eigs[-1])
    alpha = 1.0 - 2.0 * mu * nu
    gamma = delta**2 * kappa * num_agents * float(np.linalg.eigvalsh(signal_cov)[-1])
    stable = alpha < 1.0
    bound = mu**2 * gamma / (1.0 - alpha) if stable else np.inf
    return SteadyStateDiagnostics(
        alpha=alpha,
        gamma=gamma,
        nu=nu,
        kappa=kappa,
        signal_covariance=signal_cov,
        ratio_second_moment=ratio_moment,
        bound=bound,
        stable=stable,
        samples=lam.shape[0],
    )
