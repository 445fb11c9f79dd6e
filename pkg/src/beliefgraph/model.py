"""Domain objects and seeded random generation.

Conventions used throughout the package:

* Agents are indexed ``k = 0..n-1``, hypotheses ``0..num_states-1``.
* A combination matrix ``A`` stores in entry ``(l, k)`` the weight that
  agent ``k`` assigns to neighbour ``l``; every column sums to one.
* Log-ratio matrices have shape ``(n, num_states - 1)``: column ``j``
  corresponds to the j-th hypothesis different from the reference one,
  in ascending index order.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "GenerationError",
    "LikelihoodModel",
    "CombinationMatrix",
    "erdos_renyi_adjacency",
    "random_combination_matrix",
    "random_likelihoods",
    "kl_divergence",
    "log_likelihood_ratio_matrix",
    "mean_likelihood_matrix",
    "ratio_columns",
    "is_strongly_connected",
]

COLUMN_SUM_TOL = 1e-12


class GenerationError(RuntimeError):
    """Random generation could not satisfy its constraints within the
    allowed number of attempts."""


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def is_strongly_connected(adjacency: np.ndarray) -> bool:
    """True if the directed graph of ``adjacency`` is strongly connected."""
    n_components, _ = connected_components(
        csr_matrix(adjacency), directed=True, connection="strong"
    )
    return int(n_components) == 1


def ratio_columns(num_states: int, reference: int) -> list[int]:
    """Hypothesis indices forming the columns of a log-ratio matrix:
    all states except ``reference``, ascending."""
    if not 0 <= reference < num_states:
        raise ValueError(f"reference state {reference} out of range")
    return [j for j in range(num_states) if j != reference]


class CombinationMatrix:
    """Column-stochastic influence weights over a directed graph.

    Parameters
    ----------
    weights : ndarray, shape (n, n)
        Nonnegative matrix; entry ``(l, k)`` is the weight agent ``k``
        places on agent ``l``. Columns must sum to one and the support
        must coincide with ``adjacency``.
    adjacency : ndarray of bool, shape (n, n)
        Directed adjacency, ``adjacency[l, k]`` true iff ``l`` influences
        ``k``. Must be strongly connected with at least one self-loop.

    Instances are immutable after construction and safe to share.
    """

    def __init__(self, weights: np.ndarray, adjacency: np.ndarray):
        self.weights = np.array(weights, dtype=float)
        self.adjacency = np.array(adjacency, dtype=bool)
        self.validate()
        self.weights.flags.writeable = False
        self.adjacency.flags.writeable = False

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def validate(self) -> None:
        w, adj = self.weights, self.adjacency
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be a square matrix")
        if adj.shape != w.shape:
            raise ValueError("adjacency shape does not match weights")
        if not np.isfinite(w).all() or (w < 0).any():
            raise ValueError("weights must be finite and nonnegative")
        if np.abs(w.sum(axis=0) - 1.0).max() > COLUMN_SUM_TOL:
            raise ValueError("columns must sum to one")
        if ((w > 0) != adj).any():
            raise ValueError("positive weights must coincide with the adjacency")
        if not adj.diagonal().any():
            raise ValueError("at least one self-loop is required")
        if not is_strongly_connected(adj):
            raise ValueError("the weight graph must be strongly connected")


class LikelihoodModel:
    """Per-agent categorical observation models.

    Parameters
    ----------
    tables : sequence of ndarray
        One ``(signal_size_k, num_states)`` table per agent; column ``s``
        is the signal distribution under hypothesis ``s``. Every column
        sums to one and no entry is below ``floor``.
    floor : float
        Lower bound enforced on all probabilities. A positive floor keeps
        every log-likelihood ratio finite.
    """

    def __init__(self, tables, floor: float):
        if floor <= 0:
            raise ValueError("floor must be positive")
        self.tables = [np.array(t, dtype=float) for t in tables]
        self.floor = float(floor)
        self.validate()
        for t in self.tables:
            t.flags.writeable = False
        self._cdf_stack = None
        self._log_stack = None
        self._sizes = np.array([t.shape[0] for t in self.tables])

    @property
    def num_agents(self) -> int:
        return len(self.tables)

    @property
    def num_states(self) -> int:
        return self.tables[0].shape[1]

    @property
    def signal_sizes(self) -> list[int]:
        return [t.shape[0] for t in self.tables]

    def validate(self) -> None:
        if not self.tables:
            raise ValueError("at least one agent is required")
        num_states = self.tables[0].shape[1]
        if num_states < 2:
            raise ValueError("at least two hypotheses are required")
        for k, t in enumerate(self.tables):
            if t.ndim != 2 or t.shape[1] != num_states:
                raise ValueError(f"table of agent {k} has inconsistent shape")
            if t.shape[0] < 2:
                raise ValueError(f"agent {k} needs at least two signals")
            if (t < self.floor - 1e-15).any():
                raise ValueError(f"agent {k} has entries below the floor")
            if np.abs(t.sum(axis=0) - 1.0).max() > 1e-12:
                raise ValueError(f"columns of agent {k} must sum to one")

    def log_ratio_bound(self) -> float:
        """Largest possible magnitude of any log-likelihood ratio.

        With probabilities floored at ``eps`` and unit column sums, an
        entry is at most ``1 - (size - 1) * eps``, so the log of the
        ratio of two entries is at most ``log`` of that value over
        ``eps``.
        """
        eps = self.floor
        sizes = np.asarray(self.signal_sizes)
        return float(np.max(np.log((1.0 - (sizes - 1) * eps) / eps)))

    # Tables are stacked into padded arrays so that per-iteration
    # sampling and likelihood lookups are single vectorized operations
    # even when agents have unequal signal spaces.

    def _stacks(self) -> tuple[np.ndarray, np.ndarray]:
        if self._cdf_stack is None:
            n, z_max = self.num_agents, int(self._sizes.max())
            cdf = np.full((n, z_max, self.num_states), 2.0)
            logs = np.zeros((n, z_max, self.num_states))
            for k, t in enumerate(self.tables):
                cdf[k, : t.shape[0]] = np.cumsum(t, axis=0)
                logs[k, : t.shape[0]] = np.log(t)
            self._cdf_stack, self._log_stack = cdf, logs
        return self._cdf_stack, self._log_stack

    def sampling_cdf(self, state: int) -> np.ndarray:
        """Stacked cumulative signal distributions under ``state``,
        shape ``(num_agents, max signal size)``; rows are padded with a
        value above one past each agent's signal space."""
        if not 0 <= state < self.num_states:
            raise ValueError("state out of range")
        cdf, _ = self._stacks()
        return cdf[:, :, state]

    def signal_log_likelihoods(self, signals) -> np.ndarray:
        """Rows ``log L_k(signal_k | .)`` for one signal per agent,
        shape ``(num_agents, num_states)``."""
        signals = np.asarray(signals, dtype=int)
        if signals.shape != (self.num_agents,):
            raise ValueError("one signal per agent is required")
        if (signals < 0).any() or (signals >= self._sizes).any():
            bad = int(np.argmax((signals < 0) | (signals >= self._sizes)))
            raise ValueError(
                f"signal {signals[bad]} outside the space of agent {bad}"
            )
        _, logs = self._stacks()
        return logs[np.arange(self.num_agents), signals, :]

    def identifiability_gap(self) -> np.ndarray:
        """Best across agents, for each ordered pair of distinct states,
        of the KL divergence between the two signal distributions.

        Entry ``(s, t)`` is ``max_k KL(table_k[:, s] || table_k[:, t])``
        with a zero diagonal. Every off-diagonal entry must be strictly
        positive for the true state to be collectively learnable.
        """
        s_count = self.num_states
        gap = np.zeros((s_count, s_count))
        for t in self.tables:
            log_t = np.log(t)
            for a in range(s_count):
                for b in range(s_count):
                    if a != b:
                        d = float(np.sum(t[:, a] * (log_t[:, a] - log_t[:, b])))
                        gap[a, b] = max(gap[a, b], d)
        return gap


def erdos_renyi_adjacency(
    n: int, edge_prob: float, seed, max_attempts: int = 1000
) -> tuple[np.ndarray, int]:
    """Draw a strongly connected directed adjacency with all self-loops.

    Every off-diagonal arc is included independently with probability
    ``edge_prob``; all diagonal entries are forced true. Masks are
    redrawn from the same generator stream until strongly connected.

    Returns
    -------
    adjacency : ndarray of bool, shape (n, n)
    attempts : int
        Number of masks drawn; 1 means the first draw was connected.

    Raises
    ------
    GenerationError
        If no connected mask appears within ``max_attempts`` draws,
        which signals that ``edge_prob`` is too small for ``n``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < edge_prob <= 1:
        raise ValueError("edge_prob must be in (0, 1]")
    rng = _as_rng(seed)
    for attempt in range(1, max_attempts + 1):
        mask = rng.random((n, n)) < edge_prob
        np.fill_diagonal(mask, True)
        if is_strongly_connected(mask):
            return mask, attempt
    raise GenerationError(
        f"no strongly connected draw in {max_attempts} attempts "
        f"(n={n}, edge_prob={edge_prob})"
    )


def random_combination_matrix(adjacency: np.ndarray, seed) -> CombinationMatrix:
    """Random column-stochastic weights on a given adjacency.

    One uniform draw per arc, then each column is normalized to sum to
    one. Draws cover the full ``n x n`` grid so the result is a pure
    function of (adjacency, seed); draws off the adjacency are
    discarded. Uses ``1 - U`` with ``U ~ [0, 1)`` so supported weights
    are strictly positive.
    """
    adjacency = np.asarray(adjacency, dtype=bool)
    if not adjacency.diagonal().any() or not is_strongly_connected(adjacency):
        raise ValueError("adjacency must be strongly connected with a self-loop")
    rng = _as_rng(seed)
    weights = (1.0 - rng.random(adjacency.shape)) * adjacency
    col_sums = weights.sum(axis=0)
    if (col_sums == 0).any():
        raise GenerationError("a column has no support")
    weights /= col_sums
    return CombinationMatrix(weights, adjacency)


def _floor_column(column: np.ndarray, eps: float) -> np.ndarray:
    """Clamp a probability column to ``>= eps`` while keeping its sum.

    Entries below the floor are fixed at ``eps`` and the remaining mass
    is rescaled over the free entries; rescaling can push further
    entries under the floor, so the clamp repeats until stable (at most
    ``len(column)`` rounds).
    """
    out = column.copy()
    low = out < eps
    while True:
        out[low] = eps
        free = ~low
        out[free] *= (1.0 - eps * low.sum()) / out[free].sum()
        newly = free & (out < eps)
        if not newly.any():
            return out
        low |= newly


def random_likelihoods(
    num_agents: int,
    num_states: int,
    signal_sizes,
    seed,
    floor: float = 0.01,
    kl_floor: float = 1e-3,
    max_attempts: int = 1000,
) -> LikelihoodModel:
    """Draw a random likelihood model satisfying the validity checks.

    Each column is a vector of uniform draws normalized to sum to one,
    then floored at ``floor`` (sum preserved). The whole draw repeats,
    consuming the same generator stream, until for every ordered pair
    of distinct states some agent separates the pair by more than
    ``kl_floor`` in KL divergence.

    Raises
    ------
    GenerationError
        If the identifiability requirement is still violated after
        ``max_attempts`` draws (``kl_floor`` too demanding for the
        signal spaces).
    """
    if num_agents < 1:
        raise ValueError("num_agents must be at least 1")
    if num_states < 2:
        raise ValueError("num_states must be at least 2")
    if np.isscalar(signal_sizes):
        sizes = [int(signal_sizes)] * num_agents
    else:
        sizes = [int(z) for z in signal_sizes]
        if len(sizes) != num_agents:
            raise ValueError("one signal size per agent is required")
    if min(sizes) < 2:
        raise ValueError("every signal space needs at least two outcomes")
    if floor * max(sizes) >= 1.0:
        raise ValueError("floor too large for the signal space")

    rng = _as_rng(seed)
    off_diagonal = ~np.eye(num_states, dtype=bool)
    for _ in range(max_attempts):
        tables = []
        for size in sizes:
            t = rng.random((size, num_states))
            t /= t.sum(axis=0, keepdims=True)
            for s in range(num_states):
                t[:, s] = _floor_column(t[:, s], floor)
            tables.append(t)
        model = LikelihoodModel(tables, floor)
        if (model.identifiability_gap()[off_diagonal] > kl_floor).all():
            return model
    raise GenerationError(
        f"identifiability gap above {kl_floor} not reached in "
        f"{max_attempts} attempts"
    )


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence between two categorical distributions,
    in nats."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be vectors of identical length")
    if (p <= 0).any() or (q <= 0).any():
        raise ValueError("entries must be strictly positive")
    if abs(p.sum() - 1.0) > 1e-6 or abs(q.sum() - 1.0) > 1e-6:
        raise ValueError("p and q must sum to one")
    return float(np.sum(p * (np.log(p) - np.log(q))))


def log_likelihood_ratio_matrix(
    model: LikelihoodModel, signals, reference: int = 0
) -> np.ndarray:
    """Log-likelihood ratios of one signal per agent against the
    reference state.

    Entry ``(k, j)`` is ``log L_k(signal_k | reference) -
    log L_k(signal_k | other_j)`` with the non-reference states
    enumerated ascending. Entries are bounded in magnitude by
    :meth:`LikelihoodModel.log_ratio_bound`.
    """
    cols = ratio_columns(model.num_states, reference)
    log_lik = model.signal_log_likelihoods(signals)
    return log_lik[:, [reference]] - log_lik[:, cols]


def mean_likelihood_matrix(
    model: LikelihoodModel, generating_state: int, reference: int = 0
) -> np.ndarray:
    """Expected log-likelihood ratio matrix when signals are drawn under
    ``generating_state``.

    Entry ``(k, j)`` equals ``KL_k(generating || other_j) -
    KL_k(generating || reference)``; it is the exact mean of
    :func:`log_likelihood_ratio_matrix` over the signal distribution.
    """
    if not 0 <= generating_state < model.num_states:
        raise ValueError("generating_state out of range")
    cols = ratio_columns(model.num_states, reference)
    out = np.empty((model.num_agents, model.num_states - 1))
    for k, t in enumerate(model.tables):
        d_ref = kl_divergence(t[:, generating_state], t[:, reference])
        for jj, j in enumerate(cols):
            out[k, jj] = kl_divergence(t[:, generating_state], t[:, j]) - d_ref
    return out
