"""Private estimators for k-stars and triangles.

Each local protocol is split into user-side randomizers, which read one
:class:`~ldpgraph.graph.NeighborList` plus whatever the collector has
published, and collector-side aggregators, which only see released values.
The ``local_*`` drivers simulate the full exchange for one trial.

Stream roles used per trial: ``"degree"`` (noisy degree), ``"rr"`` (RR on
lower rows, counter = column), ``"project"`` (projection permutation),
``"lap"`` (k-star noise), ``"round2"`` (second-round noise) and
``"central"`` (curator noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .graph import (
    Graph,
    NeighborList,
    SubgraphClassCounts,
    clustering_coefficient,
    count_triangles,
    project,
    project_graph,
    subgraph_classes,
)
from .mech import PrivacyBudget, RandomSource, Stream, laplace, rr_flip_prob, rr_lower_row

# below this eps1 the factor 1/(1 - 2 p1) is numerically meaningless
MIN_EPS1 = 1e-12


class ConditioningError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EstimatorOutput:
    estimate: float
    budget: PrivacyBudget
    rounds: int
    algorithm: str
    d_tilde: int | None = None


@dataclass(frozen=True)
class UserRound2Message:
    w_hat: float

    def __post_init__(self):
        if not math.isfinite(self.w_hat):
            raise ValueError("round-2 message must be finite")


def _check_eps(name: str, eps: float) -> None:
    if not eps > 0:
        raise ValueError(f"{name} must be positive, got {eps}")


# -- noisy graph published after the RR round ---------------------------------


class NoisyGraph:
    """The collector's graph G' assembled from released lower rows.

    Stored as a dense symmetric boolean matrix; ``edge(j, k)`` for ``j < k``
    is the bit released by user ``k`` for column ``j``.
    """

    def __init__(self, n: int, matrix: np.ndarray):
        self.n = n
        self.matrix = matrix

    @classmethod
    def from_rows(cls, rows: Sequence[np.ndarray]) -> "NoisyGraph":
        n = len(rows)
        m = np.zeros((n, n), dtype=bool)
        for i, r in enumerate(rows):
            if len(r) != i:
                raise ValueError(f"row {i} has length {len(r)}, expected {i}")
            m[i, :i] = r
        m |= m.T
        return cls(n, m)

    @property
    def lower_bits(self) -> np.ndarray:
        return np.tril(self.matrix, -1)

    def edge(self, j: int, k: int) -> bool:
        return bool(self.matrix[j, k])

    def edges(self, j: np.ndarray, k: np.ndarray) -> np.ndarray:
        return self.matrix[j, k]

    def degrees(self) -> np.ndarray:
        return self.matrix.sum(axis=1, dtype=np.int64)

    def edge_count(self) -> int:
        return int(self.degrees().sum() // 2)

    def count_triangles(self, block: int = 1024) -> int:
        a = self.matrix.astype(np.float32)
        six = 0.0
        # float32 products are exact while path counts stay below 2**24
        for s in range(0, self.n, block):
            rows = a[s : s + block]
            six += float(np.sum((rows @ a) * rows, dtype=np.float64))
        return int(round(six)) // 6

    def subgraph_classes(self) -> SubgraphClassCounts:
        return subgraph_classes(self.n, self.degrees(), self.edge_count(), self.count_triangles())


class LazyNoisyGraph:
    """G' materialized only at queried pairs.

    ``release(owners, cols)`` must return the RR bit of ``a[owner, col]`` for
    ``col < owner``; it stands for asking the row owner for that single bit.
    Since every bit is addressed by ``(owner, col)`` the answers agree bit for
    bit with the eager :class:`NoisyGraph`.
    """

    def __init__(self, n: int, release: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.n = n
        self._release = release

    def edge(self, j: int, k: int) -> bool:
        return bool(self.edges(np.array([j]), np.array([k]))[0])

    def edges(self, j: np.ndarray, k: np.ndarray) -> np.ndarray:
        j = np.asarray(j, dtype=np.int64)
        k = np.asarray(k, dtype=np.int64)
        return self._release(np.maximum(j, k), np.minimum(j, k))


def _rr_release_fn(g: Graph, eps: float, source: RandomSource, trial: int):
    p = rr_flip_prob(eps)

    def release(owners: np.ndarray, cols: np.ndarray) -> np.ndarray:
        truth = g.has_edges(owners, cols)
        flips = source.uniforms(trial, "rr", owners, cols) < p
        return truth ^ flips

    return release


# -- user-side randomizers ------------------------------------------------------


def kstar_user(a: NeighborList, eps: float, d_tilde: int, k: int,
               proj_stream: Stream, noise_stream: Stream) -> float:
    """Projected k-star count of one user plus Lap(C(d_tilde, k-1)/eps)."""
    a = project(a, d_tilde, proj_stream)
    r = math.comb(a.degree, k)
    return r + laplace(noise_stream, math.comb(d_tilde, k - 1) / eps)


def rr_user(a: NeighborList, eps: float, stream: Stream) -> np.ndarray:
    return rr_lower_row(stream, eps, a)


def degree_user(a: NeighborList, eps0: float, stream: Stream) -> float:
    return a.degree + laplace(stream, 1.0 / eps0)


@lru_cache(maxsize=512)
def _pairs(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(m, 1)


def round2_counts(a: NeighborList, noisy) -> tuple[int, int]:
    """``(t, s)``: neighbor pairs ``j < k < owner`` that are linked in G', and all such pairs."""
    lower = a.bits[a.bits < a.owner]
    m = lower.size
    s = m * (m - 1) // 2
    if m < 2:
        return 0, s
    jj, kk = _pairs(m)
    t = int(np.count_nonzero(noisy.edges(lower[jj], lower[kk])))
    return t, s


def round2_user(a: NeighborList, noisy, p1: float, d_tilde: int, noise_scale: float,
                proj_stream: Stream, noise_stream: Stream) -> UserRound2Message:
    """Second-round report: (t - p1 s) on the projected list, plus Laplace noise."""
    a = project(a, d_tilde, proj_stream)
    t, s = round2_counts(a, noisy)
    return UserRound2Message(t - p1 * s + laplace(noise_stream, noise_scale))


# -- collector-side aggregators -------------------------------------------------


def sum_reports(reports: Sequence[float]) -> float:
    return math.fsum(reports)


def triangle_coefficients(mu: float) -> tuple[float, float, float, float]:
    """Weights on (m3, m2, m1, m0) that unbias the noisy-graph triangle count.

    These form the first column of the inverse of the 4x4 transition matrix
    between triple classes under RR with ``mu = e^eps``.
    """
    if not mu > 1:
        raise ValueError(f"mu must exceed 1, got {mu}")
    c = (mu - 1.0) ** 3
    return (mu**3 / c, -(mu**2) / c, mu / c, -1.0 / c)


def transition_matrix(mu: float) -> np.ndarray:
    """Row = triple class in G (3,2,1,0 edges), column = class in G'."""
    m = np.array(
        [
            [mu**3, 3 * mu**2, 3 * mu, 1],
            [mu**2, mu**3 + 2 * mu, 2 * mu**2 + 1, mu],
            [mu, 2 * mu**2 + 1, mu**3 + 2 * mu, mu**2],
            [1, 3 * mu, 3 * mu**2, mu**3],
        ],
        dtype=np.float64,
    )
    return m / (mu + 1) ** 3


def rr_triangle_aggregate(rows: Sequence[np.ndarray], p: float, use_empirical: bool = True) -> float:
    """Triangle estimate from released lower rows flipped with probability ``p``."""
    counts = NoisyGraph.from_rows(rows).subgraph_classes()
    if not use_empirical:
        return float(counts.m3)
    if p == 0:
        # noiseless channel: mu = inf and the weights reduce to (1, 0, 0, 0)
        return float(counts.m3)
    a3, a2, a1, a0 = triangle_coefficients((1.0 - p) / p)
    return a3 * counts.m3 + a2 * counts.m2 + a1 * counts.m1 + a0 * counts.m0


def round2_aggregate(messages: Sequence[UserRound2Message], p1: float) -> float:
    denom = 1.0 - 2.0 * p1
    if denom <= 0:
        raise ConditioningError("1 - 2*p1 must be positive")
    return math.fsum(m.w_hat for m in messages) / denom


def max_degree_aggregate(reports: Sequence[float]) -> tuple[float, int]:
    if len(reports) == 0:
        raise ValueError("no degree reports")
    d_hat = max(reports)
    return d_hat, int(math.floor(max(d_hat, 0.0)))


# -- protocol drivers ------------------------------------------------------------


def noisy_max_degree(g: Graph, eps0: float, source: RandomSource, trial: int = 0) -> tuple[float, int]:
    """Noisy max degree and the integer cap ``floor(max(d_hat, 0))`` derived from it."""
    _check_eps("eps0", eps0)
    if g.n == 0:
        raise ValueError("noisy max degree needs at least one user")
    reports = [degree_user(g.neighbor_list(i), eps0, source.stream(trial, "degree", i)) for i in range(g.n)]
    return max_degree_aggregate(reports)


def local_lap_kstar(g: Graph, eps: float, d_tilde: int, k: int, source: RandomSource,
                    trial: int = 0) -> EstimatorOutput:
    _check_eps("eps", eps)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if d_tilde < 0:
        raise ValueError(f"d_tilde must be non-negative, got {d_tilde}")
    reports = [
        kstar_user(
            g.neighbor_list(i), eps, d_tilde, k,
            source.stream(trial, "project", i), source.stream(trial, "lap", i),
        )
        for i in range(g.n)
    ]
    return EstimatorOutput(sum_reports(reports), PrivacyBudget(eps2=eps), 1, "local-lap-kstar", d_tilde)


def central_lap_kstar(g: Graph, eps: float, d_tilde: int, k: int, source: RandomSource,
                      trial: int = 0) -> EstimatorOutput:
    _check_eps("eps", eps)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    degrees = [project(g.neighbor_list(i), d_tilde, source.stream(trial, "project", i)).degree
               for i in range(g.n)]
    exact = sum(math.comb(d, k) for d in degrees)
    noise = laplace(source.stream(trial, "central"), 2 * math.comb(d_tilde, k - 1) / eps)
    return EstimatorOutput(exact + noise, PrivacyBudget(eps2=eps), 1, "central-lap-kstar", d_tilde)


def local_rr_triangle(g: Graph, eps: float, source: RandomSource, use_empirical: bool = True,
                      trial: int = 0, debias_p: float | None = None) -> EstimatorOutput:
    """One-round RR triangle estimate; ``debias_p`` overrides the flip
    probability assumed by the collector (oracle checks only)."""
    _check_eps("eps", eps)
    rows = [rr_user(g.neighbor_list(i), eps, source.stream(trial, "rr", i)) for i in range(g.n)]
    p = rr_flip_prob(eps) if debias_p is None else debias_p
    name = "local-rr-tri" if use_empirical else "local-rr-tri-noemp"
    return EstimatorOutput(rr_triangle_aggregate(rows, p, use_empirical), PrivacyBudget(eps1=eps), 1, name)


def local_2rounds_triangle(g: Graph, eps1: float, eps2: float, d_tilde: int, source: RandomSource,
                           trial: int = 0, lazy: bool = True, tight_noise: bool = False,
                           debias_p: float | None = None) -> EstimatorOutput:
    """Two-round triangle estimate.

    Round 1 publishes G' from eps1-RR on lower rows. In round 2 each user
    projects its list to ``d_tilde``, counts its noisy triangles ``t`` and
    2-stars ``s`` over neighbor pairs below its own index, and releases
    ``t - p1 s`` with Laplace noise of scale ``d_tilde/eps2`` (times
    ``1 - p1`` when ``tight_noise``). The collector rescales the sum by
    ``1/(1 - 2 p1)``.

    ``lazy`` only decides whether G' is built in full first; results are
    identical. ``debias_p`` replaces ``p1`` in the debiasing step and exists
    for noiseless oracle checks.
    """
    _check_eps("eps1", eps1)
    _check_eps("eps2", eps2)
    if eps1 < MIN_EPS1:
        raise ConditioningError(f"eps1={eps1} makes 1 - 2*p1 vanish")
    if d_tilde < 0:
        raise ValueError(f"d_tilde must be non-negative, got {d_tilde}")
    p1 = rr_flip_prob(eps1) if debias_p is None else debias_p
    if lazy:
        noisy = LazyNoisyGraph(g.n, _rr_release_fn(g, eps1, source, trial))
    else:
        noisy = NoisyGraph.from_rows(
            [rr_user(g.neighbor_list(i), eps1, source.stream(trial, "rr", i)) for i in range(g.n)]
        )
    scale = d_tilde * ((1 - p1) if tight_noise else 1.0) / eps2
    messages = [
        round2_user(
            g.neighbor_list(i), noisy, p1, d_tilde, scale,
            source.stream(trial, "project", i), source.stream(trial, "round2", i),
        )
        for i in range(g.n)
    ]
    if debias_p is None:
        # 1 - 2 p1 == tanh(eps1 / 2), stable for small eps1
        estimate = math.fsum(m.w_hat for m in messages) / math.tanh(eps1 / 2)
    else:
        estimate = round2_aggregate(messages, p1)
    return EstimatorOutput(estimate, PrivacyBudget(eps1=eps1, eps2=eps2), 2, "local-2rounds-tri", d_tilde)


def central_lap_triangle(g: Graph, eps: float, d_tilde: int, source: RandomSource,
                         trial: int = 0) -> EstimatorOutput:
    _check_eps("eps", eps)
    projected = project_graph(g, d_tilde, source.seed_for(trial, "central-projection"))
    noise = laplace(source.stream(trial, "central"), d_tilde / eps)
    return EstimatorOutput(count_triangles(projected) + noise, PrivacyBudget(eps2=eps), 1,
                           "central-lap-tri", d_tilde)


def estimate_clustering(tri: EstimatorOutput, twostar: EstimatorOutput) -> float:
    """Clamped 3 * triangles / 2-stars from two private estimates.

    The combined spend is ``tri.budget + twostar.budget``.
    """
    return clustering_coefficient(tri.estimate, twostar.estimate)

