"""Profile-bent pre-distances and the shortest-path metric d_G over the cloud.

The pre-distance of a pair at field distance d <= delta1 is delta0*psi(d/delta0);
it is evaluated as d + delta0*bend(d/delta0) with bend = psi - identity >= 0, so
the comparison pre >= d survives floating point with zero tolerance. Pairs
beyond delta1 are unreachable in one hop; d_G completes the pre-distance to a
metric by shortest paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .rgg import Rgg


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileFn:
    """Admissible profile: C^2 convex non-decreasing, psi(t)=t for t>=1,
    psi(0)>0, psi'(0)>0. Stored via its bend psi(t)-t (zero for t>=1)."""

    bend: object  # vectorized callable, bend(t) >= 0, == 0 for t >= 1
    psi0: float
    psip0: float
    description: str = ""

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        return t + self.bend(t)

    def check_admissible(self, grid=None) -> None:
        g = np.linspace(0.0, 2.0, 2001) if grid is None else np.asarray(grid)
        vals = self.psi(g)
        if self.psi0 <= 0 or self.psip0 <= 0:
            raise MetricError("profile needs psi(0) > 0 and psi'(0) > 0")
        if np.any(np.diff(vals) < -1e-12):
            raise MetricError("profile must be non-decreasing")
        inner = vals[2:] + vals[:-2] - 2 * vals[1:-1]
        if np.any(inner < -1e-10):
            raise MetricError("profile must be convex")
        above = g >= 1.0
        if np.any(np.abs(vals[above] - g[above]) > 1e-12):
            raise MetricError("profile must be the identity for t >= 1")
        if np.any(self.bend(g) < 0):
            raise MetricError("profile must satisfy psi(t) >= t")


def default_profile() -> ProfileFn:
    """psi(t) = (1 - t)^3 / 4 + t on [0, 1], identity beyond."""

    def bend(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 1.0, 0.25 * np.maximum(1.0 - t, 0.0) ** 3, 0.0)

    return ProfileFn(bend=bend, psi0=0.25, psip0=0.25, description="(1-t)^3/4 + t glued to identity")


class GraphMetric:
    """Shortest-path metric over finite pre-distances, with per-source caching."""

    ALL_PAIRS_GATE = 4000

    def __init__(
        self,
        rgg: Rgg,
        c0: float | None = None,
        c1: float | None = None,
        profile: ProfileFn | None = None,
        delta0: float | None = None,
        delta1: float | None = None,
    ):
        self.rgg = rgg
        eps = rgg.eps
        if delta0 is None:
            c0 = 0.05 if c0 is None else float(c0)
            delta0 = c0 * eps
        if delta1 is None:
            c1 = 2.2 if c1 is None else float(c1)
            delta1 = c1 * eps
        self.delta0 = float(delta0)
        self.delta1 = float(delta1)
        if not 0 < self.delta0 < self.delta1:
            raise MetricError("need 0 < delta0 < delta1")
        self.c0 = self.delta0 / eps
        self.c1 = self.delta1 / eps
        self.profile = profile if profile is not None else default_profile()
        # Assumption: c1 >= 2 + 4 c0; recorded, never silently corrected.
        self.regime_ok = bool(self.c1 + 1e-12 >= 2.0 + 4.0 * self.c0)
        self._graph = None
        self._sssp_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._all_pairs = None

    # -- pre-distance -------------------------------------------------------
    def pre_values(self, d) -> np.ndarray:
        """delta0*psi(d/delta0) for 0 < d <= delta1, +inf beyond, 0 at 0."""
        d = np.asarray(d, dtype=float)
        bendpart = self.delta0 * self.profile.bend(d / self.delta0)
        return _finalize_pre(d, bendpart, self.delta1)

    def pre_distance(self, i: int, j: int) -> float:
        """Single-hop cost; +inf when the hop is not available."""
        if i == j:
            return 0.0
        d = self.rgg.field.value(int(i), int(j))
        if d <= 0.0 or d > self.delta1:
            return math.inf
        return float(d + self.delta0 * self.profile.bend(d / self.delta0))

    # -- sparse hop graph ----------------------------------------------------
    def hop_graph(self) -> csr_matrix:
        if self._graph is None:
            n = self.rgg.n
            indptr = [0]
            indices = []
            data = []
            for i in range(n):
                vals = self.rgg.field.row(i)
                mask = (vals > 0.0) & (vals <= self.delta1)
                mask[i] = False
                js = np.nonzero(mask)[0]
                pre = vals[js] + self.delta0 * self.profile.bend(vals[js] / self.delta0)
                indices.append(js)
                data.append(pre)
                indptr.append(indptr[-1] + js.size)
            indices = np.concatenate(indices) if indices else np.empty(0, dtype=np.int64)
            data = np.concatenate(data) if data else np.empty(0)
            self._graph = csr_matrix((data, indices, np.asarray(indptr)), shape=(n, n))
        return self._graph

    # -- shortest paths -------------------------------------------------------
    def _sssp(self, source: int) -> tuple[np.ndarray, np.ndarray]:
        cached = self._sssp_cache.get(source)
        if cached is None:
            dist, pred = dijkstra(
                self.hop_graph(), directed=True, indices=source, return_predecessors=True
            )
            cached = (dist, pred)
            self._sssp_cache[source] = cached
        return cached

    def shortest_path_distance(self, i: int, j: int) -> tuple[float, list[int]]:
        """d_G(i, j) plus a witness chain; canonical orientation keeps symmetry exact."""
        i, j = int(i), int(j)
        if i == j:
            return 0.0, [i]
        src, dst = (i, j) if i < j else (j, i)
        dist, pred = self._sssp(src)
        if not np.isfinite(dist[dst]):
            raise MetricError("disconnected")
        path = [dst]
        while path[-1] != src:
            path.append(int(pred[path[-1]]))
        path.reverse()
        if src != i:
            path.reverse()
        return float(dist[dst]), path

    def distance(self, i: int, j: int) -> float:
        return self.shortest_path_distance(i, j)[0]

    def rows(self, sources, limit: float = np.inf) -> np.ndarray:
        """d_G from each source (bulk, uncached). Entries beyond `limit` are +inf."""
        sources = np.asarray(sources, dtype=np.int64)
        return np.atleast_2d(dijkstra(self.hop_graph(), directed=True, indices=sources, limit=limit))

    def all_pairs(self) -> np.ndarray:
        if self._all_pairs is None:
            if self.rgg.n > self.ALL_PAIRS_GATE:
                raise MetricError(f"all-pairs matrix gated to n <= {self.ALL_PAIRS_GATE}")
            self._all_pairs = dijkstra(self.hop_graph(), directed=True)
        return self._all_pairs

    def cost_matrix(self, I, J, d_hint: float | None = None) -> np.ndarray:
        """d_G between two support sets (W1 cost block).

        Below the all-pairs gate the cached full matrix is sliced (amortizes
        across many pair solves). Above it, a per-call Dijkstra is clipped at
        the rigorous bound d_hint + 2*eps (any ball atom is one <=eps hop from
        its center), keeping the search local on large graphs.
        """
        I = np.asarray(I, dtype=np.int64)
        J = np.asarray(J, dtype=np.int64)
        if self.rgg.n <= self.ALL_PAIRS_GATE:
            block = self.all_pairs()[np.ix_(I, J)]
            if not np.all(np.isfinite(block)):
                raise MetricError("disconnected")
            return block
        limit = np.inf
        if d_hint is not None:
            limit = d_hint + 2.0 * self.rgg.eps + 4.0 * self.delta0 + 1e-9
        block = self.rows(I, limit=limit)[:, J]
        if not np.all(np.isfinite(block)):
            if np.isfinite(limit):
                block = self.rows(I)[:, J]
            if not np.all(np.isfinite(block)):
                raise MetricError("disconnected")
        return block

    # -- derived sets ----------------------------------------------------------
    def adjacent_pairs(self) -> list[tuple[int, int]]:
        """Pairs with d_G = pre-distance <= delta1 (the global-bound workload)."""
        g = self.hop_graph()
        dist = dijkstra(g, directed=True, limit=self.delta1 * (1.0 + 1e-12))
        out = []
        coo = g.tocoo()
        for i, j, pre in zip(coo.row, coo.col, coo.data):
            if i < j and dist[i, j] == pre:
                out.append((int(i), int(j)))
        return out


def _finalize_pre(d: np.ndarray, bendpart: np.ndarray, delta1: float) -> np.ndarray:
    out = d + bendpart
    out = np.where((d > 0.0) & (d <= delta1), out, np.inf)
    return np.where(d == 0.0, 0.0, out)


def adjacent_pair_set(metric: GraphMetric) -> list[tuple[int, int]]:
    return metric.adjacent_pairs()


@dataclass
class MetricComparison:
    """Executable form of the metric comparison inequalities."""

    n_pairs: int
    n_window: int
    lower_violations: int  # d_G >= d_M failures (exact field; must be 0)
    window_upper_violations: int  # d_G <= d_M failures on the window (exact field)
    worst_lower_ratio: float  # max over pairs of d_M / d_G - 1 (data-driven slack)
    worst_window_ratio: float  # max over window pairs of d_G / d_M - 1


def compare_metrics(metric: GraphMetric, oracle, pair_sample) -> MetricComparison:
    """Count violations / measure slacks of the four comparison inequalities.

    With the exact field the lower and window-upper counts are proved to be
    zero; with a data-driven field the worst ratios are the empirical slack
    constants (scale beta*eps^2 + eps^3).
    """
    pts = metric.rgg.cloud.points
    lower_viol = 0
    window_upper_viol = 0
    worst_lower = 0.0
    worst_window = 0.0
    n_window = 0
    n_pairs = 0
    for i, j in pair_sample:
        i, j = int(i), int(j)
        if i == j:
            continue
        d_m = oracle.geodesic_distance(pts[i], pts[j])
        try:
            d_g = metric.distance(i, j)
        except MetricError:
            continue
        n_pairs += 1
        if d_g < d_m:
            lower_viol += 1
        if d_g > 0:
            worst_lower = max(worst_lower, d_m / d_g - 1.0)
        if 2.0 * metric.delta0 <= d_m <= 0.5 * metric.delta1:
            n_window += 1
            if d_g > d_m:
                window_upper_viol += 1
            if d_m > 0:
                worst_window = max(worst_window, d_g / d_m - 1.0)
    return MetricComparison(
        n_pairs=n_pairs,
        n_window=n_window,
        lower_violations=lower_viol,
        window_upper_violations=window_upper_viol,
        worst_lower_ratio=worst_lower,
        worst_window_ratio=worst_window,
    )
