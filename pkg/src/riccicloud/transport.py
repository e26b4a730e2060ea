"""Exact discrete optimal transport.

1-Wasserstein via successive-shortest-path min-cost flow with potentials,
an exhaustive rational-arithmetic oracle for small instances, a bottleneck
(infinity-OT) matching, and the splitting-lemma harness. Masses are scaled
integers throughout so marginal constraints are exact; costs stay floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite positive measure: integer numerators over a common denominator."""

    support: np.ndarray  # atom ids (ints), e.g. vertex indices
    numerators: np.ndarray  # int64, strictly positive
    denominator: int

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.int64)
        num = np.asarray(self.numerators, dtype=np.int64)
        if sup.ndim != 1 or num.shape != sup.shape:
            raise TransportError("support and numerators must be matching 1-d arrays")
        if sup.size == 0:
            raise TransportError("empty measure")
        if np.any(num <= 0):
            raise TransportError("masses must be strictly positive")
        if self.denominator <= 0:
            raise TransportError("denominator must be positive")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "numerators", num)

    @staticmethod
    def uniform(support) -> "DiscreteMeasure":
        support = np.asarray(support, dtype=np.int64)
        return DiscreteMeasure(support, np.ones_like(support), int(support.size))

    @property
    def size(self) -> int:
        return int(self.support.size)

    @property
    def total(self) -> Fraction:
        return Fraction(int(self.numerators.sum()), self.denominator)

    def masses(self) -> np.ndarray:
        return self.numerators / float(self.denominator)

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        lcm = math.lcm(self.denominator, other.denominator)
        merged: dict[int, int] = {}
        for sup, num, den in (
            (self.support, self.numerators, self.denominator),
            (other.support, other.numerators, other.denominator),
        ):
            scale = lcm // den
            for s, k in zip(sup.tolist(), num.tolist()):
                merged[s] = merged.get(s, 0) + k * scale
        items = sorted(merged.items())
        return DiscreteMeasure(
            np.array([s for s, _ in items], dtype=np.int64),
            np.array([k for _, k in items], dtype=np.int64),
            lcm,
        )


@dataclass
class TransportPlan:
    """Optimal coupling with its dual certificate."""

    source_support: np.ndarray
    target_support: np.ndarray
    entries: list[tuple[int, int, int]]  # (source pos, target pos, flow numerator)
    denominator: int
    cost: float
    cost_exact: Fraction
    dual_source: np.ndarray  # phi_i, with phi_i + psi_j <= C_ij
    dual_target: np.ndarray  # psi_j
    dual_value: float

    def flow_matrix(self) -> np.ndarray:
        f = np.zeros((self.source_support.size, self.target_support.size), dtype=np.int64)
        for i, j, k in self.entries:
            f[i, j] = k
        return f

    def marginal_residuals(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> tuple[int, int]:
        """Max absolute integer mismatch of the plan's marginals (0 when exact)."""
        f = self.flow_matrix()
        lcm = self.denominator
        r = f.sum(axis=1) - mu.numerators * (lcm // mu.denominator)
        c = f.sum(axis=0) - nu.numerators * (lcm // nu.denominator)
        return int(np.abs(r).max()), int(np.abs(c).max())

    def slackness_violation(self, cost_matrix: np.ndarray) -> float:
        """Max |phi_i + psi_j - C_ij| over positive-flow entries."""
        worst = 0.0
        for i, j, _ in self.entries:
            worst = max(worst, abs(self.dual_source[i] + self.dual_target[j] - cost_matrix[i, j]))
        return worst

    def duality_gap(self) -> float:
        return abs(self.cost - self.dual_value)


def _cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, cost) -> np.ndarray:
    if callable(cost):
        c = np.empty((mu.size, nu.size))
        for a, s in enumerate(mu.support.tolist()):
            for b, t in enumerate(nu.support.tolist()):
                c[a, b] = cost(s, t)
    else:
        c = np.asarray(cost, dtype=float)
        if c.shape != (mu.size, nu.size):
            raise TransportError(f"cost matrix must have shape {(mu.size, nu.size)}")
    if not np.all(np.isfinite(c)):
        raise TransportError("disconnected cost: non-finite entry")
    if np.any(c < 0):
        raise TransportError("costs must be nonnegative")
    return c


def _check_balanced(mu: DiscreteMeasure, nu: DiscreteMeasure) -> int:
    if mu.total != nu.total:
        raise TransportError("mass mismatch: totals differ")
    return math.lcm(mu.denominator, nu.denominator)


def w1_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, cost) -> TransportPlan:
    """Exact optimal transport by min-cost flow (successive shortest paths).

    Supplies/demands are lcm-rescaled integers, so the returned plan's
    marginals match the inputs exactly. Optimality is certified by the dual
    potentials (complementary slackness and a ~1e-12 duality gap).
    """
    c = _cost_matrix(mu, nu, cost)
    lcm = _check_balanced(mu, nu)
    ns, nt = mu.size, nu.size
    rem_r = mu.numerators * (lcm // mu.denominator)
    rem_c = nu.numerators * (lcm // nu.denominator)
    rem_r = rem_r.astype(np.int64).copy()
    rem_c = rem_c.astype(np.int64).copy()

    if ns * nt <= 4096:
        flow, pu, pv = _ssp_small(c, rem_r, rem_c)
        return _finish_plan(mu, nu, c, lcm, flow, pu, pv)

    flow = np.zeros((ns, nt), dtype=np.int64)
    pu = np.zeros(ns)
    pv = np.zeros(nt)
    inf = np.inf

    guard = 0
    max_aug = int(rem_r.sum()) + ns + nt + 1
    while rem_r.sum() > 0:
        guard += 1
        if guard > max_aug:
            raise TransportError("solver failed to terminate (internal error)")
        # Multi-source Dijkstra over the residual bipartite graph in reduced costs.
        dist_u = np.where(rem_r > 0, 0.0, inf)
        dist_v = np.full(nt, inf)
        par_v = np.full(nt, -1, dtype=np.int64)  # source feeding each sink
        par_u = np.full(ns, -1, dtype=np.int64)  # sink feeding each source (reverse arc)
        done_u = np.zeros(ns, dtype=bool)
        done_v = np.zeros(nt, dtype=bool)
        target = -1
        target_dist = inf
        while True:
            du = np.where(done_u, inf, dist_u)
            dv = np.where(done_v, inf, dist_v)
            iu = int(np.argmin(du))
            jv = int(np.argmin(dv))
            if du[iu] <= dv[jv]:
                if not np.isfinite(du[iu]):
                    break
                done_u[iu] = True
                # forward arcs iu -> all sinks
                cand = du[iu] + np.maximum(c[iu, :] + pu[iu] - pv, 0.0)
                upd = ~done_v & (cand < dist_v)
                dist_v[upd] = cand[upd]
                par_v[upd] = iu
            else:
                if not np.isfinite(dv[jv]):
                    break
                done_v[jv] = True
                if rem_c[jv] > 0:
                    target = jv
                    target_dist = dv[jv]
                    break
                # reverse arcs jv -> sources with positive flow
                has_flow = flow[:, jv] > 0
                cand = dv[jv] + np.maximum(pv[jv] - c[:, jv] - pu, 0.0)
                upd = has_flow & ~done_u & (cand < dist_u)
                dist_u[upd] = cand[upd]
                par_u[upd] = jv
        if target < 0:
            raise TransportError("disconnected cost: no augmenting path")

        # Trace the alternating path back to a source with remaining supply.
        path = []  # list of (i, j) forward arcs in order sink->source
        j = target
        while True:
            i = int(par_v[j])
            path.append((i, j))
            if par_u[i] < 0:
                break
            j = int(par_u[i])
        start = path[-1][0]
        bottleneck = min(int(rem_r[start]), int(rem_c[target]))
        for k in range(len(path) - 1):
            i_fwd, _ = path[k]
            _, j_rev = path[k + 1]
            bottleneck = min(bottleneck, int(flow[i_fwd, j_rev]))
        for k, (i, j) in enumerate(path):
            flow[i, j] += bottleneck
            if k + 1 < len(path):
                flow[i, path[k + 1][1]] -= bottleneck
        rem_r[start] -= bottleneck
        rem_c[target] -= bottleneck

        # Johnson potential update keeps reduced costs nonnegative.
        pu += np.minimum(dist_u, target_dist)
        pv += np.minimum(dist_v, target_dist)

    return _finish_plan(mu, nu, c, lcm, flow, pu, pv)


def _ssp_small(c: np.ndarray, rem_r: np.ndarray, rem_c: np.ndarray):
    """Pure-Python successive shortest paths; beats numpy call overhead on the
    tiny transport instances the curvature workloads are made of."""
    ns, nt = c.shape
    cl = c.tolist()
    rr = rem_r.tolist()
    cc = rem_c.tolist()
    flow = [[0] * nt for _ in range(ns)]
    pu = [0.0] * ns
    pv = [0.0] * nt
    inf = math.inf
    remaining = sum(rr)
    while remaining > 0:
        dist_u = [0.0 if rr[i] > 0 else inf for i in range(ns)]
        dist_v = [inf] * nt
        par_v = [-1] * nt
        par_u = [-1] * ns
        done_u = [False] * ns
        done_v = [False] * nt
        target = -1
        target_dist = inf
        while True:
            best = inf
            node = -1
            is_sink = False
            for i in range(ns):
                if not done_u[i] and dist_u[i] < best:
                    best = dist_u[i]
                    node = i
                    is_sink = False
            for j in range(nt):
                if not done_v[j] and dist_v[j] < best:
                    best = dist_v[j]
                    node = j
                    is_sink = True
            if node < 0:
                break
            if is_sink:
                done_v[node] = True
                if cc[node] > 0:
                    target = node
                    target_dist = best
                    break
                base = best + pv[node]
                crow = [cl[i][node] for i in range(ns)]
                for i in range(ns):
                    if flow[i][node] > 0 and not done_u[i]:
                        nd = base - crow[i] - pu[i]
                        if nd < best:
                            nd = best
                        if nd < dist_u[i]:
                            dist_u[i] = nd
                            par_u[i] = node
            else:
                done_u[node] = True
                row = cl[node]
                base = best + pu[node]
                for j in range(nt):
                    if not done_v[j]:
                        nd = base + row[j] - pv[j]
                        if nd < best:
                            nd = best
                        if nd < dist_v[j]:
                            dist_v[j] = nd
                            par_v[j] = node
        if target < 0:
            raise TransportError("disconnected cost: no augmenting path")
        path = []
        j = target
        while True:
            i = par_v[j]
            path.append((i, j))
            if par_u[i] < 0:
                break
            j = par_u[i]
        start = path[-1][0]
        bottleneck = min(rr[start], cc[target])
        for k in range(len(path) - 1):
            bottleneck = min(bottleneck, flow[path[k][0]][path[k + 1][1]])
        for k, (i, j) in enumerate(path):
            flow[i][j] += bottleneck
            if k + 1 < len(path):
                flow[i][path[k + 1][1]] -= bottleneck
        rr[start] -= bottleneck
        cc[target] -= bottleneck
        remaining -= bottleneck
        for i in range(ns):
            pu[i] += dist_u[i] if dist_u[i] < target_dist else target_dist
        for j in range(nt):
            pv[j] += dist_v[j] if dist_v[j] < target_dist else target_dist
    return np.asarray(flow, dtype=np.int64), np.asarray(pu), np.asarray(pv)


def _finish_plan(mu, nu, c, lcm, flow, pu, pv) -> TransportPlan:
    entries = [
        (int(i), int(j), int(flow[i, j]))
        for i, j in zip(*np.nonzero(flow))
    ]
    entries.sort()
    cost_exact = Fraction(0)
    for i, j, k in entries:
        cost_exact += Fraction(k, lcm) * Fraction(float(c[i, j]))
    primal = float(sum(k * c[i, j] for i, j, k in entries) / lcm)
    phi = -np.asarray(pu)
    psi = np.asarray(pv).copy()
    dual = float(psi @ (nu.numerators * (lcm // nu.denominator)) / lcm
                 + phi @ (mu.numerators * (lcm // mu.denominator)) / lcm)
    return TransportPlan(
        source_support=mu.support.copy(),
        target_support=nu.support.copy(),
        entries=entries,
        denominator=lcm,
        cost=primal,
        cost_exact=cost_exact,
        dual_source=phi,
        dual_target=psi,
        dual_value=dual,
    )


def w1_brute(mu: DiscreteMeasure, nu: DiscreteMeasure, cost) -> Fraction:
    """Exhaustive exact optimum over transportation-polytope vertices.

    Greedy cell choices (send min(remaining supply, remaining demand), cross
    out the exhausted side) reach every basic solution via leaf peeling of its
    support forest, so the memoized minimum over all choice sequences is the
    exact optimum. All arithmetic is rational; float costs lift exactly.
    """
    if mu.size * nu.size > 49:
        raise TransportError("instance too large for the brute-force oracle")
    c = _cost_matrix(mu, nu, cost)
    lcm = _check_balanced(mu, nu)
    r0 = tuple(int(v) for v in mu.numerators * (lcm // mu.denominator))
    c0 = tuple(int(v) for v in nu.numerators * (lcm // nu.denominator))
    # integral costs admit a pure-integer DP (floats below 2^40 are exact ints)
    integral = bool(np.all(c == np.round(c)) and c.max() <= 2**40)
    if integral:
        cf = [[int(c[i, j]) for j in range(nu.size)] for i in range(mu.size)]
        zero = 0
    else:
        cf = [[Fraction(float(c[i, j])) for j in range(nu.size)] for i in range(mu.size)]
        zero = Fraction(0)

    ns_, nt_ = mu.size, nu.size
    rr = list(r0)
    ss = list(c0)
    shift = [1 << (16 * t) for t in range(ns_ + nt_)]
    key0 = sum(v * shift[t] for t, v in enumerate(r0 + c0))
    memo: dict[int, object] = {0: zero}  # all-margins-exhausted state

    def best(key: int):
        val = memo.get(key)
        if val is not None:
            return val
        rows = [i for i in range(ns_) if rr[i]]
        if not rows:
            memo[key] = zero
            return zero
        cols = [j for j in range(nt_) if ss[j]]
        # a single active row (or column) forces the completion
        if len(rows) == 1:
            row = cf[rows[0]]
            out = sum(row[j] * ss[j] for j in cols)
            memo[key] = out
            return out
        if len(cols) == 1:
            j = cols[0]
            out = sum(cf[i][j] * rr[i] for i in rows)
            memo[key] = out
            return out
        out = None
        for i in rows:
            row = cf[i]
            wi = shift[i]
            ri = rr[i]
            for j in cols:
                cj = ss[j]
                k = ri if ri < cj else cj
                rr[i] = ri - k
                ss[j] = cj - k
                cand = row[j] * k + best(key - k * wi - k * shift[ns_ + j])
                rr[i] = ri
                ss[j] = cj
                if out is None or cand < out:
                    out = cand
        memo[key] = out
        return out

    return Fraction(best(key0)) / lcm


def w1_monotone_line(pos_x, mu: DiscreteMeasure, pos_y, nu: DiscreteMeasure, h=None) -> Fraction:
    """Exact W1 on the line for costs h(|x-y|) with h convex non-decreasing.

    The sorted (quantile) coupling is optimal by submodularity. Positions are
    real coordinates aligned with the measures' atom order. h defaults to the
    absolute difference.
    """
    lcm = _check_balanced(mu, nu)
    px = np.asarray(pos_x, dtype=float)
    py = np.asarray(pos_y, dtype=float)
    ox = np.argsort(px, kind="stable")
    oy = np.argsort(py, kind="stable")
    rx = (mu.numerators * (lcm // mu.denominator))[ox]
    ry = (nu.numerators * (lcm // nu.denominator))[oy]
    sx = px[ox]
    sy = py[oy]
    total = Fraction(0)
    a = b = 0
    ra, rb = int(rx[0]), int(ry[0])
    while True:
        k = min(ra, rb)
        d = abs(sx[a] - sy[b])
        val = d if h is None else h(d)
        total += Fraction(k, lcm) * Fraction(float(val))
        ra -= k
        rb -= k
        if ra == 0:
            a += 1
            if a == sx.size:
                break
            ra = int(rx[a])
        if rb == 0:
            b += 1
            if b == sy.size:
                break
            rb = int(ry[b])
    return total


def cancel_common_mass(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """Residual measures ((mu-nu)+, (nu-mu)+) on disjoint supports.

    For metric costs W1 is unchanged: a plan may always keep the common mass
    in place (triangle inequality). Returns None in place of an empty residual
    (i.e. mu == nu).
    """
    lcm = _check_balanced(mu, nu)
    a = {int(s): int(k) * (lcm // mu.denominator) for s, k in zip(mu.support, mu.numerators)}
    b = {int(s): int(k) * (lcm // nu.denominator) for s, k in zip(nu.support, nu.numerators)}
    left: dict[int, int] = {}
    right: dict[int, int] = {}
    for s in set(a) | set(b):
        diff = a.get(s, 0) - b.get(s, 0)
        if diff > 0:
            left[s] = diff
        elif diff < 0:
            right[s] = -diff
    if not left:
        return None, None

    def mk(d):
        keys = sorted(d)
        return DiscreteMeasure(
            np.array(keys, dtype=np.int64),
            np.array([d[s] for s in keys], dtype=np.int64),
            lcm,
        )

    return mk(left), mk(right)


def splitting_check(mu1, mu2, nu1, nu2, cost, tol: float = 1e-9) -> bool:
    """W1(mu1+mu2, nu1+nu2) <= W1(mu1,nu1) + W1(mu2,nu2) + tol.

    cost is a callable on atom ids (the summed measures re-index supports).
    """
    if not callable(cost):
        raise TransportError("splitting_check needs a callable cost on atom ids")
    if mu1.total != nu1.total or mu2.total != nu2.total:
        raise TransportError("mass mismatch within a split pair")
    left = w1_exact(mu1 + mu2, nu1 + nu2, cost).cost
    right = w1_exact(mu1, nu1, cost).cost + w1_exact(mu2, nu2, cost).cost
    return left <= right + tol


def bottleneck_matching(cost_matrix) -> tuple[float, list[tuple[int, int]]]:
    """Perfect matching minimizing the maximum edge cost (empirical W-infinity).

    Binary search over the sorted distinct costs with an augmenting-path
    feasibility check at each threshold.
    """
    c = np.asarray(cost_matrix, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise TransportError("bottleneck matching needs a square cost matrix")
    k = c.shape[0]
    if k == 0:
        return 0.0, []
    values = np.unique(c)

    def feasible(thr: float):
        adj = c <= thr
        match_of_col = np.full(k, -1, dtype=np.int64)

        def try_assign(row: int, seen: np.ndarray) -> bool:
            for col in np.nonzero(adj[row] & ~seen)[0]:
                seen[col] = True
                if match_of_col[col] < 0 or try_assign(int(match_of_col[col]), seen):
                    match_of_col[col] = row
                    return True
            return False

        for row in range(k):
            if not try_assign(row, np.zeros(k, dtype=bool)):
                return None
        return match_of_col

    lo, hi = 0, values.size - 1
    best = feasible(float(values[hi]))
    if best is None:
        raise TransportError("no perfect matching exists")
    while lo < hi:
        mid = (lo + hi) // 2
        m = feasible(float(values[mid]))
        if m is None:
            lo = mid + 1
        else:
            hi = mid
            best = m
    value = float(values[hi])
    matching = sorted((int(best[col]), int(col)) for col in range(k))
    return value, matching


def bottleneck_matching_points(A, B, cost) -> tuple[float, list[tuple[int, int]]]:
    """bottleneck_matching over two equal-length point lists and a cost(a, b)."""
    A = list(A)
    B = list(B)
    if len(A) != len(B):
        raise TransportError("size mismatch: point lists must have equal length")
    c = np.array([[cost(a, b) for b in B] for a in A], dtype=float)
    return bottleneck_matching(c)


def bottleneck_brute(cost_matrix) -> float:
    """Min over all permutations of the max edge cost (test oracle, k <= 8)."""
    from itertools import permutations

    c = np.asarray(cost_matrix, dtype=float)
    k = c.shape[0]
    if k > 8:
        raise TransportError("brute-force bottleneck limited to k <= 8")
    best = math.inf
    rows = np.arange(k)
    for perm in permutations(range(k)):
        best = min(best, float(c[rows, list(perm)].max()))
    return best


def w_infty_rate(n: int, m: int) -> float:
    """Empirical-measure W-infinity scale: (log n)^{p_m} / n^{1/m} with the m=1 clause."""
    if m == 1:
        return math.sqrt(math.log(n)) / math.sqrt(n)
    p = 0.75 if m == 2 else 1.0 / m
    return math.log(n) ** p / n ** (1.0 / m)


def estimate_w_infty_empirical(cloud, oracle, reference_n: int, seed: int = 0) -> dict:
    """Upper proxy for W-infinity(mu, mu_n): bin a dense reference sample to the
    nearest data point and report the max geodesic radius, plus the theoretical
    scale with a fitted prefactor."""
    n = cloud.n
    if reference_n < n:
        raise TransportError("reference_n must be at least n")
    ref = oracle.sample_uniform(reference_n, seed).points
    radius = 0.0
    chunk = max(1, int(2e6 // max(n, 1)))
    for lo in range(0, reference_n, chunk):
        block = ref[lo : lo + chunk]
        d = oracle.pairwise_geodesic(block, cloud.points)
        radius = max(radius, float(d.min(axis=1).max()))
    scale = w_infty_rate(n, oracle.intrinsic_dim)
    return {
        "proxy": radius,
        "theory_scale": scale,
        "fitted_prefactor": radius / scale,
        "reference_n": reference_n,
    }
