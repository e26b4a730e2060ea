"""Unnormalized graph Laplacian, heat flow, and Lipschitz-contraction checks.

Delta u(x) = (1/(n eps^{m+2})) sum_z w(x,z) (u(x) - u(z)). The integer-valued
matrix n eps^{m+2} Delta = deg - adjacency is kept separately so constants are
annihilated exactly and the quadratic form stays PSD at the float level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph_metric import GraphMetric
from .rgg import Rgg, degree_density


class HeatError(ValueError):
    pass


class HeatSystem:
    """Laplacian + metric context for the contraction experiments."""

    def __init__(self, rgg: Rgg, metric: GraphMetric, oracle=None, m: int | None = None):
        if m is None:
            if oracle is None:
                raise HeatError("need the intrinsic dimension (oracle or m)")
            m = oracle.intrinsic_dim
        self.rgg = rgg
        self.metric = metric
        self.oracle = oracle
        self.m = int(m)
        n = rgg.n
        w = np.zeros((n, n))
        for i in range(n):
            w[i, rgg.ball(i)] = 1.0
        deg = w.sum(axis=1)
        self._integer_laplacian = np.diag(deg) - w  # exact integer entries
        self._adjacency = w
        self._ball_sizes = deg
        self.scale = 1.0 / (n * rgg.eps ** (self.m + 2))
        self.degree_report = degree_density(rgg, oracle=oracle, m=self.m)
        self._diam = None

    @property
    def n(self) -> int:
        return self.rgg.n

    def laplacian_matrix(self) -> np.ndarray:
        return self._integer_laplacian * self.scale

    def apply_laplacian(self, u: np.ndarray) -> np.ndarray:
        # anchoring out u[0] makes constants annihilate exactly (c - c == 0
        # elementwise, and the integer matrix maps the zero vector to zero)
        v = u - u[0]
        return (self._integer_laplacian @ v) * self.scale

    def gershgorin_bound(self) -> float:
        return 2.0 * float(self._ball_sizes.max() - 1.0) * self.scale

    def averaging(self, u: np.ndarray) -> np.ndarray:
        """A u(x) = mean of u over the Ollivier ball at x."""
        return (self._adjacency @ u) / self._ball_sizes

    def diam(self) -> float:
        if self._diam is None:
            d = self.metric.all_pairs()
            if not np.all(np.isfinite(d)):
                raise HeatError("disconnected graph has no diameter")
            self._diam = float(d.max())
        return self._diam

    def lip_seminorm(self, u: np.ndarray) -> tuple[float, tuple[int, int]]:
        """Max difference quotient under d_G, with a deterministic argmax pair."""
        d = self.metric.all_pairs()
        u = np.asarray(u, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.abs(u[:, None] - u[None, :]) / d
        q[~np.isfinite(q)] = -np.inf
        np.fill_diagonal(q, -np.inf)
        flat = int(np.argmax(q))
        i, j = divmod(flat, self.n)
        if i > j:
            i, j = j, i
        return float(q[i, j]), (i, j)


def degree_deviation(system: HeatSystem) -> dict:
    """Max |D - alpha| and the deviation/eps^3 ratio entering the flow rate."""
    rep = system.degree_report
    dev = rep.max_dev
    return {
        "max_dev": dev,
        "alpha": rep.alpha,
        "alpha_source": rep.alpha_source,
        "dev_over_eps3": dev / system.rgg.eps**3,
    }


def averaging_contraction_check(system: HeatSystem, k_g_emp: float, trials: int, seed: int,
                                tol: float = 1e-9) -> dict:
    """Lip(A u) <= (1 - eps^2 K_G) Lip(u) + tol over random Gaussian u.

    With K_G the empirical minimum of kappa/eps^2 over all pairs this is an
    exact consequence of Kantorovich duality, so any violation beyond the
    solver tolerance is a bug, not noise.
    """
    rng = np.random.default_rng(seed)
    factor = 1.0 - system.rgg.eps**2 * k_g_emp
    worst = -math.inf
    violations = 0
    for _ in range(trials):
        u = rng.standard_normal(system.n)
        lip_u, _ = system.lip_seminorm(u)
        lip_au, _ = system.lip_seminorm(system.averaging(u))
        slack = lip_au - factor * lip_u
        worst = max(worst, slack)
        if slack > tol:
            violations += 1
    return {"worst_slack": worst, "violations": violations, "trials": trials, "factor": factor}


def heat_flow(system: HeatSystem, u0: np.ndarray, t_grid, rtol: float = 1e-10) -> np.ndarray:
    """Trajectory of du/dt = -Delta u at the requested times.

    Adaptive explicit Runge-Kutta with step doubling; steps are capped at
    1/(2 * Gershgorin bound) so the scheme stays in the stability region
    unconditionally. Returns an array of shape (len(t_grid), n).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise HeatError("t grid must be increasing and start at >= 0")
    u = np.asarray(u0, dtype=float).copy()
    out = np.empty((t_grid.size, system.n))
    t = 0.0
    cap = 0.5 / max(system.gershgorin_bound(), 1e-300)
    dt = cap

    def rk4(v, h):
        k1 = -system.apply_laplacian(v)
        k2 = -system.apply_laplacian(v + 0.5 * h * k1)
        k3 = -system.apply_laplacian(v + 0.5 * h * k2)
        k4 = -system.apply_laplacian(v + h * k3)
        return v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    for row, t_target in enumerate(t_grid):
        while t < t_target:
            h = min(dt, cap, t_target - t)
            big = rk4(u, h)
            half = rk4(rk4(u, 0.5 * h), 0.5 * h)
            err = float(np.abs(big - half).max())
            tol = rtol * max(1.0, float(np.abs(u).max()))
            if err > tol and h > 1e-15:
                dt = 0.5 * h
                continue
            u = half
            t += h
            if err < 0.03 * tol:
                dt = min(2.0 * h, cap)
        out[row] = u
    return out


@dataclass
class ContractionReport:
    rate: float
    rate_positive: bool
    k_g_emp: float
    deviation_term: float
    diam: float
    rows: list[dict]
    lip_violations: int
    linf_violations: int


def contraction_experiment(system: HeatSystem, u0, t_grid, k_g_emp: float,
                           slack_scale: float = 1e-6, rtol: float = 1e-10) -> ContractionReport:
    """Heat-flow Lipschitz and L-infinity decay against the theorem envelopes.

    rate = K_G - 4 max|D - alpha| diam(G) / (c0 psi(0) eps^3); envelopes are
    exp(-rate t) Lip(u0) and exp(-rate t) diam(G) Lip(u0). Violations are
    flagged (with slack slack_scale * Lip(u0)) only when the rate is positive;
    otherwise the envelope is vacuous and reported as such.
    """
    u0 = np.asarray(u0, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    dev = degree_deviation(system)
    eps = system.rgg.eps
    diam = system.diam()
    dev_term = 4.0 * dev["max_dev"] * diam / (system.metric.c0 * system.metric.profile.psi0 * eps**3)
    rate = k_g_emp - dev_term
    lip0, _ = system.lip_seminorm(u0)
    traj = heat_flow(system, u0, t_grid, rtol=rtol)
    mean0 = float(u0.mean())
    slack = slack_scale * lip0
    rows = []
    lip_bad = 0
    linf_bad = 0
    for t, ut in zip(t_grid, traj):
        lip_t, _ = system.lip_seminorm(ut)
        # a deeply negative rate makes the envelope vacuous; avoid exp overflow
        decay = math.exp(-rate * t) if -rate * t < 700.0 else math.inf
        env_lip = lip0 * decay
        linf_dev = float(np.abs(ut - mean0).max())
        env_linf = diam * lip0 * decay
        row = {
            "t": float(t),
            "lip": lip_t,
            "envelope_lip": env_lip,
            "linf_dev": linf_dev,
            "envelope_linf": env_linf,
            "mean_drift": abs(float(ut.mean()) - mean0),
        }
        if rate > 0:
            if lip_t > env_lip + slack:
                lip_bad += 1
            if linf_dev > env_linf + slack:
                linf_bad += 1
        rows.append(row)
    return ContractionReport(
        rate=rate,
        rate_positive=rate > 0,
        k_g_emp=k_g_emp,
        deviation_term=dev_term,
        diam=diam,
        rows=rows,
        lip_violations=lip_bad,
        linf_violations=linf_bad,
    )
