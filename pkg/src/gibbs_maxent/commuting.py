"""Commuting Gibbs states: Petz maps, conditional expectations and Hessian bounds.

The hypergraph metric is the shortest-path distance in the vertex graph in
which two vertices are adjacent when they share a hyperedge; the distance
between vertex sets is the smallest pairwise distance.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .gibbs import GibbsModel, dual_hessian, gibbs_state
from .operators import (
    LocalOperator,
    SiteSystem,
    embed_local,
    operator_norm,
    partial_trace,
    symmetrize,
    weighted_two_norm,
)


@dataclass(frozen=True, eq=False)
class InteractionHypergraph:
    """Vertices ``0..n-1`` and hyperedges given as vertex tuples."""

    n_vertices: int
    hyperedges: tuple
    distances: np.ndarray = field(init=False, repr=False)
    r0: int = field(init=False)

    def __post_init__(self):
        edges = tuple(tuple(sorted(set(int(v) for v in A))) for A in self.hyperedges)
        for A in edges:
            if not A or min(A) < 0 or max(A) >= self.n_vertices:
                raise ValueError(f"hyperedge {A} out of range")
        adj = np.zeros((self.n_vertices, self.n_vertices))
        for A in edges:
            for u, v in itertools.combinations(A, 2):
                adj[u, v] = adj[v, u] = 1
        dist = shortest_path(adj, unweighted=True, directed=False)
        dist.setflags(write=False)
        object.__setattr__(self, "hyperedges", edges)
        object.__setattr__(self, "distances", dist)
        radii = [min(max(dist[v, a] for a in A) for v in range(self.n_vertices)) for A in edges]
        object.__setattr__(self, "r0", int(max(radii)) if radii else 0)

    def set_distance(self, A, B) -> float:
        return float(min(self.distances[a, b] for a in A for b in B))

    @property
    def diameter(self) -> float:
        finite = self.distances[np.isfinite(self.distances)]
        return float(finite.max())

    def to_dict(self):
        return {"vertices": list(range(self.n_vertices)), "hyperedges": [list(A) for A in self.hyperedges]}

    @classmethod
    def from_dict(cls, data):
        return cls(len(data["vertices"]), tuple(tuple(A) for A in data["hyperedges"]))


def load_graph(path) -> InteractionHypergraph:
    with open(path) as fh:
        return InteractionHypergraph.from_dict(json.load(fh))


def hypergraph_from_model(model: GibbsModel) -> InteractionHypergraph:
    """Hypergraph whose hyperedges are the distinct supports of the basis."""
    supports = sorted({tuple(sorted(E.support)) for E in model.basis})
    return InteractionHypergraph(model.system.n, tuple(supports))


def ball_sphere_counts(graph: InteractionHypergraph, r: float) -> dict:
    """``B(r) = max_v |B(v, r)|`` and ``S(r) = max_v |S(v, r)|``."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    D = graph.distances
    return {"B": int((D <= r).sum(axis=1).max()), "S": int((D == r).sum(axis=1).max())}


# ---------------------------------------------------------------------------
# Petz maps and conditional expectations


def _sqrt_psd(A):
    w, V = np.linalg.eigh(symmetrize(A))
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def _inv_sqrt(A):
    w, V = np.linalg.eigh(symmetrize(A))
    if w.min() <= 1e-12:
        raise ValueError("Petz map needs a full-rank state")
    return (V / np.sqrt(w)) @ V.conj().T


def _reinsert(Y, x, system):
    rest = tuple(j for j in range(system.n) if j != x)
    if not rest:
        return Y[0, 0] * np.eye(system.d)
    return embed_local(LocalOperator(rest, Y, hermitian=False), system)


def petz_site(sigma, x: int, system: SiteSystem):
    """Petz recovery map of the partial trace over site ``x``.

    ``R(X) = A^{-1/2} tr_x(s X s) A^{-1/2} (x) I_x`` with ``s = sigma^{1/2}``
    and ``A = tr_x sigma``.

    Returns
    -------
    callable
        ``X -> R(X)`` on full-space matrices.
    """
    sigma = np.asarray(sigma)
    s = _sqrt_psd(sigma)
    A_inv = _inv_sqrt(partial_trace(sigma, [x], system))
    if np.linalg.eigvalsh(symmetrize(sigma)).min() <= 1e-12:
        raise ValueError("Petz map needs a full-rank state")

    def apply(X):
        inner = partial_trace(s @ np.asarray(X) @ s, [x], system)
        return _reinsert(A_inv @ inner @ A_inv, x, system)

    return apply


def superoperator(channel, dim: int) -> np.ndarray:
    """Matrix of a linear map on ``dim x dim`` matrices (row-major vectorization)."""
    T = np.empty((dim * dim, dim * dim), dtype=complex)
    for k in range(dim * dim):
        unit = np.zeros(dim * dim, dtype=complex)
        unit[k] = 1
        T[:, k] = np.asarray(channel(unit.reshape(dim, dim))).reshape(-1)
    return T


@dataclass(frozen=True, eq=False)
class ConditionalExpectation:
    """Limit of iterated Petz maps, stored as a superoperator matrix."""

    matrix: np.ndarray = field(repr=False)
    dim: int
    iterations: int
    converged: bool
    change: float

    def __call__(self, X):
        return (self.matrix @ np.asarray(X, dtype=complex).reshape(-1)).reshape(self.dim, self.dim)


def conditional_expectation_site(sigma, x: int, system: SiteSystem, tol: float = 1e-10,
                                 max_iter: int = 10_000) -> ConditionalExpectation:
    """``E_x = lim R_x^k`` by repeated squaring of the Petz superoperator.

    Convergence is measured as the operator norm of ``R^{2k} - R^k`` in the
    sigma-weighted geometry (i.e. after conjugating with
    ``X -> sigma^{1/4} X sigma^{1/4}``), which bounds the change of the image of
    every operator in ``||.||_{2,sigma}``.  ``iterations`` counts applications
    of ``R``; the loop stops once it would exceed ``max_iter``.
    """
    dim = system.dim
    T = superoperator(petz_site(sigma, x, system), dim)
    w, V = np.linalg.eigh(symmetrize(np.asarray(sigma)))
    q = (V * w**0.25) @ V.conj().T
    q_inv = (V * w**-0.25) @ V.conj().T
    gamma = np.kron(q, q.T)
    gamma_inv = np.kron(q_inv, q_inv.T)
    power, k = T, 1
    change = math.inf
    while 2 * k <= max_iter:
        nxt = power @ power
        change = float(np.linalg.norm(gamma @ (nxt - power) @ gamma_inv, 2))
        power, k = nxt, 2 * k
        if change <= tol:
            return ConditionalExpectation(power, dim, k, True, change)
    return ConditionalExpectation(power, dim, k, False, change)


# ---------------------------------------------------------------------------
# contraction coefficient


def local_hamiltonian(model: GibbsModel, mu, x: int) -> np.ndarray:
    """``H_x(mu)``: the sum of ``mu_j E_j`` over basis terms whose support contains ``x``."""
    mu = np.asarray(mu, dtype=float)
    idx = [j for j, E in enumerate(model.basis) if x in E.support]
    if not idx:
        return np.zeros((model.system.dim,) * 2, dtype=complex)
    return np.tensordot(mu[idx], model.dense[idx], axes=1)


def contraction_coefficient(model: GibbsModel, mu, x: int) -> float:
    """Contraction ratio of the Petz map at site ``x`` for ``sigma_x(mu)``.

    ``sigma_x = exp(-beta H_x) / tr`` and the ratio is
    ``||R_x(H_x) - h I||_{2,sigma_x} / ||H_x - h I||_{2,sigma_x}`` with
    ``h = tr[sigma_x H_x]``.
    """
    if not model.commuting_flag:
        raise ValueError("the contraction coefficient is defined for commuting models")
    system = model.system
    Hx = local_hamiltonian(model, mu, x)
    w, V = np.linalg.eigh(symmetrize(Hx))
    a = -model.beta * w
    p = np.exp(a - a.max())
    p /= p.sum()
    sigma_x = (V * p) @ V.conj().T
    h = float(np.trace(sigma_x @ Hx).real)
    centred = Hx - h * np.eye(system.dim)
    denom = weighted_two_norm(centred, sigma_x)
    if denom <= 1e-14:
        raise ValueError("H_x is proportional to the identity")
    R = petz_site(sigma_x, x, system)
    return weighted_two_norm(R(Hx) - h * np.eye(system.dim), sigma_x) / denom


def contraction_coefficient_max(model: GibbsModel, x: int, points: int = 5, n_random: int = 64,
                                seed: int = 0) -> dict:
    """Grid / multistart search for ``max_mu c(x, beta)`` over the unit box.

    Only the coordinates of basis terms touching ``x`` influence the ratio.
    Up to three such coordinates a full grid with ``points`` values per
    coordinate is scanned; beyond that ``n_random`` uniform points are used.
    The result is a lower bound on the true maximum.
    """
    idx = [j for j, E in enumerate(model.basis) if x in E.support]
    if not idx:
        raise ValueError(f"no basis term touches site {x}")
    if len(idx) <= 3:
        grid = np.linspace(-1, 1, points)
        candidates = [np.array(c) for c in itertools.product(grid, repeat=len(idx))]
    else:
        rng = np.random.default_rng(seed)
        candidates = list(rng.uniform(-1, 1, size=(n_random, len(idx))))
    best, arg, evals = -1.0, None, 0
    for c in candidates:
        if np.abs(c).max() == 0:
            continue
        mu = np.zeros(model.m)
        mu[idx] = c
        try:
            val = contraction_coefficient(model, mu, x)
        except ValueError:
            continue
        evals += 1
        if val > best:
            best, arg = val, mu
    return {"value": best, "argmax": arg, "evaluations": evals}


# ---------------------------------------------------------------------------
# Hessian bounds


def require_orthogonal_traceless(model: GibbsModel, tol: float = 1e-10):
    """Raise unless the basis is traceless and Hilbert-Schmidt orthogonal."""
    flat = model.dense.reshape(model.m, -1)
    gram = flat.conj() @ flat.T
    off = gram - np.diag(np.diag(gram))
    traces = np.einsum("kii->k", model.dense)
    if np.abs(off).max() > tol * model.system.dim or np.abs(traces).max() > tol * model.system.dim:
        raise ValueError("the lower bound needs a traceless, trace-orthogonal basis")


def hessian_lower_bound(beta: float, d: int, graph: InteractionHypergraph, c_beta: float) -> float:
    """``beta^2 exp(-beta (B(2 r0) + 2 B(4 r0))) d^{-B(2 r0)} (1 - c^2)``."""
    if not 0 <= c_beta < 1:
        raise ValueError("c_beta must lie in [0, 1)")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    r0 = graph.r0
    B2 = ball_sphere_counts(graph, 2 * r0)["B"]
    B4 = ball_sphere_counts(graph, 4 * r0)["B"]
    return beta**2 * math.exp(-beta * (B2 + 2 * B4)) * float(d) ** (-B2) * (1 - c_beta**2)


@dataclass(frozen=True)
class DecaySpec:
    """Correlation decay ``|cov(O_A, O_B)| <= c ||O_A|| ||O_B|| exp(-xi d(A, B))``."""

    c: float
    xi: float
    residual: float = 0.0

    def __post_init__(self):
        if not self.c > 0 or not self.xi > 0:
            raise ValueError("decay constants must be positive")


def hessian_upper_bound_decay(decay: DecaySpec, beta: float, d: int, graph: InteractionHypergraph,
                              include_overlapping: bool = False) -> float:
    """Gershgorin-type bound ``c beta^2 B(r0) B(2 r0) d^{2 B(r0)} sum_{r>=1} e^{-xi r} S(r)``.

    The series is truncated at the graph diameter.  As stated, the sum starts
    at ``r = 1`` and so accounts only for basis terms at positive distance;
    ``include_overlapping=True`` adds ``beta^2 (1 + B(r0) B(2 r0) d^{2 B(r0)})``
    for the diagonal and overlapping entries (using ``|cov| <= 1``), which
    makes the bound valid without further assumptions on those entries.
    """
    r0 = graph.r0
    Br0 = ball_sphere_counts(graph, r0)["B"]
    B2r0 = ball_sphere_counts(graph, 2 * r0)["B"]
    per_distance = Br0 * B2r0 * float(d) ** (2 * Br0)
    series = 0.0
    if math.isfinite(decay.xi):
        for r in range(1, int(graph.diameter) + 1):
            series += math.exp(-decay.xi * r) * ball_sphere_counts(graph, r)["S"]
    bound = decay.c * beta**2 * per_distance * series
    if include_overlapping:
        bound += beta**2 * (1 + per_distance)
    return bound


def correlation_fit(sigma, pairs: Sequence, system: SiteSystem, envelope: bool = False) -> DecaySpec:
    """Fit ``log |cov| = log c - xi * distance`` by least squares.

    Parameters
    ----------
    sigma : array_like
    pairs : sequence of (LocalOperator, LocalOperator, float)
        Observable pairs with the distance between their supports.
    system : SiteSystem
    envelope : bool
        If True, raise ``c`` so the fitted curve dominates every data point.

    Returns
    -------
    DecaySpec
        ``residual`` is the RMS deviation in log space.  When every
        covariance is below 1e-12 the sentinel ``xi = inf`` (with ``c = 1``)
        is returned.
    """
    if len({float(p[2]) for p in pairs}) < 3:
        raise ValueError("need at least three distinct distances")
    sigma = np.asarray(sigma)
    dist, logs = [], []
    for OA, OB, r in pairs:
        A = embed_local(OA, system)
        B = embed_local(OB, system)
        cov = np.trace(sigma @ A @ B) - np.trace(sigma @ A) * np.trace(sigma @ B)
        cov = abs(cov) / (operator_norm(OA.matrix) * operator_norm(OB.matrix))
        if cov >= 1e-12:
            dist.append(float(r))
            logs.append(math.log(cov))
    if not dist:
        return DecaySpec(1.0, math.inf, 0.0)
    if len(set(dist)) < 2:
        raise ValueError("too few non-negligible covariances to fit a decay rate")
    dist, logs = np.array(dist), np.array(logs)
    slope, intercept = np.polyfit(dist, logs, 1)
    if slope >= 0:
        raise ValueError("covariances do not decay with distance")
    resid = logs - (slope * dist + intercept)
    c = math.exp(intercept)
    if envelope:
        c = math.exp(intercept + max(0.0, resid.max()))
    return DecaySpec(c, -slope, float(np.sqrt(np.mean(resid**2))))


def hessian_sandwich(model: GibbsModel, mu, graph: InteractionHypergraph, c_beta: float,
                     decay: DecaySpec | None = None) -> dict:
    """Exact Hessian extremes with the generic, lower and decay bounds."""
    require_orthogonal_traceless(model)
    H = dual_hessian(model, mu, "commuting")
    w = np.linalg.eigvalsh(H)
    out = {
        "lambda_min": float(w[0]),
        "lambda_max": float(w[-1]),
        "L_bound": hessian_lower_bound(model.beta, model.system.d, graph, c_beta),
        "U_generic": 2 * model.beta**2 * model.m,
    }
    out["U_bound"] = out["U_generic"]
    if decay is not None:
        out["U_decay"] = hessian_upper_bound_decay(decay, model.beta, model.system.d, graph)
        out["U_bound"] = min(out["U_generic"], out["U_decay"])
    out["condition_number"] = out["lambda_max"] / out["lambda_min"] if out["lambda_min"] > 0 else math.inf
    return out
