"""Lipschitz constants, Wasserstein-1 brackets and transportation-cost checks.

Normalization: the Hamming Lipschitz constant is

    ||O||_Lip = sqrt(n) * max_i max { tr[O (rho - sigma)] : tr_i rho = tr_i sigma }
              = 2 sqrt(n) * max_i min_Y ||O - I_i (x) Y||_inf,

and ``W1(rho, sigma) = min sum_i ||X_i||_1 / (2 sqrt(n))`` over decompositions
``rho - sigma = sum_i X_i`` with ``tr_i X_i = 0``.  The two are dual:
``tr[O (rho - sigma)] <= ||O||_Lip W1(rho, sigma)``.  This sqrt(n) convention
is used by every function here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, minimize, minimize_scalar
from scipy.special import logsumexp

from .gibbs import relative_entropy
from .operators import (
    PAULI_MATRICES,
    LocalOperator,
    SiteSystem,
    embed_local,
    operator_norm,
    partial_trace,
    product_state,
    symmetrize,
    trace_norm,
)

# ---------------------------------------------------------------------------
# differential structures


@dataclass(frozen=True, eq=False)
class DifferentialStructure:
    """Jump operators ``L_k`` with Bohr frequencies ``omega_k``.

    Parameters
    ----------
    operators : sequence of ndarray
        Full-space matrices ``L_k``.
    omegas : sequence of float
    reference_state : ndarray
        Full-rank state ``sigma`` with ``sigma L_k sigma^-1 = exp(-omega_k) L_k``.
    """

    operators: tuple
    omegas: tuple
    reference_state: np.ndarray = field(repr=False)

    def __post_init__(self):
        ops = tuple(np.asarray(L, dtype=complex) for L in self.operators)
        omegas = tuple(float(w) for w in self.omegas)
        if len(ops) != len(omegas):
            raise ValueError("need one Bohr frequency per operator")
        sigma = symmetrize(np.asarray(self.reference_state))
        s, V = np.linalg.eigh(sigma)
        if s.min() <= 1e-12:
            raise ValueError("the reference state must be full rank")
        sigma_inv = (V / s) @ V.conj().T
        for k, (L, w) in enumerate(zip(ops, omegas)):
            if operator_norm(L) > 1 + 1e-10:
                raise ValueError(f"operator {k} has norm above 1")
            if not any(np.abs(L.conj().T - M).max() <= 1e-10 for M in ops):
                raise ValueError(f"operator {k} has no adjoint partner in the structure")
            lhs = sigma @ L @ sigma_inv
            if np.abs(lhs - math.exp(-w) * L).max() > 1e-8 * max(1.0, np.abs(L).max()):
                raise ValueError(f"operator {k} is not a modular eigenvector with frequency {w}")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "reference_state", sigma)


def pauli_structure(system: SiteSystem) -> DifferentialStructure:
    """All single-site Paulis with ``omega = 0``, adapted to ``I / 2^n``."""
    if system.d != 2:
        raise ValueError("the Pauli structure needs qubits")
    ops = [embed_local(LocalOperator((i,), PAULI_MATRICES[p]), system)
           for i in range(system.n) for p in "XYZ"]
    return DifferentialStructure(ops, [0.0] * len(ops), np.eye(system.dim) / system.dim)


def annihilation_structure(system: SiteSystem, p: float, unitary=None) -> DifferentialStructure:
    """Scaled single-site ladder operators adapted to ``U tau_p^{(x)n} U^dag``.

    Here ``tau_p = diag(p, 1 - p)``.  The operators are
    ``(p(1-p))^{1/4} U a_i U^dag`` and their adjoints, with ``a = |0><1|``,
    so ``tau_p a tau_p^{-1} = (p / (1-p)) a`` gives
    ``omega = log((1-p)/p)`` for ``a`` and its negative for ``a^dag``.
    With this scaling the weighted commutator sum reduces to
    ``sum_i ||[O, U a_i U^dag]||^2 + ||[O, U a_i^dag U^dag]||^2``.
    """
    if system.d != 2:
        raise ValueError("the ladder structure needs qubits")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    U = np.eye(system.dim) if unitary is None else np.asarray(unitary)
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    scale = (p * (1 - p)) ** 0.25
    w = math.log((1 - p) / p)
    ops, omegas = [], []
    for i in range(system.n):
        A = U @ embed_local(LocalOperator((i,), a, hermitian=False), system) @ U.conj().T
        ops += [scale * A, scale * A.conj().T]
        omegas += [w, -w]
    tau = np.diag([p, 1 - p])
    sigma = U @ product_state([tau] * system.n) @ U.conj().T
    return DifferentialStructure(ops, omegas, sigma)


def lip_diff(O, ds: DifferentialStructure) -> float:
    """Differential Lipschitz constant.

    ``sqrt(sum_k (exp(-omega_k/2) + exp(omega_k/2)) ||[L_k, O]||_inf^2)``
    """
    O = np.asarray(O)
    if O.shape != ds.reference_state.shape:
        raise ValueError("operator and structure dimensions differ")
    total = 0.0
    for L, w in zip(ds.operators, ds.omegas):
        total += (math.exp(-w / 2) + math.exp(w / 2)) * operator_norm(L @ O - O @ L) ** 2
    return math.sqrt(total)


def lip_diff_depolarizing(O, ds: DifferentialStructure) -> float:
    """The ``omega = 0`` variant ``sqrt(sum_k ||L_k O L_k - O||^2)`` (Pauli ``L_k``)."""
    O = np.asarray(O)
    return math.sqrt(sum(operator_norm(L @ O @ L - O) ** 2 for L in ds.operators))


# ---------------------------------------------------------------------------
# Hamming Lipschitz constant


def lip_hamming_upper(terms: Sequence[LocalOperator], n: int) -> float:
    """Locality bound ``2 sqrt(n) max_j #{i : j in supp O_i}``.

    Valid for ``O = sum_i O_i`` with every ``||O_i||_inf <= 1``.
    """
    counts = np.zeros(n, dtype=int)
    for op in terms:
        if operator_norm(op.matrix) > 1 + 1e-10:
            raise ValueError("terms must have operator norm at most 1")
        for s in op.support:
            if s >= n:
                raise ValueError(f"site {s} out of range for n={n}")
            counts[s] += 1
    return 2 * math.sqrt(n) * int(counts.max()) if len(terms) else 0.0


def _rest_embedding(Y, i, system):
    rest = tuple(j for j in range(system.n) if j != i)
    if not rest:
        return Y[0, 0] * np.eye(system.d)
    return embed_local(LocalOperator(rest, Y, hermitian=False), system)


def site_distance_upper(O, i, system) -> float:
    """``||O - I_i (x) tr_i(O)/d||_inf``, an upper bound on the site-``i`` distance."""
    Y = partial_trace(O, [i], system) / system.d
    return operator_norm(np.asarray(O) - _rest_embedding(Y, i, system))


def lip_hamming_certified_upper(O, system) -> float:
    """``2 sqrt(n) max_i ||O - I_i (x) tr_i(O)/d||``, a cheap valid upper bound."""
    return 2 * math.sqrt(system.n) * max(site_distance_upper(O, i, system) for i in range(system.n))


def _hermitian_basis(D):
    basis = []
    for j in range(D):
        E = np.zeros((D, D), complex)
        E[j, j] = 1
        basis.append(E)
    for j in range(D):
        for k in range(j + 1, D):
            E = np.zeros((D, D), complex)
            E[j, k] = E[k, j] = 1 / math.sqrt(2)
            basis.append(E)
            E = np.zeros((D, D), complex)
            E[j, k], E[k, j] = -1j / math.sqrt(2), 1j / math.sqrt(2)
            basis.append(E)
    return np.array(basis)


def _site_dual(O, i, system, target=None, tol=1e-6):
    """Minimize ``||O - I_i (x) Y||`` over Hermitian ``Y``.

    Starts at ``Y = tr_i(O)/d`` and minimizes the entropic smoothing
    ``mu log sum exp(+-eig/mu)`` of the largest singular value with L-BFGS for
    a decreasing sequence of ``mu``.  The returned value is the exact norm at
    the final ``Y`` and is therefore a certified upper bound.
    """
    D_rest = system.d ** (system.n - 1)
    basis = _hermitian_basis(D_rest)
    embedded = np.array([_rest_embedding(b, i, system) for b in basis])
    Y0 = partial_trace(O, [i], system) / system.d
    y = np.einsum("kab,ba->k", basis, Y0).real

    def exact(y):
        return float(np.abs(np.linalg.eigvalsh(O - np.tensordot(y, embedded, 1))).max())

    def smooth(y, mu):
        w, V = np.linalg.eigh(O - np.tensordot(y, embedded, 1))
        a = np.concatenate([w, -w]) / mu
        lse = logsumexp(a)
        p = np.exp(a - lse)
        G = (V * (p[: w.size] - p[w.size:])) @ V.conj().T
        return mu * lse, -np.einsum("kab,ba->k", embedded, G).real

    best_y, best = y, exact(y)
    for mu in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
        if target is not None and best - target <= tol / 4:
            break
        res = minimize(smooth, y, args=(mu,), jac=True, method="L-BFGS-B",
                       options={"maxiter": 2000, "gtol": 1e-13, "ftol": 1e-16})
        y = res.x
        val = exact(y)
        if val < best:
            best_y, best = y, val
    return best, np.tensordot(best_y, basis, 1)


def _site_primal(O, i, system):
    """Witness ``X`` (Hermitian, ``tr_i X = 0``, ``||X||_1 <= 1``) maximizing ``tr[O X]``.

    Solved as an SDP with cvxpy, then repaired so the constraints hold
    exactly; the returned value ``tr[O X]`` is a certified lower bound.
    """
    import cvxpy as cp

    D = system.dim
    P = cp.Variable((D, D), hermitian=True)
    N = cp.Variable((D, D), hermitian=True)
    X = P - N
    cons = [P >> 0, N >> 0, cp.real(cp.trace(P) + cp.trace(N)) <= 1,
            cp.partial_trace(X, [system.d] * system.n, axis=i) == 0]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(O @ X))), cons)
    try:
        prob.solve(solver="CLARABEL")
    except cp.SolverError:
        prob.solve(solver="SCS", eps=1e-9)
    Xv = np.asarray(X.value)
    Xv = Xv - _rest_embedding(partial_trace(Xv, [i], system), i, system) / system.d
    Xv = (Xv + Xv.conj().T) / 2
    norm = trace_norm(Xv)
    if norm == 0:
        return 0.0, Xv
    Xv /= norm
    return float(np.trace(O @ Xv).real), Xv


@dataclass(frozen=True)
class LipBracket:
    """Bracket ``lower <= ||O||_Lip <= upper``; ``value`` is set when tight."""

    lower: float
    upper: float
    value: float | None
    per_site: tuple


def lip_hamming_exact(O, system: SiteSystem, tol: float = 1e-6) -> LipBracket:
    """Exact Hamming Lipschitz constant for ``n <= 4`` by primal-dual bracketing.

    For each site the distance ``min_Y ||O - I_i (x) Y||`` is bracketed by a
    smoothed descent in ``Y`` (upper) and an SDP witness (lower).

    Parameters
    ----------
    O : array_like
        Hermitian operator on the full space.
    system : SiteSystem
    tol : float
        Maximum accepted width of the final bracket, relative to
        ``max(1, upper)``.

    Returns
    -------
    LipBracket
        ``value`` is the bracket midpoint when the width is within ``tol``,
        otherwise None.
    """
    if system.n > 4:
        raise ValueError("exact Hamming Lipschitz constants are limited to n <= 4")
    O = symmetrize(np.asarray(O))
    scale = 2 * math.sqrt(system.n)
    per_site = []
    for i in range(system.n):
        upper0 = site_distance_upper(O, i, system)
        if upper0 <= 1e-14:
            per_site.append((0.0, 0.0))
            continue
        low, _ = _site_primal(O, i, system)
        up, _ = _site_dual(O, i, system, target=low, tol=tol / scale)
        per_site.append((min(low, up), min(up, upper0)))
    lower = scale * max(p[0] for p in per_site)
    upper = scale * max(p[1] for p in per_site)
    value = (lower + upper) / 2 if upper - lower <= tol * max(1.0, upper) else None
    return LipBracket(lower, upper, value, tuple(per_site))


# ---------------------------------------------------------------------------
# Wasserstein-1 brackets


@dataclass(frozen=True, eq=False)
class W1Bounds:
    lower: float
    upper: float
    witness: np.ndarray | None = field(default=None, repr=False)
    witness_lip: float | None = None


def _marginal(X, keep, system):
    traced = [j for j in range(system.n) if j not in keep]
    return partial_trace(X, traced, system) if traced else np.asarray(X)


def _sign_operator(A):
    w, V = np.linalg.eigh(symmetrize(A))
    return (V * np.sign(w)) @ V.conj().T


def telescoping_upper(delta, system: SiteSystem, references=(), orders=None) -> float:
    """Value of the telescoping decomposition of ``delta = rho - sigma``.

    For an ordering ``pi`` and nested reference marginals ``tau``,
    ``X_k = tau_{<k} (x) tr_{<k} delta - tau_{<=k} (x) tr_{<=k} delta``
    satisfies ``tr_{pi_k} X_k = 0`` and sums to ``delta``.  Returns the
    smallest ``sum ||X_k||_1 / (2 sqrt n)`` over the given orderings and
    reference states (maximally mixed always included).
    """
    n, d = system.n, system.d
    delta = np.asarray(delta)
    if orders is None:
        if n <= 4:
            orders = list(itertools.permutations(range(n)))
        else:
            orders = [tuple(range(n)), tuple(reversed(range(n)))]
    refs = [None] + list(references)
    best = math.inf
    for order in orders:
        for ref in refs:
            total = 0.0
            prev = delta  # tau_{<k} (x) tr_{<k} delta, as a full operator
            for k in range(n):
                traced = set(order[: k + 1])
                kept = [j for j in range(n) if j not in traced]
                reduced = partial_trace(delta, sorted(traced), system)
                if ref is None:
                    tau = np.eye(d ** len(traced)) / d ** len(traced)
                else:
                    tau = _marginal(np.asarray(ref), sorted(traced), system)
                cur = _place(tau, sorted(traced), reduced, kept, system)
                total += trace_norm(prev - cur)
                prev = cur
            best = min(best, total)
    return best / (2 * math.sqrt(n))


def _place(A, sites_a, B, sites_b, system):
    """Full operator ``A (x) B`` with ``A`` on ``sites_a`` and ``B`` on ``sites_b``."""
    if not sites_b:
        return np.asarray(B).reshape(()) * _reorder(A, sites_a, system)
    if not sites_a:
        return _reorder(B, sites_b, system)
    return embed_local(LocalOperator(tuple(sites_a) + tuple(sites_b), np.kron(A, B), hermitian=False), system)


def _reorder(A, sites, system):
    return embed_local(LocalOperator(tuple(sites), A, hermitian=False), system)


def _two_local_paulis(n, all_pairs):
    labels = []
    for i in range(n):
        for p in "XYZ":
            labels.append({i: p})
    pairs = itertools.combinations(range(n), 2) if all_pairs else ((i, i + 1) for i in range(n - 1))
    for i, j in pairs:
        for p in "XYZ":
            for q in "XYZ":
                labels.append({i: p, j: q})
    return labels


def _pauli_full(letters, system):
    sites = sorted(letters)
    mat = product_state([PAULI_MATRICES[letters[s]] for s in sites])
    return embed_local(LocalOperator(tuple(sites), mat), system)


def hamming_witness(delta, system: SiteSystem, sweeps: int | None = None):
    """Best witness ``O`` found for ``sup tr[O delta] / ||O||_Lip``.

    Starts from the optimal 1-local witness (sign operators of the one-site
    marginals, value ``sum_i ||delta_i||_1 / (2 sqrt n)``), then for qubits
    runs coordinate-wise line searches over 1- and 2-local Pauli coefficients.
    Each candidate is scored with the certified upper bound
    :func:`lip_hamming_certified_upper`, so the returned ratio is a valid
    lower bound on ``W1``.

    Returns
    -------
    (value, O, lip_upper)
    """
    n, d = system.n, system.d
    delta = np.asarray(delta)
    O = np.zeros_like(delta)
    for i in range(n):
        di = _marginal(delta, [i], system)
        if trace_norm(di) > 0:
            O = O + embed_local(LocalOperator((i,), _sign_operator(di)), system)
    lip = lip_hamming_certified_upper(O, system)
    best = float(np.trace(O @ delta).real) / lip if lip > 0 else 0.0
    if sweeps is None:
        sweeps = 1 if (d == 2 and system.dim <= 64) else 0
    if sweeps == 0 or d != 2 or best == 0:
        return best, O, lip

    labels = _two_local_paulis(n, all_pairs=n <= 4)
    paulis = [_pauli_full(l, system) for l in labels]
    overlaps = np.array([np.trace(P @ delta).real for P in paulis])
    # expand the starting witness in the Pauli family (it is 1-local)
    coef = np.array([np.trace(P @ O).real / system.dim for P in paulis])
    base = O - np.tensordot(coef, np.array(paulis), 1)
    rows = [np.array([i in l for l in labels]) for i in range(n)]
    stacked = np.array(paulis)

    def ratio(c):
        op = base + np.tensordot(c, stacked, 1)
        lip_c = 2 * math.sqrt(n) * max(
            operator_norm(np.tensordot(c[rows[i]], stacked[rows[i]], 1) + _local_part(base, i, system))
            for i in range(n))
        return (float(overlaps @ c) + float(np.trace(base @ delta).real)) / lip_c if lip_c > 0 else 0.0

    for _ in range(sweeps):
        for k in range(len(labels)):
            def neg(x, k=k):
                c = coef.copy()
                c[k] = x
                return -ratio(c)
            res = minimize_scalar(neg, bounds=(coef[k] - 1.0, coef[k] + 1.0), method="bounded",
                                  options={"xatol": 1e-6})
            if -res.fun > best:
                coef[k] = res.x
                best = -res.fun
    O = base + np.tensordot(coef, stacked, 1)
    lip = lip_hamming_certified_upper(O, system)
    return float(np.trace(O @ delta).real) / lip, O, lip


def _local_part(A, i, system):
    Y = partial_trace(A, [i], system) / system.d
    return A - _rest_embedding(Y, i, system)


def loc_witness(delta, system: SiteSystem, k: int, g: float):
    """Optimal (k, g) quasi-local witness by linear programming.

    ``sup tr[X delta]`` over ``X = sum_A X_A`` with ``|A| <= k`` and
    ``sum_{A contains v} ||X_A|| <= g`` equals the LP
    ``max sum_A t_A ||delta_A||_1`` s.t. ``sum_{A contains v} t_A <= g``,
    ``t >= 0``, attained by ``X_A = t_A sign(delta_A)``.

    Returns
    -------
    (primal_value, dual_value, X, weights)
        ``primal_value`` is ``tr[X delta]`` for the explicit witness;
        ``dual_value`` is ``g sum_v y_v`` for a dual-feasible ``y``.
    """
    n = system.n
    subsets = [A for r in range(1, k + 1) for A in itertools.combinations(range(n), r)]
    marg = [_marginal(delta, list(A), system) for A in subsets]
    a = np.array([trace_norm(m) for m in marg])
    A_ub = np.zeros((n, len(subsets)))
    for col, A in enumerate(subsets):
        A_ub[list(A), col] = 1.0
    res = linprog(-a, A_ub=A_ub, b_ub=np.full(n, float(g)), bounds=(0, None), method="highs")
    t = np.clip(res.x, 0, None)
    # rescale so the per-site budgets hold exactly
    load = A_ub @ t
    if load.max() > g:
        t *= g / load.max()
    X = np.zeros_like(np.asarray(delta))
    for w, A, m in zip(t, subsets, marg):
        if w > 0:
            X = X + w * embed_local(LocalOperator(A, _sign_operator(m)), system)
    primal = float(np.trace(X @ delta).real)
    y = np.clip(-res.ineqlin.marginals, 0, None)
    cover = A_ub.T @ y
    needed = np.where(a > 0, a / np.where(cover > 0, cover, 1.0), 0.0)
    if np.any((cover == 0) & (a > 0)):
        y = y + a.max()
        cover = A_ub.T @ y
        needed = a / cover
    y = y * max(1.0, needed.max())
    dual = float(g * y.sum())
    return primal, max(dual, primal), X, dict(zip(subsets, t))


def w1_bounds(rho, sigma, system: SiteSystem, mode: str = "hamming", k: int | None = None,
              g: float | None = None, alpha: float | None = None, sweeps: int | None = None) -> W1Bounds:
    """Certified bracket on the Wasserstein-1 distance.

    Parameters
    ----------
    rho, sigma : array_like
    system : SiteSystem
    mode : {"hamming", "loc"}
        ``hamming`` brackets ``W1`` in the sqrt(n) normalization; ``loc``
        computes ``W1_loc = sup tr[X (rho - sigma)] / sqrt(n)`` over the
        (k, g) quasi-local class (lower and upper agree up to LP accuracy).
    alpha : float, optional
        Transportation-cost constant of ``sigma``.  When given, the upper
        bound also uses ``sqrt(D(rho||sigma) / (2 alpha))``, which is only
        valid if the inequality holds for ``sigma``.
    """
    delta = np.asarray(rho) - np.asarray(sigma)
    if np.abs(delta).max() == 0:
        return W1Bounds(0.0, 0.0, np.zeros_like(delta), 0.0)
    if mode == "loc":
        if k is None or g is None:
            raise ValueError("loc mode needs k and g")
        primal, dual, X, _ = loc_witness(delta, system, k, g)
        root = math.sqrt(system.n)
        return W1Bounds(primal / root, dual / root, X, None)
    if mode != "hamming":
        raise ValueError(f"unknown mode {mode!r}")
    value, O, lip = hamming_witness(delta, system, sweeps)
    upper = telescoping_upper(delta, system, references=(np.asarray(sigma), np.asarray(rho)))
    if alpha is not None:
        upper = min(upper, math.sqrt(relative_entropy(rho, sigma) / (2 * alpha)))
    return W1Bounds(min(value, upper), upper, O, lip)


# ---------------------------------------------------------------------------
# transportation cost


def tc_constant_local(k: int, g: float, beta: float) -> dict:
    """Critical inverse temperature ``1/(8 e^3 g k)`` and TC factor.

    Returns ``beta_c`` and ``tc_factor = sqrt(2 g / (beta_c - beta))`` so that
    ``W1_loc <= tc_factor sqrt(D)`` for ``0 <= beta < beta_c``.
    """
    if k < 1 or not g > 0:
        raise ValueError("need k >= 1 and g > 0")
    beta_c = 1.0 / (8 * math.e**3 * g * k)
    if beta < 0 or beta >= beta_c:
        raise ValueError(f"beta = {beta} must lie in [0, beta_c = {beta_c})")
    return {"beta_c": beta_c, "tc_factor": math.sqrt(2 * g / (beta_c - beta))}


@dataclass(frozen=True)
class TCReport:
    rows: tuple
    n_violations: int


def tc_verify(sigma, ensemble: Sequence, system: SiteSystem, alpha: float, w1_mode: str = "hamming",
              k: int | None = None, g: float | None = None, sweeps: int | None = None) -> TCReport:
    """Check ``W1(rho, sigma) <= sqrt(D(rho||sigma) / (2 alpha))`` against certified lower bounds.

    A row is ``violated`` when the certified lower bound exceeds the
    right-hand side by more than 1e-9, which falsifies the claimed
    ``alpha``.  For ``w1_mode="loc"`` pass ``alpha = 1 / (2 tc_factor^2)``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rows = []
    for rho in ensemble:
        D = relative_entropy(rho, sigma)
        b = w1_bounds(rho, sigma, system, w1_mode, k, g, sweeps=sweeps)
        rhs = math.sqrt(D / (2 * alpha))
        rows.append({"w1_lower": b.lower, "w1_upper": b.upper, "D": D, "tc_rhs": rhs,
                     "violated": bool(b.lower > rhs + 1e-9)})
    return TCReport(tuple(rows), sum(r["violated"] for r in rows))


# ---------------------------------------------------------------------------
# worked bounds


def lr_growth_1d(k: int, v: float, mu_decay: float, t: float, n: int) -> float:
    """``sqrt(n-k) (k + (e^{vt} - 1) e^{-mu} / (1 - e^{-mu}))``."""
    if not mu_decay > 0 or t < 0 or not 1 <= k < n:
        raise ValueError("need mu_decay > 0, t >= 0 and 1 <= k < n")
    q = math.exp(-mu_decay)
    return math.sqrt(n - k) * (k + math.expm1(v * t) * q / (1 - q))


def shallow_surrogate(eps: float, n: int) -> dict:
    """Relative entropy between ``|0><0|`` and the surrogate ``e^{beta Z}/tr``.

    ``beta_eps = log(1/eps)``.  Reports the exact per-qubit divergence (via
    the engine), its closed form ``log(1 + e^{-2 beta})``, the total over
    ``n`` qubits, the target ``n eps`` and, for comparison, the expression
    ``n e^{beta} (1 - log(1 - e^{-2 beta}))`` from the original chain of
    inequalities.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    beta = math.log(1 / eps)
    rho = np.diag([1.0, 0.0])
    w = np.array([beta, -beta])
    sigma = np.diag(np.exp(w - logsumexp(w)))
    exact = relative_entropy(rho, sigma)
    stated = n * math.exp(beta) * (1 - math.log1p(-math.exp(-2 * beta))) if eps < 1 else math.inf
    return {
        "beta_eps": beta,
        "d_exact_per_qubit": exact,
        "d_closed_form_per_qubit": math.log1p(math.exp(-2 * beta)),
        "d_total": n * exact,
        "stated_bound": n * eps,
        "stated_chain_expression": stated,
    }
