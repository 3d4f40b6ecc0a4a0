"""End-to-end pipelines behind the command-line interface.

Every stage draws randomness from :func:`derive_seed`, a SHA-256 hash of
``(master_seed, stage, index)``, so runs are reproducible from the master
seed alone.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import chain as ch
from .commuting import (
    DecaySpec,
    contraction_coefficient_max,
    correlation_fit,
    hessian_lower_bound,
    hessian_upper_bound_decay,
    hypergraph_from_model,
    require_orthogonal_traceless,
)
from .gibbs import (
    GibbsModel,
    dual_gradient,
    dual_hessian,
    dual_objective,
    expectations,
    gibbs_state,
    relative_entropy,
    symmetric_divergence,
)
from .operators import LocalOperator, SiteSystem, product_state
from .shadows import ShadowScheme, default_batches, default_delta, estimate, plan_samples, sample
from .solver import SolverOptions, solve
from .wasserstein import tc_constant_local, tc_verify


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def derive_seed(master_seed: int, stage: str, index: int = 0) -> int:
    """64-bit seed from ``sha256(f"{master_seed}:{stage}:{index}")``."""
    digest = hashlib.sha256(f"{int(master_seed)}:{stage}:{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def solver_options(cfg: dict | None) -> SolverOptions:
    cfg = dict(cfg or {})
    allowed = {"c", "U", "L", "delta_mu", "max_iters", "trace_every", "stall_tol", "audit", "target_error"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ValueError(f"unknown solver options {sorted(unknown)}")
    return SolverOptions(**cfg)


# ---------------------------------------------------------------------------
# reconstruction


def reconstruct_quantum(model: GibbsModel, lam, estimation: dict, opts: SolverOptions, master_seed: int):
    """Estimate ``e(lambda)`` (exact, shadows or given) and run the solver."""
    source = estimation.get("source", "exact")
    seeds = {}
    if source == "exact":
        e_hat = expectations(model, lam)
        report = None
    elif source == "shadows":
        eps = float(estimation.get("eps", 0.1))
        delta = estimation.get("delta") or default_delta(model.system.n)
        k = max(E.locality for E in model.basis)
        N = estimation.get("N") or plan_samples(k, model.m, eps, delta)
        K = estimation.get("batches") or default_batches(model.m, delta)
        seeds["shadows"] = derive_seed(master_seed, "shadows")
        batch = sample(gibbs_state(model, lam), ShadowScheme(K, seeds["shadows"]), int(N),
                       n=model.system.n, state_id="sigma(lambda)")
        report = estimate(batch, model.basis, eps, delta)
        e_hat = report.estimates
    elif source == "file":
        e_hat = np.array(estimation["values"], dtype=float)
        report = None
    else:
        raise ValueError(f"unknown estimation source {source!r}")
    result = solve(model, e_hat, None, opts, lambda_true=lam if lam is not None else None)
    return e_hat, report, result, seeds


def chain_certified_divergence(beta, m, eps_stat, residual):
    """``2 beta (m eps + sqrt(m) r)`` bounds the symmetric divergence to the truth.

    Uses ``|lambda - mu|_inf <= 2`` inside the unit box,
    ``|e(lambda) - e_hat|_inf <= eps`` and ``|e_hat - e(mu)|_2 = r``.
    """
    return 2 * beta * (m * eps_stat + math.sqrt(m) * residual)


def hoeffding_eps(N: int, m: int, delta: float) -> float:
    """Max-norm accuracy of ``m`` empirical means of ``+-1`` variables, w.p. ``1 - delta``."""
    return math.sqrt(2 * math.log(2 * m / delta) / N)


def fig_pinsker_row(n: int, seed_index: int, master_seed: int, samples: int = 1000, beta: float = 1.0,
                    depth: int = 3, solver: dict | None = None, delta: float | None = None) -> dict:
    """One row of the chain-reconstruction observable-error sweep.

    Draws a random open chain (``J ~ U[-1, 1]``, no fields), samples it
    exactly, estimates all ``Z_i Z_{i+1}``, reconstructs by max-entropy and
    reports the windowed error of ``n^{-1} sum_i U Z_i Z_{i+2} U^dag`` for a
    depth-``depth`` Haar brickwork ``U`` together with the bounds.
    """
    opts = solver_options({"delta_mu": 1e-6, "trace_every": 0, "stall_tol": 1e-12, "max_iters": 50_000,
                           **(solver or {})})
    seeds = {stage: derive_seed(master_seed, f"fig-pinsker/{stage}/n={n}", seed_index)
             for stage in ("couplings", "samples", "circuit")}
    circuit = ch.brickwork_circuit(n, depth, seeds["circuit"])
    _, lo, hi = ch._light_cone(circuit, [n // 2 - 1, n // 2 + 1])
    if hi - lo + 1 > 12:
        raise ValueError(f"light cone of width {hi - lo + 1} exceeds the cap 12")
    spec = ch.random_chain(n, beta, np.random.default_rng(seeds["couplings"]))
    configs = ch.chain_sample(spec, samples, seeds["samples"]).configurations
    family = ch.ChainFamily(n, beta, "open", fields=False)
    from .shadows import estimate_classical

    e_hat = estimate_classical(configs, family.observables()).estimates
    rec, result = ch.chain_maxent_reconstruct(e_hat, n, beta, opts, "open", fields=False)
    error = ch.windowed_observable_error(spec, rec, circuit)
    lam = family.params(spec)
    d_exact = family.symmetric_divergence(lam, result.mu_star)
    delta = delta if delta is not None else default_delta(n)
    eps_stat = hoeffding_eps(samples, family.m, delta)
    d_bound = chain_certified_divergence(beta, family.m, eps_stat, result.residual)
    op_norm = (n - 2) / n  # n^{-1} sum of n-2 unit-norm terms
    width = 2 * depth + 3
    lip_over_root_n = 2 * min(width, n) / n  # locality bound / sqrt(n)
    return {
        "n": n,
        "seed": seed_index,
        "samples": samples,
        "d_sym_bound": d_bound,
        "observable_error": error,
        "bound": op_norm * math.sqrt(d_bound),
        "d_sym_exact": d_exact,
        "pinsker_exact_bound": op_norm * math.sqrt(max(d_exact, 0.0)),
        "tc_style_bound": lip_over_root_n * math.sqrt(max(d_exact, 0.0) / 2),
        "halting": result.halting,
        "iterations": result.n_iters,
        "circuit_seed": seeds["circuit"],
    }


def _row_job(args):
    n, i, master, kwargs = args
    try:
        return fig_pinsker_row(n, i, master, **kwargs)
    except Exception as exc:  # recorded, sweep continues
        return {"n": n, "seed": i, "error": f"{type(exc).__name__}: {exc}"}


def run_fig_pinsker(n_values, seeds: int, master_seed: int, threads: int = 1, **kwargs) -> list:
    """All rows of the sweep, in ``(n, seed)`` order regardless of ``threads``."""
    jobs = [(n, i, master_seed, kwargs) for n in n_values for i in range(seeds)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_row_job, jobs))
    return [_row_job(j) for j in jobs]


# ---------------------------------------------------------------------------
# identity audit


def verify_model(model: GibbsModel, lam, master_seed: int = 0, n_points: int = 3,
                 fault_injection: str | None = None) -> list:
    """Run the invariant suite at random ``mu`` and report pass/fail per item.

    Items: entropy identity, gradient vs finite differences, spectral vs
    finite-difference Hessian, commuting closed form (if applicable), the
    ``2 beta^2 m`` upper bound together with positive semidefiniteness
    (the Hessian sandwich), stationarity at ``lambda`` and Pinsker.
    ``fault_injection="hessian"`` corrupts the spectral Hessian (testing hook).
    """
    rng = np.random.default_rng(derive_seed(master_seed, "verify"))
    lam = np.asarray(lam, dtype=float)
    e_lam = expectations(model, lam)
    beta, m = model.beta, model.m

    def hessian(mu):
        H = dual_hessian(model, mu, "spectral")
        if fault_injection == "hessian":
            H = H + 10 * beta**2 * m * np.eye(m)
        return H

    worst = {"entropy_identity": 0.0, "gradient_fd": 0.0, "hessian_fd": 0.0, "hessian_commuting": 0.0,
             "hessian_sandwich": -math.inf, "pinsker": -math.inf}
    for _ in range(n_points):
        mu = rng.uniform(-1, 1, m)
        sd = symmetric_divergence(model, lam, mu)
        worst["entropy_identity"] = max(worst["entropy_identity"], sd.residual / max(1.0, sd.direct))
        h = 1e-5
        fd = np.array([(dual_objective(model, mu + h * e, e_lam) - dual_objective(model, mu - h * e, e_lam)) / (2 * h)
                       for e in np.eye(m)])
        worst["gradient_fd"] = max(worst["gradient_fd"], float(np.abs(fd - dual_gradient(model, mu, e_lam)).max()))
        H = hessian(mu)
        worst["hessian_fd"] = max(worst["hessian_fd"], float(np.abs(H - dual_hessian(model, mu, "finite_diff")).max()))
        if model.commuting_flag:
            worst["hessian_commuting"] = max(worst["hessian_commuting"],
                                             float(np.abs(H - dual_hessian(model, mu, "commuting")).max()))
        w = np.linalg.eigvalsh(H)
        worst["hessian_sandwich"] = max(worst["hessian_sandwich"], w[-1] - 2 * beta**2 * m, -w[0])
        td = model.trace_distance(lam, mu)
        worst["pinsker"] = max(worst["pinsker"], td**2 - sd.direct)
    stationarity = float(np.abs(dual_gradient(model, lam, e_lam)).max())
    items = [
        ("entropy_identity", worst["entropy_identity"], 1e-8),
        ("gradient_fd", worst["gradient_fd"], 1e-6),
        ("hessian_fd", worst["hessian_fd"], 1e-5),
        ("hessian_sandwich", worst["hessian_sandwich"], 1e-9),
        ("stationarity", stationarity, 1e-10),
        ("pinsker", worst["pinsker"], 1e-10),
    ]
    if model.commuting_flag:
        items.insert(3, ("hessian_commuting", worst["hessian_commuting"], 1e-8))
    return [{"item": name, "value": float(val), "tolerance": tol, "passed": bool(val <= tol)}
            for name, val, tol in items]


# ---------------------------------------------------------------------------
# commuting bounds


def ising_chain_model(n: int, beta: float, fields: bool = True, periodic: bool = False) -> GibbsModel:
    """Basis ``Z_i Z_{i+1}`` (and ``Z_i``) on ``n`` qubits."""
    bonds = n if periodic else n - 1
    labels = [f"Z{i + 1}*Z{(i + 1) % n + 1}" for i in range(bonds)]
    if fields:
        labels += [f"Z{i + 1}" for i in range(n)]
    return GibbsModel([LocalOperator.from_pauli(l) for l in labels], beta, SiteSystem(n))


def contraction_max_all_sites(model: GibbsModel, points: int = 5, seed: int = 0) -> float:
    return max(contraction_coefficient_max(model, x, points=points, seed=seed)["value"]
               for x in range(model.system.n))


def correlation_pairs(model: GibbsModel):
    """All ``(Z_i, Z_j, |i - j|)`` pairs with the hypergraph distance."""
    graph = hypergraph_from_model(model)
    pairs = []
    for i, j in itertools.combinations(range(model.system.n), 2):
        Zi = LocalOperator.from_pauli(f"Z{i + 1}")
        Zj = LocalOperator.from_pauli(f"Z{j + 1}")
        pairs.append((Zi, Zj, graph.distances[i, j]))
    return pairs


def bounds_report(model: GibbsModel, mus, c_beta: float | None = None, seed: int = 0) -> dict:
    """Hessian sandwich at each ``mu``.

    ``U_bound`` is the smaller of ``2 beta^2 m`` and the decay bound with
    overlapping terms included (always valid); ``U_decay_stated`` is the
    decay formula as stated (positive distances only).
    """
    if not model.commuting_flag:
        raise ValueError("the commuting bounds need a commuting basis")
    require_orthogonal_traceless(model)
    graph = hypergraph_from_model(model)
    if c_beta is None:
        c_beta = contraction_max_all_sites(model, seed=seed)
    L = hessian_lower_bound(model.beta, model.system.d, graph, c_beta)
    pairs = correlation_pairs(model)
    rows = []
    for mu in mus:
        mu = np.asarray(mu, dtype=float)
        w = np.linalg.eigvalsh(dual_hessian(model, mu, "commuting"))
        sigma = np.asarray(gibbs_state(model, mu))
        try:
            decay = correlation_fit(sigma, pairs, model.system, envelope=True) if len(pairs) >= 3 else None
        except ValueError:
            decay = None
        U_generic = 2 * model.beta**2 * model.m
        if decay is not None:
            stated = hessian_upper_bound_decay(decay, model.beta, model.system.d, graph)
            corrected = hessian_upper_bound_decay(decay, model.beta, model.system.d, graph, include_overlapping=True)
        else:
            stated = corrected = math.inf
        U = min(U_generic, corrected)
        rows.append({
            "mu": [float(x) for x in mu],
            "lambda_min": float(w[0]),
            "lambda_max": float(w[-1]),
            "L_bound": L,
            "U_bound": U,
            "U_generic": U_generic,
            "U_decay_stated": stated,
            "condition_number": float(w[-1] / w[0]) if w[0] > 0 else math.inf,
            "sandwich_holds": bool(L <= w[0] + 1e-12 and w[-1] <= U + 1e-9),
        })
    return {"beta": model.beta, "c_beta": c_beta, "r0": graph.r0, "rows": rows}


def mu_grid(m: int, points: int, max_points: int, rng) -> list:
    """Full grid over ``[-1, 1]^m`` if small enough, otherwise a random subset."""
    axis = np.linspace(-1, 1, points)
    total = points**m
    if total <= max_points:
        return [np.array(p) for p in itertools.product(axis, repeat=m)]
    picks = rng.choice(points, size=(max_points, m))
    return [axis[p] for p in picks]


# ---------------------------------------------------------------------------
# transportation cost


def perturbed_product_ensemble(n: int, p: float, size: int, strength: float, rng, mix: bool = True) -> list:
    """Product states near ``tau_p^{(x)n}``, optionally alternating with entangled mixtures.

    Product entries shift every site's Bloch vector by a random vector of
    length at most ``strength``.  With ``mix=True`` every odd entry instead
    mixes ``tau_p^{(x)n}`` with a random pure state of weight at most
    ``strength``.
    """
    tau = np.diag([p, 1 - p]).astype(complex)
    base = product_state([tau] * n)
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    out = []
    for k in range(size):
        if k % 2 == 0 or not mix:
            sites = []
            for _ in range(n):
                r = rng.normal(size=3)
                r *= strength * rng.uniform() / np.linalg.norm(r)
                bloch = np.array([0, 0, 2 * p - 1]) + r
                if np.linalg.norm(bloch) > 1:
                    bloch /= np.linalg.norm(bloch)
                sites.append((np.eye(2) + sum(b * P for b, P in zip(bloch, paulis))) / 2)
            out.append(product_state(sites))
        else:
            v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
            v /= np.linalg.norm(v)
            t = strength * rng.uniform()
            out.append((1 - t) * base + t * np.outer(v, v.conj()))
    return out


def gibbs_ensemble(model: GibbsModel, lam, size: int, strength: float, rng) -> list:
    """Gibbs states at perturbed parameters plus mixtures with random pure states."""
    out = []
    sigma = np.asarray(gibbs_state(model, lam))
    D = model.system.dim
    for k in range(size):
        if k % 2 == 0:
            mu = np.clip(np.asarray(lam) + strength * rng.uniform(-1, 1, model.m), -1, 1)
            out.append(np.asarray(gibbs_state(model, mu)))
        else:
            v = rng.normal(size=D) + 1j * rng.normal(size=D)
            v /= np.linalg.norm(v)
            t = strength * rng.uniform()
            out.append((1 - t) * sigma + t * np.outer(v, v.conj()))
    return out


def two_local_model(n: int, beta: float) -> GibbsModel:
    """Nearest-neighbour ``X X``/``Z Z`` chain: a (2, 1) quasi-local family.

    Every site lies in the support of at most two terms, so with couplings
    ``|mu_i| <= 1/2`` the per-site budget ``g = 1`` holds.
    """
    labels = []
    for i in range(n - 1):
        labels += [f"X{i + 1}*X{i + 2}", f"Z{i + 1}*Z{i + 2}"]
    return GibbsModel([LocalOperator.from_pauli(l) for l in labels], beta, SiteSystem(n))
