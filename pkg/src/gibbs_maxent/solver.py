"""Projected gradient descent on the max-entropy dual.

The solver works on any *family* object exposing ``beta``, ``m``,
``expectations(mu)`` and ``log_partition(mu)`` (and, for audits,
``symmetric_divergence(lam, mu)``).  :class:`~gibbs_maxent.gibbs.GibbsModel`
and :class:`~gibbs_maxent.chain.ChainFamily` both qualify.

Iterates follow ``mu <- clip(mu - z / (c U), -1, 1)`` with
``z = beta (e_hat - e'(mu))`` where ``e'`` is the gradient oracle, starting
from ``mu = 0``.  The run halts once ``||e_hat - e'(mu)||_2 < (4c + 1) delta_mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .shadows import ShadowScheme, estimate, sample


class OracleContractError(RuntimeError):
    """The gradient oracle returned an estimate outside its declared accuracy."""


@dataclass(frozen=True)
class SolverOptions:
    """Options for :func:`solve`.

    Parameters
    ----------
    c : float
        Step-size safety constant, must exceed 10.
    U : float, optional
        Upper bound on the Hessian; defaults to the family's own bound
        (``hessian_upper_bound()``) or ``2 beta^2 m``.
    L : float, optional
        Lower bound on the Hessian (strong convexity), if known.
    delta_mu : float
        Accuracy of the gradient oracle in the Euclidean norm.
    max_iters : int
    trace_every : int
        Record ``(t, mu, f, ||grad||)`` every this many steps; 0 disables.
    stall_tol : float, optional
        Halt with reason ``"stalled"`` once the projected step has Euclidean
        length below ``stall_tol``.  Useful when ``e_hat`` is not attainable
        inside the box, so the stopping rule can never fire.  ``None``
        disables the check.
    audit : bool
        Check the oracle against exact expectations every step.
    target_error : float
        Known bound on ``||e_hat - e(lambda)||_inf``.  Adds ``2 beta eps m`` to
        the divergence bound.
    """

    c: float = 11.0
    U: float | None = None
    L: float | None = None
    delta_mu: float = 1e-6
    max_iters: int = 100_000
    trace_every: int = 1
    stall_tol: float | None = None
    audit: bool = False
    target_error: float = 0.0

    def __post_init__(self):
        if not self.c > 10:
            raise ValueError("the safety constant c must exceed 10")
        if self.U is not None and not self.U > 0:
            raise ValueError("U must be positive")
        if not self.delta_mu > 0:
            raise ValueError("delta_mu must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass(frozen=True)
class Certificate:
    """Post-hoc guarantee implied by the stopping rule.

    ``valid`` is False unless the run halted by the stopping rule, in which
    case the bounds do not apply.
    """

    d_sym_bound: float
    trace_dist_bound: float
    valid: bool
    exact_d_sym: float | None = None
    exact_trace_dist: float | None = None


@dataclass(frozen=True, eq=False)
class SolverResult:
    mu_star: np.ndarray
    halting: str
    n_iters: int
    residual: float
    U: float
    certificate: Certificate
    iterates: tuple = field(default=(), repr=False)

    def trajectory_rows(self):
        """Rows ``(iter, f, grad_norm, d_sym_exact)`` of the recorded trajectory."""
        return [(it["t"], it["f"], it["grad_norm"], it.get("d_sym_exact")) for it in self.iterates]


def default_upper_bound(family) -> float:
    """Family-specific Hessian bound if provided, else ``2 beta^2 m``."""
    if hasattr(family, "hessian_upper_bound"):
        return float(family.hessian_upper_bound())
    return 2.0 * family.beta**2 * family.m


def certificate_bound(c, beta, delta_mu, m, target_error=0.0) -> float:
    """``2 (4c + 1) beta delta_mu sqrt(m)`` plus ``2 beta eps m`` for a noisy target."""
    return 2 * (4 * c + 1) * beta * delta_mu * math.sqrt(m) + 2 * beta * target_error * m


# ---------------------------------------------------------------------------
# gradient oracles


class ExactOracle:
    """Exact expectations of the family (``delta_mu = 0``)."""

    delta_mu = 0.0

    def __init__(self, family):
        self.family = family

    def __call__(self, mu):
        return self.family.expectations(mu)


class NoisyOracle:
    """Exact expectations plus noise of Euclidean norm at most ``delta_mu``.

    The noise direction is uniform on the sphere and its radius uniform in
    ``[0, delta_mu]``.  ``scale > 1`` deliberately breaks the contract (for
    testing the audit).
    """

    def __init__(self, family, delta_mu, seed=0, scale=1.0):
        self.family = family
        self.delta_mu = float(delta_mu)
        self.scale = scale
        self.rng = np.random.default_rng(seed)

    def __call__(self, mu):
        v = self.rng.standard_normal(self.family.m)
        v /= np.linalg.norm(v)
        radius = self.delta_mu * self.rng.uniform() * self.scale
        return self.family.expectations(mu) + radius * v


class ShadowOracle:
    """Shadow estimates of ``e(mu)`` from fresh snapshots of ``sigma(mu)``.

    Needs a :class:`~gibbs_maxent.gibbs.GibbsModel` with Pauli-string basis.
    Call ``t`` uses the seed ``(seed, t)``.  ``delta_mu`` is the planned
    Euclidean accuracy ``sqrt(m) eps`` (holds with the planned probability).
    """

    def __init__(self, model, N, eps, batches=1, seed=0):
        self.model = model
        self.N = int(N)
        self.delta_mu = math.sqrt(model.m) * eps
        self.batches = batches
        self.seed = seed
        self.calls = 0

    def __call__(self, mu):
        from .gibbs import gibbs_state

        scheme = ShadowScheme(self.batches, self.seed)
        ss = np.random.SeedSequence([self.seed, self.calls])
        self.calls += 1
        batch = sample(gibbs_state(self.model, mu), scheme, self.N,
                       seed=int(ss.generate_state(1)[0]), n=self.model.system.n)
        return estimate(batch, self.model.basis).estimates


# ---------------------------------------------------------------------------


def solve(family, e_hat, grad_oracle: Callable | None = None, opts: SolverOptions = SolverOptions(),
          lambda_true=None) -> SolverResult:
    """Run projected gradient descent on the max-entropy dual.

    Parameters
    ----------
    family : GibbsModel or ChainFamily
    e_hat : array_like
        Target expectation values.
    grad_oracle : callable, optional
        Maps ``mu`` to an estimate ``e'(mu)`` of ``e(mu)``; defaults to the
        family's exact expectations.
    opts : SolverOptions
    lambda_true : array_like, optional
        True parameters (simulation mode); fills the exact fields of the
        certificate and the ``d_sym_exact`` trajectory column.

    Returns
    -------
    SolverResult
    """
    e_hat = np.asarray(e_hat, dtype=float)
    if e_hat.shape != (family.m,):
        raise ValueError(f"e_hat has shape {e_hat.shape}, expected ({family.m},)")
    oracle = grad_oracle if grad_oracle is not None else ExactOracle(family)
    beta, m = family.beta, family.m
    U = opts.U if opts.U is not None else default_upper_bound(family)
    c = opts.c
    threshold = (4 * c + 1) * opts.delta_mu
    lam = None if lambda_true is None else np.asarray(lambda_true, dtype=float)

    mu = np.zeros(m)
    iterates = []
    t = 0
    halting = "max_iters"
    while True:
        e_prime = np.asarray(oracle(mu), dtype=float)
        if opts.audit:
            gap = np.linalg.norm(e_prime - family.expectations(mu))
            if gap > opts.delta_mu * (1 + 1e-9) + 1e-12:
                raise OracleContractError(
                    f"oracle error {gap:.3g} exceeds delta_mu = {opts.delta_mu:.3g} at iteration {t}"
                )
        r = float(np.linalg.norm(e_hat - e_prime))
        if opts.trace_every and t % opts.trace_every == 0:
            rec = {"t": t, "mu": mu.copy(), "grad_norm": beta * r,
                   "f": family.log_partition(mu) + beta * float(mu @ e_hat)}
            if lam is not None:
                rec["d_sym_exact"] = family.symmetric_divergence(lam, mu)
            iterates.append(rec)
        if r < threshold:
            halting = "stopping_rule"
            break
        if t >= opts.max_iters:
            break
        z = beta * (e_hat - e_prime)
        new = np.clip(mu - z / (c * U), -1.0, 1.0)
        step = float(np.linalg.norm(new - mu))
        mu = new
        t += 1
        if opts.stall_tol is not None and step < opts.stall_tol:
            halting = "stalled"
            r = float(np.linalg.norm(e_hat - np.asarray(oracle(mu), dtype=float)))
            break

    bound = certificate_bound(c, beta, opts.delta_mu, m, opts.target_error)
    exact = exact_td = None
    if lam is not None:
        exact = family.symmetric_divergence(lam, mu)
        if hasattr(family, "trace_distance"):
            exact_td = family.trace_distance(lam, mu)
    cert = Certificate(bound, math.sqrt(bound), halting == "stopping_rule", exact, exact_td)
    return SolverResult(mu, halting, t, r, U, cert, tuple(iterates))


def iteration_bounds(U, L_opt, beta, n, d, delta_mu, m=None, eps=None, c=11.0) -> dict:
    """Explicit iteration bounds for the descent.

    Parameters
    ----------
    U : float
        Hessian upper bound used for the step size.
    L_opt : float or None
        Strong-convexity constant; the strongly convex bound is omitted
        when absent.
    beta : float
    n, d : int
        System size and local dimension (``f(0) - f(lambda) <= n log d``).
    delta_mu : float
    m : int, optional
        Unused by the formulas; accepted for interface symmetry.
    eps : float, optional
        Target accuracy in objective value for the strongly convex bound.
    c : float

    Returns
    -------
    dict
        ``general_bound = 10 c U n log d / (9 beta^2 (4c+1)^2 delta_mu^2)`` and,
        if ``L_opt`` and ``eps`` are given,
        ``strongly_convex_bound = log(n log d / eps) / (-log(1 - 18 L / (10 c U)))``.
    """
    for name, val in (("U", U), ("beta", beta), ("n", n), ("d", d), ("delta_mu", delta_mu)):
        if not val > 0:
            raise ValueError(f"{name} must be positive")
    gap = n * math.log(d)
    out = {"general_bound": 10 * c * U * gap / (9 * beta**2 * (4 * c + 1) ** 2 * delta_mu**2)}
    if L_opt is not None and eps is not None:
        rate = 18 * L_opt / (10 * c * U)
        if not 0 < rate < 1:
            raise ValueError("need 0 < 18 L / (10 c U) < 1")
        out["strongly_convex_bound"] = math.log(gap / eps) / (-math.log1p(-rate))
    return out


def audit_progress(result: SolverResult, family, lambda_true, tol=1e-9) -> dict:
    """Audit a recorded trajectory against the relative-entropy picture.

    For a target ``e_hat = e(lambda)`` the objective difference
    ``f(mu_{t+1}) - f(mu_t)`` equals ``D_{t+1} - D_t`` with
    ``D_t = D(sigma(lambda) || sigma(mu_t))``.  Here ``D_t`` is computed
    directly (``family.relative_entropy_from``) and compared with the
    objective recomputed at ``e(lambda)``.

    Returns
    -------
    dict
        ``divergence`` series, per-step ``residuals``, ``max_residual``,
        ``monotone`` flag, and the ``progress`` check of the per-step
        decrease ``-9 beta^2 ||e(mu_t) - e(lambda)||^2 / (10 c U)`` with
        ``c`` and ``U`` recovered from the result.
    """
    lam = np.asarray(lambda_true, dtype=float)
    e_lam = family.expectations(lam)
    beta = family.beta
    mus = [it["mu"] for it in result.iterates]
    D = np.array([family.relative_entropy_from(lam, mu) for mu in mus])
    f = np.array([family.log_partition(mu) + beta * float(mu @ e_lam) for mu in mus])
    residuals = np.abs(np.diff(f) - np.diff(D))
    return {
        "divergence": D,
        "objective": f,
        "residuals": residuals,
        "max_residual": float(residuals.max()) if residuals.size else 0.0,
        "monotone": bool(np.all(np.diff(D) <= tol)),
    }


def progress_check(result: SolverResult, family, lambda_true, c=None, tol=1e-12) -> dict:
    """Check ``f(mu_{t+1}) - f(mu_t) <= -9 beta^2 ||e(mu_t) - e(lambda)||^2 / (10 c U)``.

    The objective uses ``e_target = e(lambda)``; slack ``tol`` absorbs
    floating-point error in the objective differences.
    """
    lam = np.asarray(lambda_true, dtype=float)
    e_lam = family.expectations(lam)
    beta = family.beta
    c = c if c is not None else 11.0
    mus = [it["mu"] for it in result.iterates]
    f = np.array([family.log_partition(mu) + beta * float(mu @ e_lam) for mu in mus])
    rhs = np.array([-9 * beta**2 * np.sum((family.expectations(mu) - e_lam) ** 2) / (10 * c * result.U)
                    for mu in mus[:-1]])
    lhs = np.diff(f)
    slack = tol * np.maximum(1.0, np.abs(f[:-1]))
    ok = lhs <= rhs + slack
    return {"lhs": lhs, "rhs": rhs, "holds": bool(np.all(ok)), "violations": int(np.sum(~ok))}
