"""Wasserstein-1 bounds, Lipschitz constants and a transportation-cost check.

Shows the Lipschitz constant of a sum of single-site Z operators, the
high-temperature threshold of the local transportation-cost inequality, and
an empirical check of that inequality on perturbed product states.

Run with ``python demos/transport_checks.py``.
"""

import math

import numpy as np

from gibbs_maxent import SiteSystem
from gibbs_maxent.experiments import perturbed_product_ensemble
from gibbs_maxent.operators import LocalOperator, pauli_operator, product_state
from gibbs_maxent.wasserstein import lip_hamming_exact, lip_hamming_upper, tc_constant_local, tc_verify

# %% Lipschitz constant of sum_i Z_i: exact (small n) vs locality bound
for n in range(1, 4):
    system = SiteSystem(n)
    O = sum(pauli_operator(f"Z{i + 1}", system) for i in range(n))
    exact = lip_hamming_exact(O, system)
    upper = lip_hamming_upper([LocalOperator.from_pauli(f"Z{i + 1}") for i in range(n)], n)
    print("n=%d  exact bracket [%.4f, %.4f]  locality bound %.4f  2 sqrt(n) = %.4f"
          % (n, exact.lower, exact.upper, upper, 2 * math.sqrt(n)))

# %% threshold temperature for (k, g) = (2, 1)
tc = tc_constant_local(2, 1.0, 0.0)
print("\nbeta_c(k=2, g=1) = %.8f" % tc["beta_c"])

# %% transportation cost on product states: W1 lower bound vs sqrt(D / (2 alpha))
n, p = 6, 0.8
sigma = product_state([np.diag([p, 1 - p])] * n)
ens = perturbed_product_ensemble(n, p, 20, 0.3, np.random.default_rng(3), mix=False)
out = tc_verify(sigma, ens, SiteSystem(n), 0.5, "hamming", sweeps=0)
print("\nproduct reference, alpha = 1/2: %d violations out of %d" % (out.n_violations, len(ens)))
for r in out.rows[:5]:
    print("  W1 >= %.4f   rhs %.4f" % (r["w1_lower"], r["tc_rhs"]))
