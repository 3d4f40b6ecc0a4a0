"""Observable error of a reconstructed classical chain after a shallow circuit.

For each chain length ``n`` a random open Ising chain is sampled, its
nearest-neighbour correlations are fed to the chain solver, and the
expectation of a light-cone-local observable is compared between the true
and the reconstructed states after a brickwork circuit.  The error should
stay flat in ``n``; the certified bound column is valid but loose.

Run with ``python demos/fig_pinsker_sweep.py`` (about a minute).
"""

import numpy as np

from gibbs_maxent.experiments import run_fig_pinsker

n_values = [10, 30, 100]
rows = run_fig_pinsker(n_values, seeds=4, master_seed=2024, samples=1000, beta=1.0, depth=3)

print("%5s %5s %12s %12s %12s" % ("n", "seed", "error", "bound", "tc-style"))
for r in rows:
    print("%5d %5d %12.3e %12.3e %12.3e" % (r["n"], r["seed"], r["observable_error"], r["bound"],
                                            r["tc_style_bound"]))

for n in n_values:
    errs = [r["observable_error"] for r in rows if r["n"] == n]
    print("n = %3d: median error %.2e" % (n, np.median(errs)))
