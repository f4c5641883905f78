"""
Training patterns for group-connected surfaces
==============================================

Builds the Kronecker-structured pattern matrix for a few group and tile
sizes, checks that every tile pattern is unitary, and compares the LS
sensing trace against random unitary patterns.
"""

import numpy as np

from bdris.linalg import gram_deviation, unvec
from bdris.estimator import sensing_trace
from bdris.pattern_builder import assemble_phi_hat, make_plan

###############################################################################
# A 2x2 group with Hadamard bases.  Each row of the small block reshapes to a
# unitary 2x2 matrix, and the rows are mutually orthogonal.

plan = make_plan("hadamard", group_size=2, num_tiles=2, K=2)
print("pattern matrix shape:", plan.Phi.shape)
print("training slots T1 =", plan.T1)
print(np.round(plan.Phi[:4, :4] * np.sqrt(2)).real)

###############################################################################
# Every tile pattern of every row is unitary, for both base kinds.

for kind in ("dft", "hadamard"):
    worst = 0.0
    for mb in (1, 2, 4):
        for g2 in (1, 2, 4):
            p = make_plan(kind, mb, g2, 1)
            n = mb * mb
            for row in p.Phi:
                for i in range(g2):
                    worst = max(worst, gram_deviation(unvec(row[i * n:(i + 1) * n], mb, mb)))
    print(f"{kind:9s} worst tile Gram deviation: {worst:.1e}")

###############################################################################
# The stacked sensing matrix is a scaled unitary, so tr((A^H A)^-1) = N * Mbar.
# Random unitary tiles keep the per-slot constraint but lose orthogonality.

N = 2
ph = assemble_phi_hat(plan, N)
print("constructed trace:", np.trace(np.linalg.inv(ph.conj().T @ ph)).real, " target:", N * 2)

rand = [sensing_trace(make_plan("random", 2, 2, 2, seed=s), N) for s in range(200)]
print(f"random patterns: min {min(rand):.2f}, median {np.median(rand):.2f}")
