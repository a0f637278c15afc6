#!/usr/bin/env python3
"""Trace the privacy/learning trade-off for fixed and adaptive weights.

For each common noise variance sigma^2, the accountant gives the privacy
level epsilon and the second-moment bound u(alpha) gives a distance bound
4 u / (lam^2 T) after T steps.  Sweeping sigma^2 draws one curve per
aggregation weight; the adaptive weight minimizes u pointwise, so its
curve lower-bounds every fixed-weight curve.
"""

import numpy as np

from acfl import BoundInputs, tradeoff_curve

# small fleet, strong gradients, unit strong convexity
BASE = BoundInputs(
    p=0.1, n_devices=5, beta_sq=100.0, c_sq=1.0, d=100, o=10,
    sigma1_sq=1.0, sigma2_sq=1.0, lam=1.0, steps=1000,
)
GRID = np.geomspace(1e-2, 1e4, 13)

print("=" * 72)
print("distance bound (4 u / (lam^2 T)) against epsilon, per policy")
print("=" * 72)
adaptive = tradeoff_curve(BASE, GRID)
fixed_half = tradeoff_curve(BASE, GRID, alpha=0.5)
fixed_zero = tradeoff_curve(BASE, GRID, alpha=0.0)
print(f"{'sigma^2':>9} {'epsilon':>10} | {'adaptive':>10} {'alpha*':>8} | {'fixed 0.5':>10} {'fixed 0.0':>10}")
for a_pt, h_pt, z_pt in zip(adaptive, fixed_half, fixed_zero):
    print(
        f"{a_pt.sigma_sq:>9.3g} {a_pt.epsilon:>10.4g} | {a_pt.bound:>10.6g}"
        f" {a_pt.alpha:>8.2e} | {h_pt.bound:>10.6g} {z_pt.bound:>10.6g}"
    )
print()
print("Reading the table:")
print(" * alpha = 0 ignores the coded gradient entirely; its bound is flat")
print("   in sigma^2 (no noise enters) but pays the full straggler variance.")
print(" * fixed alpha = 0.5 is the non-adaptive baseline; its bound blows up")
print("   with the noise because it keeps trusting the coded gradient.")
print(" * the adaptive weight shrinks as noise grows, so its curve tracks")
print("   the best of both regimes and never sits above either.")
print()

worst_gap = 0.0
for alpha in np.linspace(0.0, 1.0, 11):
    for a_pt, f_pt in zip(adaptive, tradeoff_curve(BASE, GRID, float(alpha))):
        worst_gap = max(worst_gap, a_pt.bound - f_pt.bound)
print(f"max over 11 fixed weights and {len(GRID)} grid points of")
print(f"(adaptive bound - fixed bound) = {worst_gap:.3e}  (<= 0 up to rounding)")
