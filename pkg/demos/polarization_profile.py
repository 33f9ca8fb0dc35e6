"""Watch the synthetic channels of a ternary source polarize, level by level.

Exact tracking keeps every W_n^(i) as a finite measure, so the entropies are
exact rather than sampled. The mean of sqrt(H (1 - H)) shrinks by a roughly
constant factor per level while more indices move to the extremes.
"""

from qpolar.channel import qsc_with_entropy
from qpolar.construction import exact_level_stats, polarization_profile

w = qsc_with_entropy(3, 0.5)
print(" n  E[sqrt T]   ratio  near 0  near 1  largest channel (atoms)")
prev = None
for s in exact_level_stats(w, 5):
    p = polarization_profile(s, epsilon=0.05)
    ratio = "" if prev is None else f"{p.mean_sqrt_T / prev:.4f}"
    print(f"{s.n:2d}  {p.mean_sqrt_T:.6f}  {ratio:>6}  {p.frac_low:6.3f}  {p.frac_high:6.3f}  {s.atom_counts[-1]}")
    prev = p.mean_sqrt_T
