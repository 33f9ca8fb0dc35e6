"""How much entropy does adding two noisy symbols create?

For prime q, H(X1 + X2 | Y1, Y2) exceeds H(X | Y) by at least a constant times
H(1 - H). This script checks the supporting inequalities on random inputs and
searches for the channel that makes the gain ratio smallest.
"""

from collections import Counter

from qpolar.channel import channel_entropy, format_channel
from qpolar.gain import GainConstants, estimate_alpha, sweep

for q in (2, 3, 5):
    reports = list(sweep(q, trials=200, seed=q))
    fails = Counter(r.bound_id for r in reports if not r.passed)
    k = GainConstants.for_q(q)
    print(f"q={q}: {len(reports)} checks, {sum(fails.values())} failures; gamma0={k.gamma0:.3e}, c={k.c:.3e}")

est = estimate_alpha(3, trials=300, seed=0, refine=300)
print(f"\nsmallest gain / T found for q=3: {est.alpha_estimate:.4f} over {est.evaluated} channels")
print(f"its conditional entropy: {channel_entropy(est.minimizer):.4f}")
print(format_channel(est.minimizer))
