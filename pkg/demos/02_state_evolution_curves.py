"""Predicted risk curves from state evolution.

For the default group prior we trace the asymptotic MSE of the lasso and of
the structure adaptive lasso (weights induced by the lasso at its optimal
alpha) as a function of the threshold multiplier alpha. Each alpha also
maps to a penalty level lambda(alpha); the table shows both, so the curves
can be read against a lambda axis as well. Below its phase transition the
lasso recursion has no finite fixed point; those rows show "-". A negative
lambda marks an alpha that no nonnegative penalty reaches.
"""

import numpy as np

from salasso.experiments import se_pipeline
from salasso.sim import GROUP_PRESET
from salasso.state_evolution import FixedPointNotReached, optimal_alpha

sigma2, delta = 0.2, 0.64
pipe = se_pipeline("group", GROUP_PRESET.prior(), sigma2, delta)
print(f"lasso optimum:    alpha={pipe.lasso_opt.alpha:.3f}  risk={pipe.lasso_opt.predicted_risk:.4f}")
print("induced group weights:", np.round(pipe.omega, 3))

sa = optimal_alpha(pipe.sa_trace, np.linspace(0.1, 3.0, 40))
print(f"SA-lasso optimum: alpha={sa.alpha:.3f}  risk={sa.predicted_risk:.4f}\n")

print(" alpha   lasso lambda  lasso risk    SA lambda   SA risk")
for a in np.linspace(0.25, 3.0, 12):
    cells = []
    for trace in (pipe.lasso_trace, pipe.sa_trace):
        try:
            t = trace(a)
            cells.append(f"{t.implied_lambda:12.4f}  {t.predicted_risk:10.4f}")
        except FixedPointNotReached:
            cells.append(f"{'-':>12}  {'-':>10}")
    print(f"{a:6.2f}  " + "  ".join(cells))
