"""Nonlinear diffusion on a uniform grid: entropy decay and the a priori bounds.

Run with ``python3 demos/flow_and_estimates.py``.
"""

import numpy as np

from fpconvex import flow

# %% a fast-diffusion profile phi(s) = sqrt(s) started from a narrow bump
n = 32
system = flow.fokker_planck_system(n, flow.Nonlinearity.power(0.5), gamma=0.0)
rho0 = flow.gaussian_bump(n, center=0.3, width=0.08, floor=0.05)
traj = flow.integrate(system, rho0, t_end=0.5, t_eval=np.linspace(0, 0.5, 11))

print(system.describe())
print(f"{'t':>6} {'entropy':>12} {'min rho':>10} {'max rho':>10} {'|G phi|_2':>10}")
for t, e, lo, hi, g in zip(traj.t, traj.entropy, traj.min_rho, traj.max_rho, traj.grad_norm):
    print(f"{t:6.2f} {e:12.6f} {lo:10.5f} {hi:10.5f} {g:10.5f}")
print(f"mass drift: {np.abs(traj.mass - 1).max():.1e}")

# %% every estimate is recorded with its relative violation
report = flow.apriori_monitor(traj)
for check in report.checks:
    print(f"  {'ok ' if check.passed else 'BAD'} {check.name:34s} {check.violation: .3e}")

# The narrow bump flattens well below its initial peak, so min phi' ends above
# M**(alpha-1); the weaker bound alpha * M**(alpha-1) still holds.

# %% with a confining potential the flow relaxes to phi(rho) proportional to exp(-V)
confined = flow.fokker_planck_system(n, flow.Nonlinearity.power(0.5), gamma=2.0)
late = flow.integrate(confined, rho0, t_end=3.0)
target = confined.w**2 / np.sum(confined.w**2)
print(f"distance to equilibrium at t=3: {np.abs(late.rho[-1] - target).max():.2e}")
