"""A geodesic of the discrete transport metric and the entropy along it."""

import numpy as np

from fpconvex import flow, geodesics

system = flow.heat_system(8)
rho0 = flow.gaussian_bump(8, center=0.25, width=0.12, floor=0.05)
rho1 = flow.gaussian_bump(8, center=0.75, width=0.2, floor=0.05)

path = geodesics.shoot(system, rho0, rho1, tol=1e-10)
print(f"method {path.method}, W = {path.distance:.10f}, endpoint residual {path.residual:.1e}")

# %% the entropy lies below its chord and the speed is constant
ent = np.array([flow.entropy(system, r) for r in path.rho])
chord = (1 - path.t) * ent[0] + path.t * ent[-1]
speeds = path.speeds(system)
for k in range(0, len(path.t), 4):
    print(f"t={path.t[k]:.3f}  entropy {ent[k]: .6f}  chord {chord[k]: .6f}  speed {speeds[k]:.8f}")

# %% a direct minimization of the discrete action gives an upper bound
coarse = geodesics.minimize_action(system, rho0, rho1)
print(f"discrete action estimate W = {coarse.distance:.10f} (gap {coarse.residual:.1e})")

report = geodesics.verify_displacement_convexity(system, rho0, rho1, lam=0.0, path=path)
print("convexity along the path:", "passed" if report.passed else "failed")
