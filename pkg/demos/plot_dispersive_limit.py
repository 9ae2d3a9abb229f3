"""
Dispersive limit: closed form versus full simulation
====================================================

Deep in the transparency window the CPS grows linearly in time at a rate
given by a fourth-order closed form. Compare it with the master-equation
result for weak coupling, large detuning and ``eps * delta << Omega^2``.
"""

import numpy as np

from mgate import dynamics, metrics, model

gamma = model.RB_D2_GAMMA
expm = dynamics.SolverOptions(method="matrix-exponential")

# (Omega, delta, G, eps) in units of gamma
cases = [(50.0, 50.0, 0.5, 0.5), (20.0, 100.0, 0.2, 0.04), (65 / 37.7, 1900 / 37.7, 0.5 / 37.7, 1.9 / 37.7)]

for omega, delta, G, eps in cases:
    p = model.SchemeParams.symmetric(delta=delta * gamma, eps=eps * gamma, omega=omega * gamma,
                                     G=G * gamma, gamma=gamma)
    rate = -metrics.perturbative_cps(p, 1.0)  # rad per µs, sign of extract_phases
    t = 5e-4 / abs(rate)
    series = metrics.compute_metrics(p, np.linspace(0, t, 101), expm)
    numeric = series[-1].cps_unwrapped
    print(f"Omega={omega:7.3f} delta={delta:7.2f} eps*delta/Omega^2={eps * delta / omega ** 2:.3f}: "
          f"numeric {numeric:+.4e}  closed form {rate * t:+.4e}  rel. error {abs(numeric / (rate * t) - 1):.3f}")

###############################################################################
# The third line uses the published dispersive example rescaled to gamma
# units. There ``eps * delta / Omega^2 = 0.85``: the two-photon detuning is
# not small against the transparency width, and the closed form fails, down
# to the sign of the slope.
