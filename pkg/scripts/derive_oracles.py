"""Compute the closed-form reference values used by the tests and freeze them.

Independent of the package: only sympy and exact rationals.  Run once and
commit the output:

    python3 scripts/derive_oracles.py > tests/oracles.json
"""

import json

import sympy as sp

r, phi, ea, eps = sp.symbols("r phi epsalpha epsilon", positive=True)

out = {}

# Hagen-Poiseuille in the unit pipe, u = (2 phi / pi)(1 - r^2)
u0 = 2 * phi / sp.pi * (1 - r**2)
out["hp_flux_over_phi"] = float(sp.simplify(sp.integrate(u0 * 2 * sp.pi * r, (r, 0, 1)) / phi))
out["unit_profile_flux"] = float(sp.integrate((1 - r**2) * 2 * sp.pi * r, (r, 0, 1)))  # pi/2
out["corrector_flux"] = float(sp.integrate((1 - 2 * r**2) * 2 * sp.pi * r, (r, 0, 1)))  # 0
# slice Dirichlet energy of 1 - r^2 on a unit-length slice
out["unit_profile_grad_sq"] = float(sp.integrate((2 * r) ** 2 * 2 * sp.pi * r, (r, 0, 1)))

# Navier approximation u^N = u0 - eps alpha (2 phi/pi)(1 - 2 r^2)
uN = u0 - ea * 2 * phi / sp.pi * (1 - 2 * r**2)
wall_u = sp.simplify(uN.subs(r, 1))
strain = sp.simplify(-sp.diff(uN, r).subs(r, 1) / 2)
ratio = sp.simplify(wall_u / strain)
out["navier_flux_over_phi"] = float(sp.simplify(sp.integrate(uN * 2 * sp.pi * r, (r, 0, 1)) / phi))
out["navier_cases"] = [
    {
        "phi": float(pv),
        "eps_alpha": float(av),
        "wall_u": float(wall_u.subs({phi: pv, ea: av})),
        "wall_strain": float(strain.subs({phi: pv, ea: av})),
        "slip_ratio": float(ratio.subs({phi: pv, ea: av})),
    }
    for pv, av in ((sp.Rational(1, 10), sp.Rational(1, 20)), (sp.Rational(1, 5), sp.Rational(3, 100)))
]
out["slip_length_eps_alpha_0.05"] = float(sp.Rational(1, 20) / (1 - 2 * sp.Rational(1, 20)))

# all-ones Bernoulli pipe = smooth pipe of radius 1 + eps carrying flux pi/2
c = sp.symbols("c", positive=True)
R = 1 + eps
csol = sp.solve(sp.Eq(sp.integrate(c * (R**2 - r**2) * 2 * sp.pi * r, (r, 0, R)), sp.pi / 2), c)[0]
out["all_ones"] = [
    {"epsilon": float(e), "c": float(csol.subs(eps, e)), "eps_alpha": float((1 - csol * R**2).subs(eps, e)),
     "eps_beta": float(sp.expand(-(1 - csol)).subs(eps, e))}
    for e in (sp.Rational(1, 4), sp.Rational(1, 8), sp.Rational(1, 16))
]

# pressure drops of the classical law
out["dp_phi_pi_over_8_ell_1"] = float(8 * (sp.pi / 8) * 1 / sp.pi)

# staircase wall area of an axisymmetric pipe, eps = 1/4, T = 1, bits (1, 0, 0, 1)
e = sp.Rational(1, 4)
bits = [1, 0, 0, 1]
rad = [1 + e * b for b in bits]
area = sum(2 * sp.pi * rr * e for rr in rad)
area += sum(sp.pi * abs(rad[i] ** 2 - rad[i - 1] ** 2) for i in range(4))
out["staircase_axisym_area"] = {"epsilon": 0.25, "T": 1.0, "bits": bits, "area": float(area)}

# expected Poisson bump count on the rescaled strip (T/eps)(2 pi/eps), eps = 1/4, T = 1
out["poisson_mean_count_eps_quarter"] = float(4 * 2 * sp.pi * 4)

print(json.dumps(out, indent=1, sort_keys=True))
