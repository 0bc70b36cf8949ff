"""Symmetric (paramagnetic) solution of the colour-diversity model.

Prints the zero-temperature energy and entropy across the connectivity
range, locates the connectivity where the symmetric entropy turns
negative, and then follows the finite-temperature entropy at <c> = 3.
Runs in a few seconds.
"""
import math

from colourdiv.model import ensemble_from_mean
from colourdiv.paramagnet import (find_zero_entropy_connectivity, find_zero_entropy_temperature,
                                  paramagnetic_entropy, paramagnetic_entropy_zero_T,
                                  paramagnetic_thermodynamics, z_population_zero_T)

print("T = 0 symmetric state: energy density equals 3<c> - 5")
for mc in (3.0, 3.25, 3.5, 3.75, 4.0):
    ens = ensemble_from_mean(mc)
    th = paramagnetic_thermodynamics(z_population_zero_T(ens, M=5000, seed=0))
    print(f"  <c>={mc:<5} f={th.f_av:+.6f}  3c-5={3 * mc - 5:+.2f}  "
          f"s={paramagnetic_entropy_zero_T(ens):+.5f}")

print(f"\nsymmetric entropy vanishes at <c> = {find_zero_entropy_connectivity(seed=0):.4f}")
print(f"(s at <c>=3 is -ln(3)/2 = {-math.log(3) / 2:.5f})")

print("\nfinite T at <c> = 3")
for T in (0.4, 0.5, 0.6, 0.7, 0.8):
    print(f"  T={T:.2f}  s={paramagnetic_entropy(3.0, T):+.5f}")
print(f"zero-entropy temperature T_s = {find_zero_entropy_temperature(3.0):.4f}")
