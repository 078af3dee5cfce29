"""Locate the bubble cone angle: the root of P'_{3/2} on (-1, 0).

Prints z*, theta* in radians and degrees, the residual |P'(z*)|, the
scaled Wronskian at a few points and the Garabedian amplitude C0.

    python3 scripts/theta_star.py [--tol 1e-14]
"""

import argparse

import numpy as np

from axisym_fbp.profiles import determine_garabedian_constant
from axisym_fbp.special_functions import find_theta_star, legendre_p_prime, wronskian_scaled


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tol", type=float, default=1e-14)
    a = ap.parse_args()
    cone = find_theta_star(a.tol)
    print(f"z*          {cone.z_star:.17g}")
    print(f"theta*      {cone.theta_star:.17g} rad = {cone.degrees:.10f} deg")
    print(f"|P'(z*)|    {abs(float(legendre_p_prime(1.5, cone.z_star))):.2e}")
    print(f"C0          {determine_garabedian_constant():.17g}")
    for z in np.linspace(-0.9, 0.9, 5):
        print(f"(1-z^2) W at z={z:+.2f}: {wronskian_scaled(1.5, z):.15f}")
    print(f"expected    {2 / np.pi:.15f}")


if __name__ == "__main__":
    main()
