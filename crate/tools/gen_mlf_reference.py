#!/usr/bin/env python3
"""Generate the frozen Mittag-Leffler reference table used by the
acceptance suite.

For each (alpha, beta) pair and each point of a 200-point grid on
z in [-50, 0], E_{alpha,beta}(z) is computed with mpmath at 50 digits by
two independent routes:

  1. the contour-collapsed real-line integral representation
     (1/(alpha*pi)) * int_0^inf r^((1-beta)/alpha) * exp(-r^(1/alpha))
       * (r*sin(pi*(1-beta)) + x*sin(pi*(1-beta+alpha)))
       / (r^2 + 2*r*x*cos(alpha*pi) + x^2) dr          (z = -x < 0),
     valid for 0 < alpha < 1,
  2. numerical inversion of the Laplace-transform kernel over a parabolic
     Hankel contour zeta(u) = mu (1 + iu)^2:
     E_{alpha,beta}(z) = (1/(2 pi i)) oint e^zeta zeta^(alpha-beta)
                         / (zeta^alpha - z) dzeta.

For alpha = 1 the closed forms exp(z) resp. hyp1f1 replace route 1. The two
values must agree to 1e-35 before a row is emitted. A direct power series is
not usable as an oracle across the whole grid: its peak term grows like
exp(|z|^(1/alpha)), which for alpha = 0.25 at z = -50 would require millions
of digits. Where the series is affordable (|z|^(1/alpha) <= 500) it is run
as a third check.

Usage: python3 tools/gen_mlf_reference.py > crates/core/tests/data/mlf_reference.csv
"""

import sys

import mpmath as mp

GRID_POINTS = 200
Z_MIN = -50
PAIRS = [(0.25, 0.25), (0.25, 1.0), (0.5, 0.5), (0.5, 1.0),
         (0.75, 0.75), (0.75, 1.0), (1.0, 1.0)]
AGREE_TOL = mp.mpf("1e-35")


def ml_series(alpha, beta, z):
    """Power series with adaptively raised precision; only for moderate z."""
    peak_digits = int(float(abs(z) ** (1 / alpha)) / 2.3) + 40
    with mp.workdps(peak_digits):
        total = mp.mpf(0)
        k = 0
        while True:
            term = mp.power(z, k) / mp.gamma(alpha * k + beta)
            total += term
            if k > 4 and abs(term) < mp.mpf(10) ** (-peak_digits) * (1 + abs(total)):
                break
            k += 1
            if k > 100000:
                raise RuntimeError("series did not converge")
        return +total


def ml_integral(alpha, beta, z):
    """Real-line integral representation for 0 < alpha < 1, z < 0."""
    x = -z
    a, b = mp.mpf(alpha), mp.mpf(beta)
    s1 = mp.sinpi(1 - b)
    s2 = mp.sinpi(1 - b + a)
    c = mp.cospi(a)

    def kernel(r):
        num = r * s1 + x * s2
        den = r * r + 2 * r * x * c + x * x
        return mp.power(r, (1 - b) / a) * mp.exp(-mp.power(r, 1 / a)) * num / den

    val = mp.quad(kernel, [0, x, 10 * x, mp.inf])
    return val / (a * mp.pi)


def ml_hankel(alpha, beta, z, mu=25):
    """Parabolic Hankel contour; z < 0 keeps the poles off the contour."""
    a, b = mp.mpf(alpha), mp.mpf(beta)

    def f(u):
        zeta = mu * (1 + 1j * u) ** 2
        dzeta = 2 * mu * 1j * (1 + 1j * u)
        return mp.e ** zeta * mp.power(zeta, a - b) / (mp.power(zeta, a) - z) * dzeta

    half_width = mp.sqrt((mp.mp.dps + 10) * mp.log(10) / mu) + 1
    val = mp.quad(f, [-half_width, 0, half_width]) / (2j * mp.pi)
    return mp.re(val)


def ml_alpha_one(beta, z):
    """E_{1,beta}(z) via the confluent hypergeometric closed form."""
    if beta == 1:
        return mp.e ** z
    return mp.hyp1f1(1, beta, z) / mp.gamma(beta)


def main():
    mp.mp.dps = 50
    out = sys.stdout
    out.write("alpha,beta,z,value\n")
    for alpha, beta in PAIRS:
        for i in range(GRID_POINTS):
            z = mp.mpf(Z_MIN) * (GRID_POINTS - 1 - i) / (GRID_POINTS - 1)
            if z == 0:
                v1 = v2 = 1 / mp.gamma(beta)
            elif alpha == 1.0:
                v1 = ml_alpha_one(beta, z)
                v2 = ml_series(alpha, beta, z)
            else:
                v1 = ml_integral(alpha, beta, z)
                v2 = ml_hankel(alpha, beta, z)
                if float(abs(z)) ** (1 / alpha) <= 500:
                    v3 = ml_series(alpha, beta, z)
                    if abs(v1 - v3) > AGREE_TOL * (1 + abs(v1)):
                        raise RuntimeError(
                            f"series disagrees at alpha={alpha} beta={beta} "
                            f"z={z}: {v1} vs {v3}")
            if abs(v1 - v2) > AGREE_TOL * (1 + abs(v1)):
                raise RuntimeError(
                    f"methods disagree at alpha={alpha} beta={beta} z={z}: "
                    f"{v1} vs {v2}")
            out.write(f"{alpha},{beta},{mp.nstr(z, 20)},{mp.nstr(v1, 25)}\n")


if __name__ == "__main__":
    main()
