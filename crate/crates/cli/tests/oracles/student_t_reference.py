"""High-precision Student-t upper-tail reference values.

Two independent routes at 40 significant digits:
  1. regularized incomplete beta (hypergeometric series in mpmath)
  2. direct quadrature of the t density from t to infinity
The printed values are frozen into tests/acceptance.rs.
"""
import mpmath as mp

mp.mp.dps = 40


def sf_beta(t, dof):
    d = mp.mpf(dof)
    return mp.betainc(d / 2, mp.mpf(1) / 2, 0, d / (d + t * t), regularized=True) / 2


def sf_quad(t, dof):
    d = mp.mpf(dof)
    c = mp.gamma((d + 1) / 2) / (mp.sqrt(d * mp.pi) * mp.gamma(d / 2))
    return mp.quad(lambda u: c * (1 + u * u / d) ** (-(d + 1) / 2), [t, mp.inf])


for dof in (3, 5, 20):
    for t in ("0.5", "2", "5"):
        a = sf_beta(mp.mpf(t), dof)
        b = sf_quad(mp.mpf(t), dof)
        assert abs(a - b) < mp.mpf("1e-30"), (dof, t, a, b)
        print(f"({dof}, {t}, {mp.nstr(a, 25)})")
