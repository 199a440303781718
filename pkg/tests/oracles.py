"""Independent reference computations used by the tests.

Nothing here imports the library's analysis code: the K determinants are
evaluated pointwise in high precision straight from their matrix entries.
"""
import mpmath as mp

mp.mp.dps = 50


def coeffs(p, x, x2, x3):
    p10_1, p10_2, p10_3 = mp.mpf(p.p10_1), mp.mpf(p.p10_2), mp.mpf(p.p10_3)
    p20_1, p20_2, p11 = mp.mpf(p.p20_1), mp.mpf(p.p20_2), mp.mpf(p.p11)
    a = p10_3 + (1 - p10_3) * x3
    b = (1 - p10_2) * (1 - p20_2) * x2 + p10_2 * (1 - p20_2) * x3 + p20_2
    c = (1 - p10_1) * (1 - p20_1) + p10_1 * (1 - p20_1) * x2 / x + p20_1 * x3 / x
    d = (p11 * x2 / x + 1 - p11) * (p10_3 + (1 - p10_3) * x3)
    return a, b, c, d


def k_value(p, name, x):
    """K_{x11}, K_{x01}, K_{x10} or K_x evaluated at the point x."""
    x = mp.mpf(x)
    lam, C = mp.mpf(p.lam), mp.mpf(p.C)
    fi = 1 / (lam * x + 1 - lam)
    a0 = coeffs(p, x, 0, 0)[0]
    _, b01, c01, d01 = coeffs(p, x, 0, 1)
    _, b10, c10, d10 = coeffs(p, x, 1, 0)
    _, b00, c00, d00 = coeffs(p, x, 0, 0)
    _, b11, c11, d11 = coeffs(p, x, 1, 1)
    e1 = C * (d01 - 1) + c01 - 1
    e2 = C * (d10 - a0) + c10 - 1
    e3 = C * (d00 - a0) + c00 - 1
    e4 = C * (d11 - 1) + c11 - 1
    if name == "K111":
        m = [[e1, b01, d01 - fi, c01 - fi],
             [e2, b10 - a0 - fi, d10 - a0, c10 - a0 - fi],
             [e3, b00, d00, c00 - fi],
             [e4, 0, d11 - 1, c11 - 1]]
    elif name == "K101":
        m = [[0, b01, e1, c01 - d01 - b01],
             [a0, b10 - a0 - fi, e2, c10 - d10 + a0 - b10],
             [0, b00, e3, c00 - d00 - b00 - fi],
             [1 - fi, 0, e4, c11 - d11]]
    elif name == "K110":
        m = [[0, e1, d01 - fi, c01 - d01 - b01],
             [a0, e2, d10 - a0, c10 - d10 + a0 - b10],
             [0, e3, d00, c00 - d00 - b00 - fi],
             [1 - fi, e4, d11 - 1, c11 - d11]]
    elif name == "K1":
        m = [[0, b01, d01 - fi, c01 - fi],
             [a0, b10 - a0 - fi, d10 - a0, c10 - a0 - fi],
             [0, b00, d00, c00 - fi],
             [1 - fi, 0, d11 - 1, c11 - 1]]
    else:
        raise KeyError(name)
    return mp.det(mp.matrix(m))


def k_finite_differences(p, name, h=1e-5):
    """Central differences (first, second) of K at x = 1."""
    h = mp.mpf(h)
    kp, k0, km = (k_value(p, name, 1 + h), k_value(p, name, 1), k_value(p, name, 1 - h))
    return float((kp - km) / (2 * h)), float((kp - 2 * k0 + km) / h ** 2)


def rayleigh_success(signal_gain, interferer_gains, theta, noise=1.0):
    """P(h0*S > theta*(noise + sum hi*Ii)) with unit-mean exponential h's.

    Computed by numerical quadrature over the interferer fades, independent
    of the closed-form product formula.
    """
    def integrand(*hs):
        inter = sum(g * hv for g, hv in zip(interferer_gains, hs))
        dens = mp.exp(-sum(hs))
        return mp.exp(-theta * (noise + inter) / signal_gain) * dens

    if not interferer_gains:
        return float(mp.exp(-theta * noise / signal_gain))
    return float(mp.quad(integrand, *[[0, mp.inf]] * len(interferer_gains)))
