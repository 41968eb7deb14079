"""Independent reference implementations used only by the test-suite.

Nothing here imports turnmix internals; each oracle takes a different route
(extended precision, brute force) from the code it checks.
"""

import math

import mpmath as mp


def bessel_i0_series(kappa, dps=50):
    """I0 via its power series in extended precision, summed to convergence."""
    with mp.workdps(dps):
        k = mp.mpf(kappa)
        t = (k / 2) ** 2
        total, term, m = mp.mpf(0), mp.mpf(1), 0
        while True:
            total += term
            m += 1
            term = term * t / (m * m)
            if term < total * mp.mpf(10) ** (-dps + 5):
                return total


def bessel_i1_series(kappa, dps=50):
    with mp.workdps(dps):
        k = mp.mpf(kappa)
        t = (k / 2) ** 2
        total, term, m = mp.mpf(0), k / 2, 0
        while True:
            total += term
            m += 1
            term = term * t / (m * (m + 1))
            if term < total * mp.mpf(10) ** (-dps + 5) or total == 0:
                return total


def log_i0(kappa):
    with mp.workdps(50):
        return float(mp.log(bessel_i0_series(kappa)))


def ratio(kappa):
    with mp.workdps(50):
        return float(bessel_i1_series(kappa) / bessel_i0_series(kappa))


def turn_angles_brute(points):
    """Turn angles by explicit per-step loops with math.atan2."""
    b = []
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        b.append(math.atan2(y1 - y0, x1 - x0))
    out = []
    for prev, cur in zip(b[:-1], b[1:]):
        d = cur - prev
        while d <= -math.pi:
            d += 2 * math.pi
        while d > math.pi:
            d -= 2 * math.pi
        out.append(d)
    return out


def log_posterior_straight(theta, phi, x, z, player_index, player_position, fixed_sd=5.0, nu=3.0, scale=2.5):
    """Hierarchical von Mises log posterior summed term by term in extended precision.

    Deliberately naive: explicit loops, mpmath Bessel and trig, no shared code.
    """
    n_mean, n_conc, J = len(x[0]), len(z[0]), len(player_position)
    with mp.workdps(40):
        th = [mp.mpf(float(t)) for t in theta]
        a0 = th[0]
        beta = th[1:1 + n_mean]
        g0 = th[1 + n_mean]
        psi = th[2 + n_mean:2 + n_mean + n_conc]
        ut = th[2 + n_mean + n_conc:2 + n_mean + n_conc + J]
        ls = th[2 + n_mean + n_conc + J:]
        total = mp.mpf(0)
        for i in range(len(phi)):
            eta = a0 + mp.fsum(b * mp.mpf(float(v)) for b, v in zip(beta, x[i]))
            mu = 2 * mp.atan(eta)
            j = int(player_index[i])
            u = mp.exp(ls[int(player_position[j])]) * ut[j]
            kappa = mp.exp(g0 + mp.fsum(p * mp.mpf(float(v)) for p, v in zip(psi, z[i])) + u)
            total += kappa * mp.cos(mp.mpf(float(phi[i])) - mu) - mp.log(2 * mp.pi * mp.besseli(0, kappa))
        for t in [a0, *beta, g0, *psi]:
            total += -t * t / (2 * fixed_sd ** 2) - mp.log(fixed_sd * mp.sqrt(2 * mp.pi))
        for t in ut:
            total += -t * t / 2 - mp.log(mp.sqrt(2 * mp.pi))
        for l in ls:
            s = mp.exp(l)
            dens = 2 * mp.gamma((nu + 1) / 2) / (mp.gamma(mp.mpf(nu) / 2) * mp.sqrt(nu * mp.pi) * scale)
            dens *= (1 + (s / scale) ** 2 / nu) ** (-(nu + 1) / 2)
            total += mp.log(dens) + l
        return float(total)


def split_rhat_plain(x):
    """Textbook split-Rhat on rank-normal scores, written with explicit loops."""
    from scipy import stats

    chains = []
    for c in x:
        half = len(c) // 2
        chains.append(list(c[:half]))
        chains.append(list(c[len(c) - half:]))
    flat = [v for c in chains for v in c]
    ranks = stats.rankdata(flat)
    scores = stats.norm.ppf((ranks - 0.375) / (len(flat) + 0.25))
    n = len(chains[0])
    groups = [scores[i * n:(i + 1) * n] for i in range(len(chains))]
    means = [sum(g) / n for g in groups]
    grand = sum(means) / len(means)
    B = n * sum((m - grand) ** 2 for m in means) / (len(means) - 1)
    W = sum(sum((v - m) ** 2 for v in g) / (n - 1) for g, m in zip(groups, means)) / len(groups)
    return math.sqrt(((n - 1) / n * W + B / n) / W)
