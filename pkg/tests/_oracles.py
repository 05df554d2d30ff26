"""Test-side independent oracles (kept apart from the code paths they audit)."""

import mpmath as mp


def exact_forward_log_moment(q: float, sigma: float, alpha: int) -> float:
    """ln E_{z~mu}[(mu/mu0)^alpha] via the exact finite binomial sum.

    For integer alpha the forward moment is sum_i C(alpha+1, i) q^i M_i with
    M_i = sum_j C(i, j) (-1)^(i-j) exp(2 j (j-1) / sigma^2); exact, so it
    cross-checks the package's quadrature independently.
    """
    mp.mp.dps = 40
    s2 = mp.mpf(sigma) ** 2
    total = mp.mpf(0)
    for i in range(int(alpha) + 2):
        m_i = sum(
            mp.binomial(i, j) * (-1) ** (i - j) * mp.e ** (2 * j * (j - 1) / s2)
            for j in range(i + 1)
        )
        total += mp.binomial(int(alpha) + 1, i) * mp.mpf(q) ** i * m_i
    return float(mp.log(total))
