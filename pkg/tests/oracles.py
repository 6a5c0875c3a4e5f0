"""Independent reference implementations used by the tests.

These are deliberately written from scratch and kept simple: brute force
enumeration, dense grids and extended precision arithmetic.
"""
from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np
from scipy.optimize import linear_sum_assignment

mp.mp.dps = 40


_PERMS = {n: np.array(list(itertools.permutations(range(n))), dtype=np.int64) for n in range(1, 8)}


def _min_over_permutations(cost: np.ndarray) -> float:
    n = cost.shape[0]
    perms = _PERMS[n] if n in _PERMS else np.array(list(itertools.permutations(range(n))))
    return float(cost[np.arange(n), perms].sum(axis=1).min())


def d1_bruteforce(a, b) -> float:
    """Matching distance by enumerating every bijection."""
    a = np.asarray(a, dtype=float).reshape(len(a), -1) if len(a) else np.zeros((0, 1))
    b = np.asarray(b, dtype=float).reshape(len(b), -1) if len(b) else np.zeros((0, 1))
    if len(a) != len(b):
        return 1.0
    n = len(a)
    if n == 0:
        return 0.0
    diff = a[:, None, :] - b[None, :, :]
    cost = np.minimum(np.sqrt((diff ** 2).sum(axis=2)), 1.0)
    return _min_over_permutations(cost) / n


def d2_bruteforce(A, B) -> float:
    """Wasserstein distance between two equal-size pattern samples by bijection enumeration."""
    cost = np.array([[d1_bruteforce(a, b) for b in B] for a in A])
    return _min_over_permutations(cost) / len(A)


def dbw_transport(a, b) -> float:
    """Bounded Wasserstein distance of two empirical laws on the line.

    Test functions that are 1-Lipschitz with values in ``[-1/2, 1/2]`` are
    exactly the 1-Lipschitz functions for the metric ``min(|x - y|, 1)``, up
    to an additive constant that integrates to zero.  By Kantorovich duality
    the distance is therefore the optimal transport cost under that metric,
    computed here as an assignment between ``lcm(n_a, n_b)`` equal atoms.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n = math.lcm(a.size, b.size)
    x = np.repeat(a, n // a.size)
    y = np.repeat(b, n // b.size)
    cost = np.minimum(np.abs(x[:, None] - y[None, :]), 1.0)
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum() / n)


def poisson_pmf_mp(lam, n):
    lam = mp.mpf(lam)
    return [mp.e ** (-lam) * lam ** k / mp.factorial(k) for k in range(n + 1)]


def dtv_poisson_mp(lam, mu, kmax=200) -> float:
    p = poisson_pmf_mp(lam, kmax)
    q = poisson_pmf_mp(mu, kmax)
    return float(sum(abs(x - y) for x, y in zip(p, q)) / 2)


def _log_plus(x):
    return max(mp.log(x), 0) if x > 0 else mp.mpf(0)


def _log_up(x):
    return 1 + _log_plus(x)


def epsilon_mp(D, D2, iota, alpha, wh):
    par = 1 - mp.mpf(2) ** (D + D2 - 2) / iota * alpha(mp.mpf(2) ** D2 / wh)
    return 1 / par - 1 if par > 0 else mp.inf


def bound_210_mp(D1, D2, T, w, h, m, kappa, iota, alpha, beta):
    """Displayed six-term bound with the minimum-damped factors."""
    D = D1 + D2
    T, w, h, kappa, iota = map(mp.mpf, (T, w, h, kappa, iota))
    eps = epsilon_mp(D, D2, iota, alpha, w * h)
    L = min(1, 2 * (1 + eps) * w / (2 ** D * iota * T) * (1 + 2 * _log_plus(2 ** (D - 1) * kappa * T / w)))
    terms = [
        mp.sqrt(D1) / h ** (mp.mpf(1) / D1),
        mp.sqrt(D2) / T ** (mp.mpf(1) / D2),
        L * 2 ** (2 * D + 2 * D1) * kappa ** 2 * T * (2 * m + 1) ** D2 / w ** 2,
        2 ** (2 * D + D2 - 1) * T / w * alpha(2 ** D2 / (w * h)),
        L * 2 ** (D + D2) * (T ** (mp.mpf(1) / D2) + m + 1) ** D2 / w * alpha(2 ** D * (2 * m + 1) ** D2 / w),
        min(1, mp.mpf("1.65") * mp.sqrt(1 + eps) * mp.sqrt(w / (2 ** D * iota * T)))
        * 2 ** (2 * D) * mp.sqrt(kappa) * mp.sqrt(h / w) * T * beta(m),
    ]
    return terms


def bound_211_mp(D1, D2, T, w, h, m, kappa, iota, alpha, beta):
    D = D1 + D2
    T, w, h, kappa, iota = map(mp.mpf, (T, w, h, kappa, iota))
    eps = epsilon_mp(D, D2, iota, alpha, w * h)
    lu = _log_up(2 ** (D - 1) * kappa * T / w)
    return [
        mp.sqrt(D1) / h ** (mp.mpf(1) / D1),
        mp.sqrt(D2) / T ** (mp.mpf(1) / D2),
        2 ** (D + 2 * D1 + 2) * kappa ** 2 / iota * (1 + eps) * lu * (2 * m + 1) ** D2 / w,
        2 ** (2 * D + D2 - 1) * T / w * alpha(2 ** D2 / (w * h)),
        2 ** (D2 + 2) * 5 ** D2 / iota * (1 + eps) * lu * alpha(2 ** D * (2 * m + 1) ** D2 / w),
        2 ** (mp.mpf(3) / 2 * D + 1) * mp.sqrt(kappa / iota) * mp.sqrt(1 + eps) * mp.sqrt(T * h) * beta(m),
    ]


def bernoulli_sum_pmf(ps):
    pmf = np.array([1.0])
    for p in ps:
        pmf = np.convolve(pmf, [1 - p, p])
    return pmf


def indicator_stats_loop(joint_flat, strong):
    """``p``, ``E Z``, ``E(I Z)`` and ``e`` by looping over every configuration.

    ``joint_flat[k]`` is the probability of the configuration whose bits,
    most significant first, are ``(I_0, ..., I_{n-1})``.
    """
    probs = np.asarray(joint_flat, dtype=float)
    n = int(round(math.log2(probs.size)))
    configs = [tuple((k >> (n - 1 - i)) & 1 for i in range(n)) for k in range(probs.size)]
    p = np.zeros(n)
    ez = np.zeros(n)
    eiz = np.zeros(n)
    for x, pr in zip(configs, probs):
        for i in range(n):
            z = sum(x[j] for j in strong[i])
            p[i] += pr * x[i]
            ez[i] += pr * z
            eiz[i] += pr * x[i] * z
    e = np.zeros(n)
    for i in range(n):
        weak = [j for j in range(n) if j != i and j not in strong[i]]
        if not weak:
            continue
        joint_weak: dict = {}
        for x, pr in zip(configs, probs):
            key = tuple(x[j] for j in weak)
            both, total = joint_weak.get(key, (0.0, 0.0))
            joint_weak[key] = (both + pr * x[i], total + pr)
        e[i] = sum(abs(both - p[i] * total) for both, total in joint_weak.values())
    return p, ez, eiz, e


def sum_law_dtv_poisson(joint_flat) -> float:
    """Exact ``dTV(L(sum I), Po(E sum I))`` with the Poisson tail beyond ``n`` included."""
    probs = np.asarray(joint_flat, dtype=float)
    n = int(round(math.log2(probs.size)))
    pmf = np.zeros(n + 1)
    for k, pr in enumerate(probs):
        pmf[bin(k).count("1")] += pr
    lam = mp.mpf(float(np.dot(np.arange(n + 1), pmf)))
    po = [mp.e ** (-lam) * lam ** k / mp.factorial(k) for k in range(n + 1)]
    tail = 1 - mp.fsum(po)
    return float((mp.fsum(abs(mp.mpf(float(q)) - r) for q, r in zip(pmf, po)) + tail) / 2)
