"""Shared test utilities: deterministic random matrices and a
from-scratch pairing oracle kept deliberately independent of the
package's own enumeration plumbing."""

from fractions import Fraction

BELL = [1, 1, 2, 5, 15, 52, 203, 877]


def int_spd(rng, n, lo=-3, hi=3):
    """Integer SPD matrix A^T A + n I; exact arithmetic stays in ints."""
    A = [[rng.randint(lo, hi) for _ in range(n)] for _ in range(n)]
    return [
        [sum(A[k][i] * A[k][j] for k in range(n)) + (n if i == j else 0)
         for j in range(n)]
        for i in range(n)
    ]


def rational_spd(rng, n, den_max=4):
    """Fraction-valued SPD matrix: an integer SPD scaled by 1/q."""
    q = rng.randint(1, den_max)
    return [[Fraction(v, q) for v in row] for row in int_spd(rng, n)]


def positive_rational_spd(rng, n, den_max=4):
    """SPD matrix with strictly positive entries, so products of
    off-diagonal entries never vanish and constant fits stay defined."""
    q = rng.randint(1, den_max)
    return [[Fraction(v, q) for v in row] for row in int_spd(rng, n, lo=1, hi=4)]


def brute_wick_moment(G, sites, degrees):
    """Moment of a product of Wick powers straight from the definition:
    sum over complete matchings of flat leg indices, skipping any pair
    owned by the same factor. No multigraphs, no collapsing."""
    if sum(degrees) % 2:
        return 0
    leg_site = [s for s, l in zip(sites, degrees) for _ in range(l)]
    leg_owner = [i for i, l in enumerate(degrees) for _ in range(l)]

    def match(free):
        if not free:
            yield []
            return
        a = free[0]
        for k in range(1, len(free)):
            b = free[k]
            if leg_owner[a] == leg_owner[b]:
                continue
            for rest in match(free[1:k] + free[k + 1:]):
                yield [(a, b)] + rest

    total = 0
    for m in match(list(range(len(leg_site)))):
        term = 1
        for a, b in m:
            term = term * G[leg_site[a]][leg_site[b]]
        total = total + term
    return total


def brute_complex_moment(G, A, r):
    """E prod |Z_i|^{2r} from the definition: sum over bijections
    between Z legs and conjugate legs of products of G entries."""
    import itertools

    legs = [s for s in A for _ in range(r)]
    n = len(legs)
    total = 0
    for perm in itertools.permutations(range(n)):
        term = 1
        for a in range(n):
            term = term * G[legs[a]][legs[perm[a]]]
        total = total + term
    return total
