"""Grassmann algebra with exact coefficients, Berezin integration,
fermionic Gaussian states, and the boson-fermion cumulant duality.

Generators are indexed 0..M-1 and anticommute; a polynomial is a map
from generator subsets (bitmasks, ascending order inside a monomial) to
Fractions. Site i of an m-site system owns the pair psi_i = generator
2i and psibar_i = generator 2i+1, so the Berezin order d(psi_1)
d(psibar_1) ... d(psi_m) d(psibar_m) is the ascending generator order.
The global sign convention is pinned by the one-site determinant
identity (integral of exp(c psibar psi) equals c) and checked for all
sizes by gaussian_berezin_det_check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from ._exact import det_exact, exact_matrix, inv_exact, submatrix, to_fraction
from .complexboson import complex_cumulant, complex_multigraph_multiplicity
from .errors import ValidationError
from .multigraph import enumerate_multigraphs, multigraph_sign
from .wick import _check_sites, moments_to_cumulants, wick_group_moment, wick_power_cumulant

BEREZIN_SITE_CAP = 6
DUALITY_SUBSET_CAP = 6
REPLICA_INDEX_CAP = 12


@dataclass
class GrassmannPolynomial:
    """Element of the Grassmann algebra on n_generators generators.

    terms maps a bitmask (the generator subset, read in ascending
    order) to its Fraction coefficient; zero coefficients are dropped.
    """

    n_generators: int
    terms: dict[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        self.terms = {m: c for m, c in self.terms.items() if c != 0}

    def coefficient(self, mask: int) -> Fraction:
        return self.terms.get(mask, Fraction(0))

    def __eq__(self, other):
        return (
            isinstance(other, GrassmannPolynomial)
            and self.n_generators == other.n_generators
            and self.terms == other.terms
        )

    def __add__(self, other):
        _same_algebra(self, other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, Fraction(0)) + c
        return GrassmannPolynomial(self.n_generators, terms)

    def __sub__(self, other):
        _same_algebra(self, other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, Fraction(0)) - c
        return GrassmannPolynomial(self.n_generators, terms)

    def __mul__(self, other):
        if isinstance(other, GrassmannPolynomial):
            return grassmann_mul(self, other)
        return GrassmannPolynomial(
            self.n_generators,
            {m: c * to_fraction(other) for m, c in self.terms.items()},
        )

    __rmul__ = __mul__


def _same_algebra(a: GrassmannPolynomial, b: GrassmannPolynomial) -> None:
    if a.n_generators != b.n_generators:
        raise ValidationError("operands live on different generator sets")


def gp_scalar(n_generators: int, c) -> GrassmannPolynomial:
    return GrassmannPolynomial(n_generators, {0: to_fraction(c)})


def gp_generator(n_generators: int, i: int) -> GrassmannPolynomial:
    if not 0 <= i < n_generators:
        raise ValidationError(f"generator {i} out of range")
    return GrassmannPolynomial(n_generators, {1 << i: Fraction(1)})


def _merge_sign(a: int, b: int) -> int:
    """Sign from sorting the concatenation of two ascending disjoint
    monomials: each generator of b crosses the larger generators of a."""
    sign = 1
    rest = b
    while rest:
        low = rest & -rest
        j = low.bit_length() - 1
        if (a >> (j + 1)).bit_count() % 2:
            sign = -sign
        rest ^= low
    return sign


def grassmann_mul(
    a: GrassmannPolynomial, b: GrassmannPolynomial
) -> GrassmannPolynomial:
    """Antisymmetric product; overlapping monomials annihilate."""
    _same_algebra(a, b)
    terms: dict[int, Fraction] = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            if ma & mb:
                continue
            m = ma | mb
            c = _merge_sign(ma, mb) * ca * cb
            acc = terms.get(m)
            terms[m] = c if acc is None else acc + c
    return GrassmannPolynomial(a.n_generators, terms)


def berezin_integrate(F: GrassmannPolynomial) -> Fraction:
    """Iterated left derivative by every generator in ascending order,
    then evaluation at zero.

    Only the top monomial survives; peeling its generators from the
    highest-index derivative inward produces the parity of M(M-1)/2
    swaps.
    """
    M = F.n_generators
    top = (1 << M) - 1
    sign = -1 if (M * (M - 1) // 2) % 2 else 1
    return sign * F.coefficient(top)


def grassmann_exp(F: GrassmannPolynomial) -> GrassmannPolynomial:
    """Exponential of a nilpotent even element: finite sum of powers.

    Requires no scalar term and only even-degree monomials, so powers
    commute and the series is unambiguous; it terminates once a power
    vanishes.
    """
    if F.coefficient(0) != 0:
        raise ValidationError("exponential needs a zero scalar term")
    if any(m.bit_count() % 2 for m in F.terms):
        raise ValidationError("exponential needs even-degree terms only")
    out = gp_scalar(F.n_generators, 1)
    power = gp_scalar(F.n_generators, 1)
    k = 0
    while True:
        k += 1
        power = grassmann_mul(power, F)
        if not power.terms:
            return out
        out = out + power * Fraction(1, math.factorial(k))


def psi(n_sites: int, i: int) -> GrassmannPolynomial:
    return gp_generator(2 * n_sites, 2 * i)


def psibar(n_sites: int, i: int) -> GrassmannPolynomial:
    return gp_generator(2 * n_sites, 2 * i + 1)


def gaussian_exponential(C) -> GrassmannPolynomial:
    """exp of sum_{ij} C_ij psibar_i psi_j on 2m generators."""
    c = exact_matrix(C)
    m = len(c)
    quad = GrassmannPolynomial(2 * m, {})
    for i in range(m):
        for j in range(m):
            if c[i][j] != 0:
                quad = quad + c[i][j] * grassmann_mul(psibar(m, i), psi(m, j))
    return grassmann_exp(quad)


def gaussian_berezin_det_check(C) -> tuple[Fraction, Fraction, bool]:
    """Berezin integral of the Gaussian exponential against det(C).

    Returns (integral, determinant, equal). Capped at 6 sites (4^6
    monomials).
    """
    c = exact_matrix(C)
    if len(c) > BEREZIN_SITE_CAP:
        raise ValidationError(f"Berezin determinant check capped at {BEREZIN_SITE_CAP} sites")
    lhs = berezin_integrate(gaussian_exponential(c))
    rhs = det_exact(c)
    return lhs, rhs, lhs == rhs


@dataclass(frozen=True)
class FermionicState:
    """Gaussian state given directly by its correlation matrix K:
    the expectation of prod_{i in A} psibar_i psi_i is det(K_AA).

    Parameterizing by K (symmetric, invertible) keeps the observable
    quantities, the principal minors, as direct inputs.
    """

    K: tuple[tuple[Fraction, ...], ...]

    @staticmethod
    def from_matrix(K) -> "FermionicState":
        k = exact_matrix(K)
        n = len(k)
        for i in range(n):
            for j in range(n):
                if k[i][j] != k[j][i]:
                    raise ValidationError("correlation matrix must be symmetric")
        if det_exact(k) == 0:
            raise ValidationError("correlation matrix must be invertible")
        return FermionicState(tuple(tuple(row) for row in k))

    @property
    def n_sites(self) -> int:
        return len(self.K)


def fermionic_expectation(state: FermionicState, A: Sequence[int]) -> Fraction:
    """det(K_AA) by exact elimination."""
    A = list(A)
    if not A:
        raise ValidationError("subset must be nonempty")
    if len(set(A)) != len(A) or any(not 0 <= i < state.n_sites for i in A):
        raise ValidationError(f"invalid site subset {A}")
    return det_exact(submatrix(state.K, sorted(A)))


def fermionic_expectation_berezin(state: FermionicState, A: Sequence[int]) -> Fraction:
    """Same expectation through the full Grassmann representation.

    Inserts prod_{i in A} psibar_i psi_i (ascending) into the Gaussian
    weight exp(psibar^T C psi) with C the inverse of K, integrates, and
    normalizes by det(C). Brute force; used to validate the determinant
    path on small systems.
    """
    A = sorted(A)
    m = state.n_sites
    if m > BEREZIN_SITE_CAP:
        raise ValidationError(f"Berezin path capped at {BEREZIN_SITE_CAP} sites")
    C = inv_exact(state.K)
    insert = gp_scalar(2 * m, 1)
    for i in A:
        insert = grassmann_mul(insert, grassmann_mul(psibar(m, i), psi(m, i)))
    numer = berezin_integrate(grassmann_mul(insert, gaussian_exponential(C)))
    return numer / det_exact(C)


def fermionic_cumulant(state: FermionicState, A: Sequence[int]) -> Fraction:
    """Joint cumulant of the occupation products: Moebius inversion of
    the minor determinants over subsets of A.

    For the all-degree-2 structure this equals the signed cyclic
    permutation sum (sign (-1)^(|A|-1), two orientations per cycle of
    length >= 3).
    """
    A = sorted(A)
    if not A:
        raise ValidationError("subset must be nonempty")
    F = {}
    for k in range(1, len(A) + 1):
        for B in itertools.combinations(A, k):
            F[frozenset(B)] = fermionic_expectation(state, B)
    return moments_to_cumulants(F)[frozenset(A)]


def duality_check_r1(G, A: Sequence[int]) -> dict:
    """Cross-family cumulant comparison at replication order 1.

    Computes, for the label set A with covariance G (exact entries):
    k_vec from squared Wick monomials (pairing oracle plus Moebius),
    k_bosR from all-degree-2 Wick powers (connected multigraph sum),
    k_bosC from squared moduli of the circular complex vector, and
    k_ferm from the fermionic state with K = G. Verifies

        k_bosC(A) == (-1)^(|A|-1) k_ferm(A)   and   k_vec(A) == k_bosC(A)

    exactly, and fits the constant in k_bosR = c * k_vec. Two candidate
    closed forms for c are recorded: 2^(|A|-1), which matches the
    enumeration oracle, and 2^(|A|-2), recorded alongside for
    comparison. The fit needs |A| >= 2 (k_bosR vanishes on singletons).
    """
    A = sorted(A)
    if not A:
        raise ValidationError("subset must be nonempty")
    if len(A) > DUALITY_SUBSET_CAP:
        raise ValidationError(f"duality check capped at |A| = {DUALITY_SUBSET_CAP}")
    g = exact_matrix(G)
    _check_sites(g, A)
    n = len(A)

    F_vec = {}
    for k in range(1, n + 1):
        for B in itertools.combinations(A, k):
            F_vec[frozenset(B)] = wick_group_moment(g, [list(B), list(B)])
    k_vec = moments_to_cumulants(F_vec)[frozenset(A)]

    k_bosR = wick_power_cumulant(g, A, [2] * n)
    k_bosC = complex_cumulant(g, A, 1)
    k_ferm = fermionic_cumulant(FermionicState.from_matrix(g), A)

    sign = -1 if (n - 1) % 2 else 1
    fitted = Fraction(k_bosR, k_vec) if (n >= 2 and k_vec != 0) else None
    return {
        "A": tuple(A),
        "k_vec": k_vec,
        "k_bosR": k_bosR,
        "k_bosC": k_bosC,
        "k_ferm": k_ferm,
        "duality_ok": k_bosC == sign * k_ferm,
        "vec_matches_complex": k_vec == k_bosC,
        "constant_fitted": fitted,
        "constant_oracle": Fraction(2) ** (n - 1),
        "constant_alternate": Fraction(2) ** (n - 2),
        "constant_matches_oracle": fitted == Fraction(2) ** (n - 1)
        if fitted is not None
        else None,
    }


def _replica_indices(A: Sequence[int], r: int) -> list[int]:
    """Flat indices of the replicas of A in an nr x nr system laid out
    site-major: site i owns rows i*r .. i*r + r - 1."""
    return [i * r + a for i in A for a in range(r)]


def r_power_minor_condition(C, G, A: Sequence[int], r: int) -> dict:
    """Evaluate the replicated minor condition for the given C.

    lhs side: the principal minor det(C_{A_r, A_r}) over the replica
    index set of A (its reciprocal is reported too, matching the
    printed form of the condition). required side: the signed
    multigraph sum over loop-allowing graphs with degrees 2r,
    sign(q) * multiplicity * covariance product, which is the minor
    value forced by the cumulant duality. Also reports whether the
    replicated fermionic cumulant (Moebius over minors of C) equals
    (-1)^(|A|-1) times the squared-modulus cumulant of G.
    """
    A = sorted(A)
    if not A:
        raise ValidationError("subset must be nonempty")
    if r < 1:
        raise ValidationError("replication order r must be positive")
    if r * len(A) > REPLICA_INDEX_CAP:
        raise ValidationError(f"replica index count capped at {REPLICA_INDEX_CAP}")
    c = exact_matrix(C)
    g = exact_matrix(G)
    _check_sites(g, A)
    if len(c) != len(g) * r:
        raise ValidationError(f"C must be {len(g) * r} x {len(g) * r} for r = {r}")
    for m in (c, g):
        for i in range(len(m)):
            for j in range(i):
                if m[i][j] != m[j][i]:
                    raise ValidationError("matrices must be symmetric")

    minor = det_exact(submatrix(c, _replica_indices(A, r)))

    required = 0
    for q in enumerate_multigraphs([2 * r] * len(A), allow_loops=True):
        mult = complex_multigraph_multiplicity(q, r)
        weight = 1
        for i in range(q.n):
            for j in range(i, q.n):
                e = q.q[i][j]
                if e:
                    weight = weight * g[A[i]][A[j]] ** e
        required = required + multigraph_sign(q) * mult * weight

    F = {}
    for k in range(1, len(A) + 1):
        for B in itertools.combinations(A, k):
            F[frozenset(B)] = det_exact(submatrix(c, _replica_indices(B, r)))
    k_ferm_r = moments_to_cumulants(F)[frozenset(A)]
    k_bos_r = complex_cumulant(g, A, r)
    sign = -1 if (len(A) - 1) % 2 else 1

    return {
        "A": tuple(A),
        "r": r,
        "minor": minor,
        "minor_reciprocal": None if minor == 0 else Fraction(1) / minor,
        "required_minor": required,
        "required_minor_reciprocal": None if required == 0 else Fraction(1) / required,
        "minor_condition_ok": minor == required,
        "k_ferm": k_ferm_r,
        "k_bos": k_bos_r,
        "cumulant_duality_ok": k_ferm_r == sign * k_bos_r,
    }
