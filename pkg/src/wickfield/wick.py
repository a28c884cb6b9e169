"""Moments and joint cumulants of Wick powers and of truncated analytic
functions of a real centered Gaussian vector.

Two independent evaluation routes exist for moments of Wick powers:

* the oracle route sums the covariance product over every complete
  pairing of the legs (no edge inside one factor), enumerated
  explicitly;
* the fast route sums over loop-free multigraphs weighted by the
  closed-form pairing multiplicity.

They must agree exactly whenever the covariance entries are exact
numbers, and the acceptance suite holds them to that. Cumulants keep
connected multigraphs only, which Moebius inversion over set partitions
must reproduce. The same machinery runs on floats when the covariance
comes from a lattice builder.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .multigraph import (
    Multigraph,
    connected_components,
    enumerate_multigraphs,
    enumerate_pairings,
    enumerate_partitions,
    is_connected,
    pairing_multiplicity,
    permutation_lift_count,
)

# The oracle enumerates (total-1)!! pairings; keep that at desk scale.
ORACLE_TOTAL_DEGREE_CAP = 16


def _entry(G, a, b):
    try:
        return G[a][b]
    except TypeError:
        return G[a, b]


def _check_sites(G, sites) -> None:
    n = len(G)
    seen = set()
    for s in sites:
        if not isinstance(s, (int, np.integer)) or not 0 <= s < n:
            raise ValidationError(f"unknown site label {s!r}")
        if s in seen:
            raise ValidationError(f"coincident sites: {s} appears twice")
        seen.add(s)


def _kernel_product(G, sites, q: Multigraph):
    """prod over i <= j of G[s_i, s_j] ** q_ij (loops hit the diagonal)."""
    out = 1
    for i in range(q.n):
        for j in range(i, q.n):
            e = q.q[i][j]
            if e:
                out = out * _entry(G, sites[i], sites[j]) ** e
    return out


@lru_cache(maxsize=None)
def _pairing_bins(degrees: tuple) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Complete pairings of the legs binned by collapsed multigraph.

    Pure combinatorics, independent of any covariance, so it is cached
    per degree signature; the count per bin is by explicit enumeration,
    never by the closed-form multiplicity.
    """
    bins: dict[tuple[int, ...], int] = {}
    for diagram in enumerate_pairings(degrees, forbid_intra_group=True):
        key = diagram.as_multigraph(len(degrees)).upper()
        bins[key] = bins.get(key, 0) + 1
    return tuple(sorted(bins.items()))


def feynman_moment_oracle(G, sites: Sequence[int], degrees: Sequence[int]):
    """Moment of prod_i :X_{s_i}^{l_i}: as a sum over complete pairings.

    Each admissible pairing (no edge joins two legs of the same factor)
    contributes the product of covariances over its edges. The sum is
    grouped by collapsed multigraph, an exact regrouping; the per-graph
    counts come from enumeration, not from a formula. Odd total degree
    returns 0. Exact for exact covariance entries.
    """
    sites = list(sites)
    degs = tuple(int(d) for d in degrees)
    if len(sites) != len(degs):
        raise ValidationError("one degree per site required")
    if any(d < 0 for d in degs):
        raise ValidationError("degrees must be nonnegative")
    _check_sites(G, sites)
    total = sum(degs)
    if total % 2:
        return 0
    if total > ORACLE_TOTAL_DEGREE_CAP:
        raise ValidationError(
            f"oracle path capped at total degree {ORACLE_TOTAL_DEGREE_CAP}"
        )
    from .multigraph import from_upper

    out = 0
    for upper, count in _pairing_bins(degs):
        q = from_upper(len(degs), upper)
        out = out + count * _kernel_product(G, sites, q)
    return out


def wick_group_moment(G, groups: Sequence[Sequence[int]]):
    """Moment of a product of Wick-ordered monomials, one per group.

    groups[k] lists the sites of the k-th factor :X_{a} X_{b} ...:,
    repeats allowed; pairings never join two legs of the same factor.
    Evaluated literally, one covariance product per pairing.
    """
    groups = [list(g) for g in groups]
    legs = [s for g in groups for s in g]
    n = len(G)
    for s in legs:
        if not 0 <= s < n:
            raise ValidationError(f"unknown site label {s!r}")
    if len(legs) % 2:
        return 0
    if len(legs) > ORACLE_TOTAL_DEGREE_CAP:
        raise ValidationError(
            f"oracle path capped at {ORACLE_TOTAL_DEGREE_CAP} legs"
        )
    site_of = {}
    for gi, g in enumerate(groups):
        for slot, s in enumerate(g):
            site_of[gi, slot] = s
    out = 0
    for diagram in enumerate_pairings([len(g) for g in groups]):
        term = 1
        for a, b in diagram.edges:
            term = term * _entry(G, site_of[a], site_of[b])
        out = out + term
    return out


def wick_power_moment(G, sites: Sequence[int], degrees: Sequence[int]):
    """Moment of prod_i :X_{s_i}^{l_i}: as a multigraph sum.

    Sum over loop-free multigraphs with the given degrees of the
    closed-form pairing multiplicity times the covariance product.
    Must equal feynman_moment_oracle exactly on exact input.
    """
    sites = list(sites)
    degs = tuple(int(d) for d in degrees)
    if len(sites) != len(degs):
        raise ValidationError("one degree per site required")
    if any(d < 0 for d in degs):
        raise ValidationError("degrees must be nonnegative")
    _check_sites(G, sites)
    if sum(degs) % 2:
        return 0
    out = 0
    for q in enumerate_multigraphs(degs, allow_loops=False):
        out = out + pairing_multiplicity(q, degs) * _kernel_product(G, sites, q)
    return out


def wick_power_cumulant(G, sites: Sequence[int], degrees: Sequence[int]):
    """Joint cumulant of the Wick powers: the connected part of the
    multigraph sum.

    For a single site this is the plain moment (the first cumulant is
    the mean); otherwise only connected multigraphs contribute, and the
    result equals Moebius inversion of wick_power_moment over subsets.
    """
    sites = list(sites)
    degs = tuple(int(d) for d in degrees)
    if len(sites) != len(degs):
        raise ValidationError("one degree per site required")
    _check_sites(G, sites)
    if len(sites) == 1:
        return wick_power_moment(G, sites, degs)
    if sum(degs) % 2:
        return 0
    out = 0
    for q in enumerate_multigraphs(degs, allow_loops=False):
        if is_connected(q):
            out = out + pairing_multiplicity(q, degs) * _kernel_product(G, sites, q)
    return out


def _normalize_setfunction(F: Mapping) -> tuple[dict[frozenset, object], frozenset]:
    out = {frozenset(k): v for k, v in F.items()}
    if not out:
        raise ValidationError("set function must cover a nonempty ground set")
    ground = frozenset().union(*out)
    for r in range(1, len(ground) + 1):
        for combo in itertools.combinations(sorted(ground), r):
            if frozenset(combo) not in out:
                raise ValidationError(
                    f"set function missing subset {combo}; all nonempty subsets required"
                )
    return out, ground


def moments_to_cumulants(F: Mapping) -> dict[frozenset, object]:
    """Moebius inversion over the partition lattice.

    k(S) = sum over partitions pi of S of
    (|pi|-1)! (-1)^(|pi|-1) prod over blocks B of F(B).
    Exact inverse of cumulants_to_moments.
    """
    Fn, _ = _normalize_setfunction(F)
    out = {}
    for S in Fn:
        total = 0
        for part in enumerate_partitions(sorted(S)):
            w = (-1) ** (len(part) - 1) * math.factorial(len(part) - 1)
            term = w
            for block in part:
                term = term * Fn[frozenset(block)]
            total = total + term
        out[S] = total
    return out


def cumulants_to_moments(k: Mapping) -> dict[frozenset, object]:
    """F(S) = sum over partitions pi of S of prod over blocks of k(B)."""
    kn, _ = _normalize_setfunction(k)
    out = {}
    for S in kn:
        total = 0
        for part in enumerate_partitions(sorted(S)):
            term = 1
            for block in part:
                term = term * kn[frozenset(block)]
            total = total + term
        out[S] = total
    return out


@dataclass(frozen=True)
class SeriesValue:
    """A truncated-series evaluation with its truncation diagnostic.

    last_shell_magnitude sums |term| over the highest total degree that
    contributed at all; when it is small against value the truncation
    is resolved.
    """

    value: object
    truncation_degree: int
    last_shell_degree: int
    last_shell_magnitude: float


def _series_sum(G, sites, series_list, per_degree: Callable) -> SeriesValue:
    sites = list(sites)
    if len(series_list) != len(sites):
        raise ValidationError("one coefficient series per site required")
    series = [list(s) for s in series_list]
    caps = [len(s) - 1 for s in series]
    if any(c < 0 for c in caps):
        raise ValidationError("series need at least the constant coefficient")
    value = 0
    shells: dict[int, float] = {}
    for ns in itertools.product(*(range(c + 1) for c in caps)):
        coeff = 1
        for a, n in zip(series, ns):
            coeff = coeff * a[n]
        if coeff == 0:
            continue
        term = coeff * per_degree(ns)
        if term == 0:
            continue
        value = value + term
        s = sum(ns)
        shells[s] = shells.get(s, 0.0) + abs(float(term))
    top = max(shells) if shells else 0
    return SeriesValue(
        value=value,
        truncation_degree=sum(caps),
        last_shell_degree=top,
        last_shell_magnitude=shells.get(top, 0.0),
    )


def analytic_moment(G, sites: Sequence[int], series_list) -> SeriesValue:
    """Moment of prod_i :f_i(X_{s_i}): for truncated power series f_i.

    Sums coefficient products against wick_power_moment over every
    degree tuple below the truncation caps.
    """
    return _series_sum(
        G, sites, series_list, lambda ns: wick_power_moment(G, sites, ns)
    )


def analytic_cumulant(G, sites: Sequence[int], series_list) -> SeriesValue:
    """Joint cumulant of prod_i :f_i(X_{s_i}):, connected part only.

    Equals Moebius inversion of analytic_moment over subsets of the
    sites, with the same truncation caps.
    """
    return _series_sum(
        G, sites, series_list, lambda ns: wick_power_cumulant(G, sites, ns)
    )


def generic_cumulant_function(
    g: Callable,
    f: Callable[[Multigraph], object],
    labels: Sequence,
    degrees: Sequence[int],
    allow_loops: bool = True,
    check_multiplicative: bool = True,
):
    """Cumulant of a multiplicative multigraph weight against a kernel.

    Returns the sum over connected multigraphs q with the given degrees
    of f(q) * prod g(a_i, a_j)^{q_ij} (the diagonal kernel enters
    through loops when allowed). f must factor over connected
    components; while scanning, disconnected graphs are used to probe
    that and a violation raises ValidationError. The full sum over all
    q, taken as a set function of the label set, has this connected sum
    as its joint cumulant.
    """
    labels = list(labels)
    degs = tuple(int(d) for d in degrees)
    if len(labels) != len(degs):
        raise ValidationError("one degree per label required")
    total = 0
    probes = 0
    for q in enumerate_multigraphs(degs, allow_loops=allow_loops):
        if is_connected(q):
            weight = 1
            for i in range(q.n):
                for j in range(i, q.n):
                    e = q.q[i][j]
                    if e:
                        weight = weight * g(labels[i], labels[j]) ** e
            total = total + f(q) * weight
        elif check_multiplicative and probes < 24:
            comps = connected_components(q)
            if len(comps) > 1:
                expected = 1
                for _, sub in comps:
                    expected = expected * f(sub)
                if f(q) != expected:
                    raise ValidationError(
                        "weight is not multiplicative over connected components"
                    )
                probes += 1
    return total


def cyclic_cumulant(g: Callable, labels: Sequence, weight: Callable | None = None):
    """Sum over cyclic permutations sigma of the labels of
    prod_i g(i, sigma(i)), optionally weighted by weight(sigma).

    A size-n label set has (n-1)! cyclic permutations (the identity for
    n = 1). For all-degree-2 Wick structures this reproduces the
    connected multigraph sum with the lift-count weight, each
    undirected cycle of length >= 3 being visited by its two
    orientations.
    """
    labels = list(labels)
    if not labels:
        raise ValidationError("label set must be nonempty")
    first, rest = labels[0], labels[1:]
    total = 0
    for perm in itertools.permutations(rest):
        order = (first,) + perm
        sigma = {order[i]: order[(i + 1) % len(order)] for i in range(len(order))}
        term = 1
        for a in order:
            term = term * g(a, sigma[a])
        if weight is not None:
            term = term * weight(sigma)
        total = total + term
    return total


def degree_two_permutation_cumulant(G, sites: Sequence[int]):
    """Permutation form of the all-degree-2 connected sum: the cyclic
    sum of covariance products, matching generic_cumulant_function with
    the permutation lift count as weight."""
    _check_sites(G, sites)
    return cyclic_cumulant(lambda a, b: _entry(G, a, b), list(sites))


def wick_power_terms(G, sites, degrees, connected_only: bool = False):
    """Term-by-term breakdown of the multigraph sum, for verbose output:
    yields (multigraph, multiplicity, kernel product)."""
    sites = list(sites)
    degs = tuple(int(d) for d in degrees)
    _check_sites(G, sites)
    if sum(degs) % 2:
        return
    for q in enumerate_multigraphs(degs, allow_loops=False):
        if connected_only and not is_connected(q):
            continue
        yield q, pairing_multiplicity(q, degs), _kernel_product(G, sites, q)


def hermite_wick_value(x, n: int, variance):
    """Wick power of a single Gaussian coordinate, evaluated pointwise.

    Degree-n Hermite polynomial with variance parameter: H_0 = 1,
    H_1 = x, H_{n+1} = x H_n - n s^2 H_{n-1}. Accepts scalars or numpy
    arrays in x.
    """
    if n < 0:
        raise ValidationError("degree must be nonnegative")
    if not variance > 0:
        raise ValidationError("variance must be positive")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.shape else float(h_prev)
    h = x
    for k in range(1, n):
        h, h_prev = x * h - k * variance * h_prev, h
    return h if h.shape else float(h)
