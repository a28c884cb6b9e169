"""Covariance matrices of lattice Gaussian fields and the continuum
box Green's function used as a scaling target.

Lattice fields live on a d-dimensional box with Dirichlet (absorbing)
boundary. The Laplacian uses the probabilistic normalization: diagonal
1, each in-box neighbor -1/(2d), neighbors outside the box dropped.
Dense linear algebra throughout, capped at SITE_CAP sites; the
pair-entry path dgff_green_submatrix evaluates the same inverse through
the explicit sine eigenbasis and therefore has no cap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ValidationError

# Dense builders refuse domains above this many sites.
SITE_CAP = 4096


@dataclass(frozen=True)
class LatticeDomain:
    """Box of lattice sites with Dirichlet boundary.

    sides[i] counts sites along axis i; sites are indexed row-major,
    coordinates 0..sides[i]-1. The field is pinned to zero immediately
    outside the box.
    """

    d: int
    sides: tuple[int, ...]

    def __post_init__(self):
        if self.d < 2:
            raise ValidationError("dimension must be at least 2")
        if len(self.sides) != self.d:
            raise ValidationError("one side length per dimension required")
        if any(s < 1 for s in self.sides):
            raise ValidationError("side lengths must be positive")

    @property
    def n_sites(self) -> int:
        out = 1
        for s in self.sides:
            out *= s
        return out

    def index(self, coord) -> int:
        idx = 0
        for c, s in zip(coord, self.sides):
            if not 0 <= c < s:
                raise ValidationError(f"coordinate {tuple(coord)} outside the box")
            idx = idx * s + c
        return idx

    def coords(self):
        """All site coordinates in row-major (index) order."""
        return list(itertools.product(*(range(s) for s in self.sides)))


def _check_cap(domain: LatticeDomain) -> None:
    if domain.n_sites > SITE_CAP:
        raise ValidationError(
            f"domain has {domain.n_sites} sites, dense cap is {SITE_CAP}"
        )


def dirichlet_laplacian(domain: LatticeDomain) -> np.ndarray:
    """Probabilistically normalized Dirichlet Laplacian: I - P/(2d)
    restricted to the box (walks leaving the box are killed)."""
    _check_cap(domain)
    n = domain.n_sites
    lap = np.eye(n)
    w = 1.0 / (2 * domain.d)
    for coord in domain.coords():
        i = domain.index(coord)
        for axis in range(domain.d):
            for step in (-1, 1):
                nb = list(coord)
                nb[axis] += step
                if 0 <= nb[axis] < domain.sides[axis]:
                    lap[i, domain.index(nb)] = -w
    return lap


def build_dgff_green(domain: LatticeDomain) -> np.ndarray:
    """Green's function: inverse of the Dirichlet Laplacian."""
    lap = dirichlet_laplacian(domain)
    green = np.linalg.inv(lap)
    return validate_spd(0.5 * (green + green.T))


def build_gradient_covariance(domain: LatticeDomain, directions) -> np.ndarray:
    """Covariance of nearest-neighbor increments of the Dirichlet field.

    directions assigns each site an axis; the increment at site x is
    phi(x + e_axis) - phi(x) with phi = 0 outside the box. Entries are
    the corresponding double differences of the Green's function.
    """
    directions = list(directions)
    if len(directions) != domain.n_sites:
        raise ValidationError("one direction per site required")
    if any(not 0 <= a < domain.d for a in directions):
        raise ValidationError("direction out of range")
    green = build_dgff_green(domain)
    coords = domain.coords()

    def g(ca, cb) -> float:
        inside = all(0 <= c < s for c, s in zip(ca, domain.sides)) and all(
            0 <= c < s for c, s in zip(cb, domain.sides)
        )
        return green[domain.index(ca), domain.index(cb)] if inside else 0.0

    def shifted(coord, axis):
        out = list(coord)
        out[axis] += 1
        return out

    n = domain.n_sites
    cov = np.empty((n, n))
    for i in range(n):
        xi, ai = coords[i], directions[i]
        xi_s = shifted(xi, ai)
        for j in range(i, n):
            xj, aj = coords[j], directions[j]
            xj_s = shifted(xj, aj)
            val = g(xi_s, xj_s) - g(xi_s, xj) - g(xi, xj_s) + g(xi, xj)
            cov[i, j] = cov[j, i] = val
    return validate_spd(cov)


def build_fractional(domain: LatticeDomain, alpha: float) -> np.ndarray:
    """Inverse fractional power of the Dirichlet Laplacian, spectrally:
    eigenvalues raised to -alpha in the Laplacian eigenbasis."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    lap = dirichlet_laplacian(domain)
    w, v = np.linalg.eigh(lap)
    green = (v * w ** (-float(alpha))) @ v.T
    return validate_spd(0.5 * (green + green.T))


def build_membrane(domain: LatticeDomain) -> np.ndarray:
    """Inverse of the squared Dirichlet Laplacian."""
    lap = dirichlet_laplacian(domain)
    green = np.linalg.inv(lap @ lap)
    return validate_spd(0.5 * (green + green.T))


def validate_spd(matrix, sym_tol: float = 1e-10, eig_tol: float = -1e-10) -> np.ndarray:
    """Check symmetry and positive-definiteness; return the matrix.

    Raises ValidationError naming the violated invariant, the worst
    entry for asymmetry or the smallest eigenvalue otherwise.
    """
    g = np.asarray(matrix, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValidationError("covariance must be a square matrix")
    gap = np.abs(g - g.T)
    worst = np.unravel_index(np.argmax(gap), gap.shape)
    if gap[worst] > sym_tol:
        raise ValidationError(
            f"not symmetric: |G - G^T| = {gap[worst]:.3e} at entry {worst}"
        )
    smallest = float(np.linalg.eigvalsh(g)[0])
    if smallest <= eig_tol:
        raise ValidationError(f"not positive definite: eigenvalue {smallest:.6g}")
    return g


def build_field(spec: dict) -> np.ndarray:
    """Covariance matrix from a field-spec mapping.

    Accepted kinds: explicit (literal matrix), dgff, dgff-gradient
    (with per-site directions), membrane, fractional (with alpha).
    Lattice kinds need "d" and "sides".
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError('field spec must be a mapping with a "kind"')
    kind = spec["kind"]
    if kind == "explicit":
        if "matrix" not in spec:
            raise ValidationError('explicit field spec needs a "matrix"')
        return validate_spd(np.asarray(spec["matrix"], dtype=float))
    if kind not in ("dgff", "dgff-gradient", "membrane", "fractional"):
        raise ValidationError(f"unknown field kind {kind!r}")
    try:
        domain = LatticeDomain(int(spec["d"]), tuple(int(s) for s in spec["sides"]))
    except KeyError as missing:
        raise ValidationError(f"field spec needs {missing}") from None
    if kind == "dgff":
        return build_dgff_green(domain)
    if kind == "membrane":
        return build_membrane(domain)
    if kind == "fractional":
        if "alpha" not in spec:
            raise ValidationError('fractional field spec needs "alpha"')
        return build_fractional(domain, float(spec["alpha"]))
    directions = spec.get("directions")
    if directions is None:
        directions = [0] * domain.n_sites
    return build_gradient_covariance(domain, directions)


def dgff_green_submatrix(domain: LatticeDomain, sites) -> np.ndarray:
    """Green's function entries between selected sites, via the sine
    eigenbasis of the box Laplacian.

    The Dirichlet Laplacian on a box diagonalizes in products of sine
    modes, so individual inverse entries are a d-fold mode sum; only
    the requested k x k block is ever materialized, which is what the
    scaling studies need on boxes far beyond the dense cap.
    """
    sites = [tuple(s) for s in sites]
    for c in sites:
        if len(c) != domain.d or any(not 0 <= v < s for v, s in zip(c, domain.sides)):
            raise ValidationError(f"site {c} outside the box")
    ms = [s + 1 for s in domain.sides]
    # per-axis eigenvalue contributions: (2/d) sin^2(pi k / 2m)
    axis_k = [np.arange(1, m) for m in ms]
    sin2 = [np.sin(np.pi * k / (2 * m)) ** 2 for k, m in zip(axis_k, ms)]
    shape = [len(k) for k in axis_k]
    lam = np.zeros(shape)
    for ax, s2 in enumerate(sin2):
        lam += s2.reshape([-1 if a == ax else 1 for a in range(domain.d)])
    lam *= 2.0 / domain.d

    def mode_vector(axis: int, coord: int) -> np.ndarray:
        m = ms[axis]
        k = axis_k[axis]
        # eigenvector component sqrt(2/m) sin(pi k x / m) at x = coord+1
        return np.sqrt(2.0 / m) * np.sin(np.pi * k * (coord + 1) / m)

    out = np.empty((len(sites), len(sites)))
    for i, a in enumerate(sites):
        for j in range(i, len(sites)):
            b = sites[j]
            factors = [
                mode_vector(ax, a[ax]) * mode_vector(ax, b[ax])
                for ax in range(domain.d)
            ]
            numer = reduce(np.multiply.outer, factors)
            val = float(np.sum(numer / lam))
            out[i, j] = out[j, i] = val
    return out


def continuum_green_box(d: int, x, y, n_terms: int) -> float:
    """Dirichlet Green's function of the Laplacian on the open unit
    box, truncated sine eigen-series with n_terms modes per axis.

    Mode k contributes 2^d prod_i sin(pi k_i x_i) sin(pi k_i y_i)
    divided by pi^2 |k|^2. For x != y the oscillation along axes where
    the points differ makes the partial sums settle; callers compare
    doubled n_terms as the truncation check.
    """
    x = tuple(float(v) for v in x)
    y = tuple(float(v) for v in y)
    if len(x) != d or len(y) != d:
        raise ValidationError("points must have one coordinate per dimension")
    if n_terms < 1:
        raise ValidationError("n_terms must be at least 1")
    for p in (x, y):
        if any(not 0.0 < v < 1.0 for v in p):
            raise ValidationError(f"point {p} is not interior to the unit box")
    if max(abs(a - b) for a, b in zip(x, y)) < 1e-12:
        raise ValidationError("coincident points: the kernel is singular on the diagonal")
    ks = np.arange(1, n_terms + 1)
    factors = [np.sin(np.pi * ks * x[i]) * np.sin(np.pi * ks * y[i]) for i in range(d)]
    numer = reduce(np.multiply.outer, factors)
    k2 = np.zeros([n_terms] * d)
    for ax in range(d):
        k2 += (ks ** 2).reshape([-1 if a == ax else 1 for a in range(d)])
    return float(2 ** d * np.sum(numer / (np.pi ** 2 * k2)))
