"""Exact rational helpers: determinants, inverses, matrix parsing.

Used by the modules whose claims are algebraic identities; everything
here stays in Fraction arithmetic.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ValidationError


def to_fraction(x) -> Fraction:
    """Coerce an int, Fraction, or 'p/q' string to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        if x != int(x):
            raise ValidationError(
                f"entry {x!r} is a non-integral float; exact paths need "
                "ints, Fractions, or 'p/q' strings"
            )
        return Fraction(int(x))
    raise ValidationError(f"cannot interpret {x!r} as an exact rational")


def format_fraction(x: Fraction) -> str:
    """Serialize as 'p/q' ('p' when the denominator is 1)."""
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def exact_matrix(rows) -> list[list[Fraction]]:
    """Square matrix of Fractions from any nested rational-ish input."""
    out = [[to_fraction(v) for v in row] for row in rows]
    n = len(out)
    for row in out:
        if len(row) != n:
            raise ValidationError("matrix is not square")
    return out


def submatrix(m, rows, cols=None):
    cols = rows if cols is None else cols
    return [[m[i][j] for j in cols] for i in rows]


def det_exact(m) -> Fraction:
    """Determinant by fraction-preserving Gaussian elimination."""
    a = [[Fraction(v) for v in row] for row in m]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, n):
            if a[r][col] == 0:
                continue
            factor = a[r][col] * inv
            for c in range(col, n):
                a[r][c] -= factor * a[col][c]
    return det


def inv_exact(m) -> list[list[Fraction]]:
    """Inverse by Gauss-Jordan elimination; raises on singular input."""
    a = [[Fraction(v) for v in row] for row in m]
    n = len(a)
    aug = [row + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ValidationError("matrix is singular; no exact inverse")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [v - factor * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]
