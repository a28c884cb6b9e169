"""Lattice-to-continuum scaling studies.

A schedule fixes a field family, k continuum points in the open unit
box, a decreasing mesh list, a rescaling sequence eta, and an analytic
observable applied at every point. For each mesh the points are mapped
to lattice sites, the k-point moment or cumulant is evaluated through
the same multigraph engine used everywhere else, and the value is
multiplied by eta(epsilon)^k. The continuum target is the identical
multigraph sum with lattice covariances replaced by a continuum kernel,
and the convergence report compares the two across the mesh list.

Meshes are exact rationals end to end: side counts and point-to-site
floors are computed in Fraction arithmetic, so a mesh like 1/24 never
suffers float drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ._exact import format_fraction
from .covariance import (
    SITE_CAP,
    LatticeDomain,
    build_field,
    continuum_green_box,
    dgff_green_submatrix,
    validate_spd,
)
from .errors import ValidationError
from .wick import analytic_cumulant, analytic_moment

LATTICE_KINDS = ("dgff", "dgff-gradient", "membrane", "fractional")


def _as_number(x) -> Fraction:
    """Lenient rational parse for schedule data: accepts ints,
    Fractions, 'p/q' or decimal strings, and floats (binary-exact)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"cannot parse {x!r} as a rational number") from None
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValidationError("schedule numbers must be finite")
        return Fraction(x)
    raise ValidationError(f"cannot parse {x!r} as a rational number")


@dataclass(frozen=True)
class EtaPreset:
    """Mesh-dependent rescaling sequence.

    kind 'log' gives -log(epsilon); 'power' gives epsilon^(-p);
    'custom' looks epsilon up in an explicit table.
    """

    kind: str
    p: float | None = None
    table: tuple[tuple[Fraction, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("log", "power", "custom"):
            raise ValidationError(f"unknown eta preset {self.kind!r}")
        if self.kind == "power" and self.p is None:
            raise ValidationError("power preset needs an exponent p")
        if self.kind == "custom" and not self.table:
            raise ValidationError("custom preset needs a lookup table")

    def value(self, epsilon: Fraction) -> float:
        if self.kind == "log":
            if not 0 < epsilon < 1:
                raise ValidationError("log preset needs epsilon in (0, 1)")
            return -math.log(float(epsilon))
        if self.kind == "power":
            return float(epsilon) ** (-self.p)
        for eps, eta in self.table:
            if eps == epsilon:
                return eta
        raise ValidationError(f"custom eta table has no entry for {epsilon}")


def eta_from_json(obj) -> EtaPreset:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError('eta preset must be a mapping with a "kind"')
    kind = obj["kind"]
    if kind == "power":
        return EtaPreset(kind, p=float(obj.get("p", 1.0)))
    if kind == "custom":
        table = tuple(
            (_as_number(k), float(v)) for k, v in obj.get("table", {}).items()
        )
        return EtaPreset(kind, table=table)
    return EtaPreset(kind)


@dataclass(frozen=True)
class ScalingSchedule:
    field: dict
    points: tuple[tuple[Fraction, ...], ...]
    epsilons: tuple[Fraction, ...]
    eta: EtaPreset
    observable: tuple[Fraction, ...]
    mode: str = "cumulant"

    def __post_init__(self):
        if self.mode not in ("moment", "cumulant"):
            raise ValidationError(f"mode must be moment or cumulant, got {self.mode!r}")
        if not isinstance(self.field, dict) or "kind" not in self.field:
            raise ValidationError('field spec must be a mapping with a "kind"')
        if not self.points:
            raise ValidationError("schedule needs at least one point")
        d = self.dimension
        for p in self.points:
            if len(p) != d:
                raise ValidationError("every point needs one coordinate per dimension")
            if any(not 0 < c < 1 for c in p):
                raise ValidationError(f"point {tuple(map(str, p))} is not interior to the unit box")
        if len(set(self.points)) != len(self.points):
            raise ValidationError("points must be pairwise distinct")
        if not self.epsilons:
            raise ValidationError("schedule needs at least one mesh")
        if any(not 0 < e < 1 for e in self.epsilons):
            raise ValidationError("meshes must lie in (0, 1)")
        if any(a <= b for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ValidationError("mesh list must be strictly decreasing")
        if not self.observable:
            raise ValidationError("observable needs at least one coefficient")

    @property
    def dimension(self) -> int:
        if self.field["kind"] in LATTICE_KINDS:
            return int(self.field["d"])
        return len(self.points[0])

    @property
    def k(self) -> int:
        return len(self.points)


def schedule_from_json(obj: dict) -> ScalingSchedule:
    if not isinstance(obj, dict):
        raise ValidationError("schedule must be a JSON object")
    try:
        points = tuple(tuple(_as_number(c) for c in p) for p in obj["points"])
        epsilons = tuple(_as_number(e) for e in obj["epsilons"])
        observable = tuple(_as_number(a) for a in obj["observable"])
        field = obj["field"]
    except KeyError as missing:
        raise ValidationError(f"schedule needs {missing}") from None
    eta = eta_from_json(obj.get("eta", {"kind": "power", "p": 0.0}))
    return ScalingSchedule(
        field=field,
        points=points,
        epsilons=epsilons,
        eta=eta,
        observable=observable,
        mode=obj.get("mode", "cumulant"),
    )


@dataclass(frozen=True)
class ScalingRow:
    epsilon: Fraction
    lattice_sites: int
    mapped: tuple[tuple[int, ...], ...] | None
    raw_value: float | None
    eta: float | None
    rescaled: float | None
    skip_reason: str | None = None

    @property
    def skipped(self) -> bool:
        return self.skip_reason is not None


def _interior_side(epsilon: Fraction) -> int:
    """Number of interior lattice sites per axis: the lattice is
    epsilon * Z^d cut to the open unit box."""
    return math.ceil(1 / epsilon) - 1


def _map_point(point, epsilon: Fraction, side: int) -> tuple[int, ...] | None:
    """Floor point/epsilon to lattice coordinates, 0-based; None when
    any axis leaves the interior."""
    out = []
    for x in point:
        c = math.floor(x / epsilon) - 1
        if not 0 <= c < side:
            return None
        out.append(c)
    return tuple(out)


def _skip(epsilon, sites, reason) -> ScalingRow:
    return ScalingRow(epsilon, sites, None, None, None, None, reason)


def _evaluate_row(schedule: ScalingSchedule, epsilon: Fraction) -> ScalingRow:
    kind = schedule.field["kind"]
    k = schedule.k
    series = [list(schedule.observable)] * k
    evaluate = analytic_cumulant if schedule.mode == "cumulant" else analytic_moment

    if kind == "explicit":
        G = validate_spd(np.asarray(schedule.field["matrix"], dtype=float))
        if G.shape[0] != k:
            raise ValidationError("explicit matrix must be k x k for k points")
        eta = schedule.eta.value(epsilon)
        value = evaluate(G, list(range(k)), series).value
        return ScalingRow(epsilon, k, tuple((i,) for i in range(k)),
                          float(value), eta, eta ** k * float(value))

    d = schedule.dimension
    side = _interior_side(epsilon)
    n_sites = side ** d
    if side < 1:
        return _skip(epsilon, 0, "mesh too coarse: no interior sites")
    mapped = []
    for p in schedule.points:
        c = _map_point(p, epsilon, side)
        if c is None:
            return _skip(epsilon, n_sites,
                         f"point {tuple(map(str, p))} maps outside the interior lattice")
        mapped.append(c)
    if len(set(mapped)) != len(mapped):
        return _skip(epsilon, n_sites, "points collide on the lattice at this mesh")

    domain = LatticeDomain(d, (side,) * d)
    if kind == "dgff":
        G = dgff_green_submatrix(domain, mapped)
        sites = list(range(k))
    else:
        if n_sites > SITE_CAP:
            return _skip(
                epsilon, n_sites,
                f"dense covariance needs {n_sites} sites, cap is {SITE_CAP}",
            )
        spec = dict(schedule.field)
        spec["sides"] = [side] * d
        G = build_field(spec)
        sites = [domain.index(c) for c in mapped]

    value = float(evaluate(G, sites, series).value)
    eta = schedule.eta.value(epsilon)
    return ScalingRow(epsilon, n_sites, tuple(mapped), value, eta, eta ** k * value)


def rescaled_kpoint(schedule: ScalingSchedule) -> list[ScalingRow]:
    """One row per mesh; collisions and out-of-box mappings become
    skipped rows rather than errors, so a coarse head of the mesh list
    never kills the refined tail."""
    return [_evaluate_row(schedule, eps) for eps in schedule.epsilons]


def box_green_kernel(d: int, n_terms: int = 64) -> Callable:
    """Continuum Dirichlet Green's kernel on the unit box as a callable
    of two points."""

    def kernel(x, y) -> float:
        return continuum_green_box(
            d, [float(c) for c in x], [float(c) for c in y], n_terms
        )

    return kernel


def continuum_target(
    schedule: ScalingSchedule, kernel: Callable | None = None, n_terms: int = 64
) -> float:
    """The continuum value the rescaled lattice rows should approach:
    the same multigraph engine evaluated on kernel values at the
    schedule's points.

    The kernel matrix gets a zero diagonal; loop-free expansions over
    distinct points never consult it, which is exactly why the target
    is finite while the kernel itself blows up on the diagonal.
    """
    if kernel is None:
        kernel = box_green_kernel(schedule.dimension, n_terms)
    k = schedule.k
    K = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            K[i, j] = K[j, i] = float(kernel(schedule.points[i], schedule.points[j]))
    series = [list(schedule.observable)] * k
    evaluate = analytic_cumulant if schedule.mode == "cumulant" else analytic_moment
    return float(evaluate(K, list(range(k)), series).value)


def _aitken_limit(values: Sequence[float]) -> float | None:
    """Aitken delta-squared extrapolation from the last three values;
    None when the sequence is too short or the denominator collapses."""
    if len(values) < 3:
        return None
    x0, x1, x2 = values[-3], values[-2], values[-1]
    denom = (x2 - x1) - (x1 - x0)
    scale = max(abs(x0), abs(x1), abs(x2), 1.0)
    if not math.isfinite(denom) or abs(denom) < 1e-12 * scale:
        return None
    return x2 - (x2 - x1) ** 2 / denom


def convergence_report(
    rows: Sequence[ScalingRow], target: float, normalize: str = "raw"
) -> dict:
    """Relative errors against the target, fitted convergence order,
    and a monotonicity verdict.

    normalize='auto' fits one multiplicative constant between the
    rescaled sequence and the target (extrapolating the sequence first,
    so the fit is not biased toward the coarsest mesh); 'raw' compares
    as-is. A vanishing target switches to absolute errors.
    """
    if normalize not in ("raw", "auto"):
        raise ValidationError(f"normalize must be raw or auto, got {normalize!r}")
    usable = [r for r in rows if not r.skipped]
    if len(usable) < 3:
        raise ValidationError("convergence report needs at least 3 usable meshes")
    usable = sorted(usable, key=lambda r: r.epsilon, reverse=True)
    values = [r.rescaled for r in usable]
    target = float(target)

    absolute = abs(target) < 1e-12
    constant = 1.0
    constant_source = "raw"
    if normalize == "auto" and not absolute:
        limit = _aitken_limit(values)
        if limit is not None and math.isfinite(limit) and limit != 0:
            constant = limit / target
            constant_source = "extrapolated"
        else:
            constant = values[-1] / target
            constant_source = "last-mesh"
        if not math.isfinite(constant) or constant == 0:
            constant = 1.0
            constant_source = "raw"

    report_rows = []
    errors = []
    for r in usable:
        normalized = r.rescaled / constant
        err = abs(normalized - target) if absolute else abs(normalized - target) / abs(target)
        errors.append(err)
        report_rows.append(
            {
                "epsilon": format_fraction(r.epsilon),
                "rescaled": r.rescaled,
                "normalized": normalized,
                "rel_error": err,
            }
        )

    pairs = [
        (math.log(float(r.epsilon)), math.log(e))
        for r, e in zip(usable, errors)
        if e > 0
    ]
    fitted = float(np.polyfit(*zip(*pairs), 1)[0]) if len(pairs) >= 2 else None

    ratios = [
        values[i] / values[i + 1]
        for i in range(len(values) - 1)
        if values[i + 1] != 0
    ]

    return {
        "target": target,
        "normalize": normalize,
        "constant": constant,
        "constant_source": constant_source,
        "absolute_errors": absolute,
        "rows": report_rows,
        "skipped": [
            {"epsilon": format_fraction(r.epsilon), "reason": r.skip_reason}
            for r in rows
            if r.skipped
        ],
        "fitted_order": fitted,
        "monotone_decreasing": all(a > b for a, b in zip(errors, errors[1:])),
        "ratio_sequence": ratios,
    }


CSV_COLUMNS = ("epsilon", "lattice_sites", "raw_value", "eta", "rescaled", "target", "rel_error")


def write_scaling_csv(rows: Sequence[ScalingRow], report: dict, stream) -> None:
    """Delimited table, one line per schedule mesh. Skipped rows keep
    their mesh and site count with the value cells left empty."""
    errs = {r["epsilon"]: r["rel_error"] for r in report["rows"]}
    stream.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        eps = format_fraction(r.epsilon)
        if r.skipped:
            cells = [eps, str(r.lattice_sites), "", "", "", repr(report["target"]), ""]
        else:
            cells = [
                eps,
                str(r.lattice_sites),
                repr(r.raw_value),
                repr(r.eta),
                repr(r.rescaled),
                repr(report["target"]),
                repr(errs[eps]) if eps in errs else "",
            ]
        stream.write(",".join(cells) + "\n")


def render_figures(rows: Sequence[ScalingRow], report: dict, prefix: str) -> list[str]:
    """Two PNGs next to the delimited output: rescaled values and
    relative errors against the mesh, both log-log.

    Uses the object-layer canvas directly and strips the writer
    metadata so repeated runs produce identical bytes.
    """
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    usable = [r for r in rows if not r.skipped]
    if not usable:
        raise ValidationError("nothing to plot: every row was skipped")
    eps = [float(r.epsilon) for r in usable]
    errs = {r["epsilon"]: r["rel_error"] for r in report["rows"]}

    paths = []

    fig = Figure(figsize=(5.0, 3.4), dpi=120)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    ax.loglog(eps, [r.rescaled for r in usable], "o-", label="rescaled")
    tgt = report["constant"] * report["target"]
    if tgt != 0:
        ax.axhline(abs(tgt), color="gray", lw=0.8, ls="--", label="fitted target")
    ax.set_xlabel("mesh")
    ax.set_ylabel("rescaled value")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = f"{prefix}_values.png"
    fig.savefig(path, metadata={"Software": None})
    paths.append(path)

    fig = Figure(figsize=(5.0, 3.4), dpi=120)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    err_vals = [errs[format_fraction(r.epsilon)] for r in usable
                if format_fraction(r.epsilon) in errs]
    err_eps = [float(r.epsilon) for r in usable if format_fraction(r.epsilon) in errs]
    ax.loglog(err_eps, err_vals, "s-")
    ax.set_xlabel("mesh")
    ax.set_ylabel("relative error" if not report["absolute_errors"] else "absolute error")
    fig.tight_layout()
    path = f"{prefix}_error.png"
    fig.savefig(path, metadata={"Software": None})
    paths.append(path)

    return paths
