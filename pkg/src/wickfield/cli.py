"""Batch command-line interface.

JSON in, JSON or CSV out. Exact rationals cross the boundary as 'p/q'
strings (plain integers stay integers), so no value is ever laundered
through a float. Output files are written atomically: the full text is
produced first, then placed with a rename, so a failed run never leaves
a partial file. Exit codes: 0 success, 2 input validation, 3 internal
cross-check disagreement.
"""

from __future__ import annotations

import argparse
import io
import itertools
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import covariance, scaling
from ._exact import exact_matrix, format_fraction, to_fraction
from .complexboson import complex_moment
from .errors import CrossCheckError, ValidationError
from .fermion import duality_check_r1, r_power_minor_condition
from .montecarlo import (
    SampleConfig,
    estimate_complex_moment,
    estimate_wick_moment,
)
from .wick import (
    ORACLE_TOTAL_DEGREE_CAP,
    analytic_cumulant,
    analytic_moment,
    feynman_moment_oracle,
    moments_to_cumulants,
    wick_power_cumulant,
    wick_power_moment,
    wick_power_terms,
)

DEFAULT_SAMPLES = 100_000
DEFAULT_SUBSET_CAP = 5


def _jsonable(obj):
    """Recursively convert report values to JSON-safe types; Fractions
    become ints or 'p/q' strings."""
    if isinstance(obj, Fraction):
        return (
            int(obj.numerator) if obj.denominator == 1 else format_fraction(obj)
        )
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _load_payload(args) -> dict:
    if args.input is None:
        raise ValidationError("--input is required for this subcommand")
    if args.input == "-":
        text = sys.stdin.read()
    else:
        try:
            with open(args.input, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read input file: {exc}") from None
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON input: {exc}") from None
    if not isinstance(payload, dict):
        raise ValidationError("input JSON must be an object")
    return payload


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _is_exact_entries(matrix) -> bool:
    return all(
        isinstance(v, (int, str)) and not isinstance(v, bool)
        for row in matrix
        for v in row
    )


def _float_matrix(matrix) -> np.ndarray:
    return np.asarray(
        [[float(to_fraction(v)) if isinstance(v, str) else float(v) for v in row]
         for row in matrix],
        dtype=float,
    )


def _field_matrices(field: dict):
    """(exact_G_or_None, float_G) for a field spec. Explicit rational
    matrices keep an exact form; lattice builds are float-only."""
    if not isinstance(field, dict) or "kind" not in field:
        raise ValidationError('field spec must be a mapping with a "kind"')
    if field["kind"] == "explicit":
        matrix = field.get("matrix")
        if matrix is None:
            raise ValidationError('explicit field spec needs a "matrix"')
        if _is_exact_entries(matrix):
            exact = exact_matrix(matrix)
            covariance.validate_spd(_float_matrix(matrix))
            return exact, _float_matrix(matrix)
        return None, covariance.validate_spd(_float_matrix(matrix))
    return None, covariance.build_field(field)


def _series_from_payload(payload, sites, truncation):
    series = payload["series"]
    if len(series) != len(sites):
        raise ValidationError("one coefficient series per site required")
    out = []
    for s in series:
        coeffs = [to_fraction(a) if isinstance(a, (int, str)) else float(a) for a in s]
        if truncation is not None:
            coeffs = coeffs[: truncation + 1]
        out.append(coeffs)
    return out


def cmd_moment(args, cumulant: bool = False) -> str:
    payload = _load_payload(args)
    if "sites" not in payload:
        raise ValidationError('payload needs "sites"')
    sites = [int(s) for s in payload["sites"]]
    exact_G, float_G = _field_matrices(payload.get("field", {}))
    name = "cumulant" if cumulant else "moment"

    if "degrees" in payload:
        degrees = [int(d) for d in payload["degrees"]]
        G = exact_G if exact_G is not None else float_G
        fast = wick_power_cumulant(G, sites, degrees) if cumulant \
            else wick_power_moment(G, sites, degrees)
        checked = False
        if sum(degrees) <= min(12, ORACLE_TOTAL_DEGREE_CAP):
            reference = _oracle_value(G, sites, degrees, cumulant)
            checked = True
            if exact_G is not None:
                agree = fast == reference
            else:
                scale = max(abs(float(fast)), abs(float(reference)), 1.0)
                agree = abs(float(fast) - float(reference)) <= 1e-9 * scale
            if not agree:
                raise CrossCheckError(
                    f"multigraph {name} {fast} disagrees with pairing oracle {reference}"
                )
        result = {
            "command": name,
            "value": fast,
            "exact": exact_G is not None,
            "cross_checked": checked,
            "sites": sites,
            "degrees": degrees,
        }
        if args.verbose:
            result["terms"] = [
                {
                    "multigraph_upper": list(q.upper()),
                    "multiplicity": mult,
                    "kernel_product": kp,
                }
                for q, mult, kp in wick_power_terms(
                    G, sites, degrees, connected_only=cumulant and len(sites) > 1
                )
            ]
        return _dumps(result)

    if "series" not in payload:
        raise ValidationError('payload needs "degrees" or "series"')
    G = exact_G if exact_G is not None else float_G
    series = _series_from_payload(payload, sites, args.truncation)
    sv = analytic_cumulant(G, sites, series) if cumulant \
        else analytic_moment(G, sites, series)
    result = {
        "command": name,
        "value": sv.value,
        "exact": exact_G is not None,
        "sites": sites,
        "truncation_degree": sv.truncation_degree,
    }
    if args.verbose:
        result["last_shell_degree"] = sv.last_shell_degree
        result["last_shell_magnitude"] = sv.last_shell_magnitude
    return _dumps(result)


def _oracle_value(G, sites, degrees, cumulant):
    if not cumulant:
        return feynman_moment_oracle(G, sites, degrees)
    if len(sites) == 1:
        return feynman_moment_oracle(G, sites, degrees)
    by_site = dict(zip(sites, degrees))
    F = {}
    for k in range(1, len(sites) + 1):
        for B in itertools.combinations(sorted(sites), k):
            F[frozenset(B)] = feynman_moment_oracle(
                G, list(B), [by_site[s] for s in B]
            )
    return moments_to_cumulants(F)[frozenset(sites)]


def cmd_duality(args) -> str:
    payload = _load_payload(args)
    if "G" not in payload:
        raise ValidationError('payload needs "G"')
    G = exact_matrix(payload["G"])
    n = len(G)
    cap = args.max_subset if args.max_subset is not None else min(n, DEFAULT_SUBSET_CAP)
    reports = []
    for k in range(1, min(cap, n) + 1):
        for A in itertools.combinations(range(n), k):
            reports.append(duality_check_r1(G, list(A)))
    return _dumps(
        {
            "command": "duality",
            "subset_cap": cap,
            "reports": reports,
            "all_duality_ok": all(r["duality_ok"] for r in reports),
            "all_vec_matches_complex": all(r["vec_matches_complex"] for r in reports),
        }
    )


def cmd_minors(args) -> str:
    payload = _load_payload(args)
    for key in ("C", "G"):
        if key not in payload:
            raise ValidationError(f'payload needs "{key}"')
    C = exact_matrix(payload["C"])
    G = exact_matrix(payload["G"])
    r = int(payload.get("r", 1))
    if "subsets" in payload:
        subsets = [[int(i) for i in A] for A in payload["subsets"]]
    else:
        n = len(G)
        cap = args.max_subset if args.max_subset is not None else min(n, 4)
        subsets = [
            list(A)
            for k in range(1, min(cap, n) + 1)
            for A in itertools.combinations(range(n), k)
        ]
    reports = [r_power_minor_condition(C, G, A, r) for A in subsets]
    return _dumps(
        {
            "command": "minors",
            "r": r,
            "reports": reports,
            "all_minor_ok": all(rep["minor_condition_ok"] for rep in reports),
            "all_cumulant_ok": all(rep["cumulant_duality_ok"] for rep in reports),
        }
    )


def cmd_scaling(args) -> str:
    payload = _load_payload(args)
    n_terms = int(payload.pop("n_terms", 64))
    schedule = scaling.schedule_from_json(payload)
    rows = scaling.rescaled_kpoint(schedule)
    target = scaling.continuum_target(schedule, n_terms=n_terms)
    report = scaling.convergence_report(rows, target, normalize=args.normalize)

    buf = io.StringIO()
    scaling.write_scaling_csv(rows, report, buf)
    csv_text = buf.getvalue()

    if args.figures and not args.output:
        raise ValidationError("--figures needs --output to know where to render")

    if args.output:
        _atomic_write(args.output, csv_text)
        if args.figures:
            prefix = os.path.splitext(args.output)[0]
            report = dict(report, figures=scaling.render_figures(rows, report, prefix))
        return _dumps({"command": "scaling", "csv_path": args.output, "report": report})
    return _dumps({"command": "scaling", "csv": csv_text, "report": report})


def cmd_mc(args) -> str:
    payload = _load_payload(args)
    request = payload.get("request")
    if not isinstance(request, dict) or "kind" not in request:
        raise ValidationError('payload needs a "request" object with a "kind"')
    exact_G, float_G = _field_matrices(payload.get("field", {}))
    config = SampleConfig(
        seed=args.seed,
        n_samples=args.samples,
        workers=args.workers,
    )
    kind = request["kind"]
    if kind == "wick":
        sites = [int(s) for s in request["sites"]]
        degrees = [int(d) for d in request["degrees"]]
        est = estimate_wick_moment(float_G, sites, degrees, config)
        exact = None
        if exact_G is not None and sum(degrees) <= ORACLE_TOTAL_DEGREE_CAP:
            exact = wick_power_moment(exact_G, sites, degrees)
    elif kind == "complex":
        A = [int(s) for s in request["A"]]
        r = int(request.get("r", 1))
        est = estimate_complex_moment(float_G, A, r, config)
        exact = None
        if exact_G is not None:
            exact = complex_moment(exact_G, A, r)
    else:
        raise ValidationError(f"unknown request kind {kind!r}")
    result = {
        "command": "mc",
        "kind": kind,
        "estimate": est.value,
        "stderr": est.stderr,
        "n_samples": est.n_samples,
        "n_shards": est.n_shards,
        "seed": args.seed,
    }
    if exact is not None:
        result["exact"] = exact
        if est.stderr > 0:
            result["n_sigma"] = abs(est.value - float(exact)) / est.stderr
    return _dumps(result)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wickfield",
        description="Exact moments and cumulants of Gaussian field observables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--input", help="input JSON path, or - for stdin")
        p.add_argument("--output", help="write the result here atomically")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--truncation", type=int, default=None,
                       help="cap series coefficients at this degree")
        p.add_argument("--max-subset", type=int, default=None, dest="max_subset",
                       help="largest subset size for report sweeps")
        p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--verbose", action="store_true")
        p.add_argument("--normalize", choices=("raw", "auto"), default="raw")
        p.add_argument("--figures", action="store_true",
                       help="render convergence figures next to the output")

    for name in ("moment", "cumulant", "duality", "minors", "scaling", "mc"):
        common(sub.add_parser(name))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "moment": lambda a: cmd_moment(a, cumulant=False),
        "cumulant": lambda a: cmd_moment(a, cumulant=True),
        "duality": cmd_duality,
        "minors": cmd_minors,
        "scaling": cmd_scaling,
        "mc": cmd_mc,
    }
    try:
        text = handlers[args.command](args)
    except CrossCheckError as exc:
        print(f"cross-check failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    if args.command == "scaling" or not args.output:
        sys.stdout.write(text)
    else:
        _atomic_write(args.output, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
