"""Command-line driver for grid sweeps, geodesics, holonomy and validation.

Subcommands
    field        tensor components of a model family over a parameter grid
    geodesic     geodesic between two states, trace table and summary
    holonomy     holonomy of a closed loop given by chart vertices
    limit-sweep  thermal family tensor against its zero-temperature limit
    validate     check a matrix or grid-model JSON file, listing violations

Exit codes: 0 success; 1 validation findings; 2 usage/config/schema
problems; 3 invalid input data (failed state or model validation);
4 numerical refusals (rank floor, angle margin, open loop, coarse grid,
domain violations).
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import (
    AngleOutOfRangeError,
    CoarseGridError,
    DegenerateSpectrumError,
    InconsistentStencilError,
    MixedQGTError,
    NoAnalyticDerivativesError,
    NotClosedError,
    OutOfDomainError,
    RankDeficientError,
    SchemaError,
)
from .states import (
    DensityMatrix,
    density_violations,
    fidelity,
    load_matrix,
    matrix_from_json,
)
from .qgt import msqgt_eigenroute, qgt_to_json, thermal_limit_sweep
from .geodesics import (
    bloch_ellipse_check,
    geodesic_point,
    geodesic_purification,
    geodesic_samples,
    path_length,
    solve_geodesic,
)
from .transport import holonomy, holonomy_report_json
from .models import (
    BlochQubitModel,
    derivatives,
    load_grid_model,
    rotated_field_qubit,
)

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

_NUMERICAL_ERRORS = (
    RankDeficientError,
    AngleOutOfRangeError,
    NotClosedError,
    CoarseGridError,
    OutOfDomainError,
    DegenerateSpectrumError,
    InconsistentStencilError,
)

DEFAULT_POLE_MARGIN = 0.05
DEFAULT_GRID_COUNT = 31


class _UsageError(ValueError):
    pass


def _fmt(value):
    return f"{value:.17g}"


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _csv_text(columns, rows):
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _parse_overrides(items):
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise _UsageError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = float(raw)
        except ValueError:
            raise _UsageError(f"--set {key}: non-numeric value {raw!r}") from None
    return out


def _parse_scheme(text):
    if text is None or text == "analytic":
        return ("analytic", None) if text else None
    if text == "central":
        return "central", 1e-5
    name, sep, raw = text.partition(":")
    if name == "central" and sep:
        try:
            h = float(raw)
        except ValueError:
            raise _UsageError(f"bad step in --scheme {text!r}") from None
        if h <= 0:
            raise _UsageError(f"--scheme step must be positive, got {h!r}")
        return "central", h
    raise _UsageError(f"--scheme must be analytic or central[:h], got {text!r}")


def _parse_grid_spec(text):
    parts = text.split(":")
    if len(parts) != 4:
        raise _UsageError(f"--grid expects name:min:max:count, got {text!r}")
    name = parts[0]
    try:
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise _UsageError(f"--grid {text!r}: non-numeric bounds or count") from None
    if count < 2:
        raise _UsageError(f"--grid {text!r}: count must be >= 2")
    if hi <= lo:
        raise _UsageError(f"--grid {text!r}: need min < max")
    return name, lo, hi, count


def _parse_point(text, labels):
    values = {}
    for chunk in text.split(","):
        key, sep, raw = chunk.partition("=")
        if not sep:
            raise _UsageError(f"point expects name=value pairs, got {chunk!r}")
        try:
            values[key.strip()] = float(raw)
        except ValueError:
            raise _UsageError(f"point coordinate {key!r}: bad value {raw!r}") from None
    missing = [l for l in labels if l not in values]
    extra = [k for k in values if k not in labels]
    if missing or extra:
        raise _UsageError(
            f"point must set exactly {list(labels)}; missing {missing}, unknown {extra}"
        )
    return np.array([values[l] for l in labels])


def _build_model(spec, overrides):
    overrides = dict(overrides)
    if spec in ("bloch", "bloch-qubit"):
        r = overrides.pop("r", 0.9)
        if overrides:
            raise _UsageError(f"unknown --set keys for bloch model: {sorted(overrides)}")
        return BlochQubitModel(r=r)
    if spec == "thermal-qubit":
        beta = overrides.pop("beta", 1.0)
        gap = overrides.pop("gap", 0.5)
        if overrides:
            raise _UsageError(f"unknown --set keys for thermal-qubit: {sorted(overrides)}")
        return rotated_field_qubit(beta, gap=gap)
    if overrides:
        raise _UsageError("--set is not supported for grid-model files")
    if not os.path.exists(spec):
        raise _UsageError(
            f"unknown model {spec!r}: expected bloch, thermal-qubit, or a grid-model JSON path"
        )
    return load_grid_model(spec)


def _resolve_scheme(args_scheme, model):
    scheme = _parse_scheme(args_scheme)
    if scheme is None:
        return ("analytic", None) if model.has_analytic_derivatives else ("central", 1e-5)
    return scheme


def _pair_indices(n):
    return [(a, b) for a in range(n) for b in range(a, n)]


def _grid_axes(model, grid_specs, pole_margin):
    named = {}
    for spec in grid_specs or []:
        name, lo, hi, count = _parse_grid_spec(spec)
        if name not in model.param_labels:
            raise _UsageError(
                f"--grid names unknown parameter {name!r}; family has {model.param_labels}"
            )
        named[name] = (lo, hi, count)
    axes = []
    for label, (dlo, dhi) in zip(model.param_labels, model.domain):
        lo, hi, count = named.get(label, (dlo, dhi, DEFAULT_GRID_COUNT))
        if label == "theta" and pole_margin > 0:
            lo_c, hi_c = max(lo, dlo + pole_margin), min(hi, dhi - pole_margin)
            if lo_c >= hi_c:
                raise _UsageError(
                    f"theta grid [{lo}, {hi}] lies inside the pole margin"
                    f" {pole_margin:g}; pass --pole-margin 0 to allow it"
                )
            lo, hi = lo_c, hi_c
        axes.append(np.linspace(lo, hi, count))
    return axes


def _field_row(task):
    model, scheme, h, point = task
    try:
        rho = model.evaluate(point)
        drho = derivatives(model, point, scheme=scheme, h=h) if scheme == "central" \
            else model.analytic_derivatives(point)
        q = msqgt_eigenroute(rho, drho, chart=model.param_labels)
    except MixedQGTError as exc:
        raise type(exc)(f"at grid point {list(map(float, point))}: {exc}") from None
    pairs = _pair_indices(q.dim)
    row = list(map(float, point))
    row.extend(q.entries[a, b].real for a, b in pairs)
    row.extend(q.entries[a, b].imag for a, b in pairs)
    row.extend([q.sym_residual, q.antisym_residual])
    return row


def _cmd_field(args):
    model = _build_model(args.model or "bloch", _parse_overrides(args.set))
    scheme, h = _resolve_scheme(args.scheme, model)
    margin = DEFAULT_POLE_MARGIN if args.pole_margin is None else args.pole_margin
    axes = _grid_axes(model, args.grid, margin)
    points = [np.array([axes[d][i] for d, i in enumerate(idx)])
              for idx in np.ndindex(*(a.size for a in axes))]
    workers = args.workers or 1
    tasks = [(model, scheme, h, p) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_field_row, tasks,
                                 chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        rows = [_field_row(t) for t in tasks]

    labels = model.param_labels
    pairs = _pair_indices(len(labels))
    columns = list(labels)
    columns += [f"re_Q_{labels[a]}_{labels[b]}" for a, b in pairs]
    columns += [f"im_Q_{labels[a]}_{labels[b]}" for a, b in pairs]
    columns += ["sym_residual", "antisym_residual"]
    fmt = args.format or "csv"
    if fmt == "csv":
        _emit(_csv_text(columns, rows), args.output)
    elif fmt == "json":
        scheme_text = "analytic" if scheme == "analytic" else f"central:{h:g}"
        _emit(json.dumps({"model": model.name, "scheme": scheme_text,
                          "columns": columns, "rows": rows}) + "\n", args.output)
    else:
        raise _UsageError(f"--format must be csv or json, got {fmt!r}")
    return EXIT_OK


def _geodesic_endpoints(args):
    by_point = args.point_a is not None or args.point_b is not None
    by_state = args.state_a is not None or args.state_b is not None
    if by_point == by_state:
        raise _UsageError("give either --point-a/--point-b or --state-a/--state-b")
    if by_state:
        if args.state_a is None or args.state_b is None:
            raise _UsageError("both --state-a and --state-b are required")
        return (DensityMatrix(load_matrix(args.state_a)),
                DensityMatrix(load_matrix(args.state_b)))
    if args.point_a is None or args.point_b is None:
        raise _UsageError("both --point-a and --point-b are required")
    model = _build_model(args.model or "bloch", _parse_overrides(args.set))
    return (model.evaluate(_parse_point(args.point_a, model.param_labels)),
            model.evaluate(_parse_point(args.point_b, model.param_labels)))


def _cmd_geodesic(args):
    rho_a, rho_b = _geodesic_endpoints(args)
    margin = 1e-6 if args.angle_margin is None else args.angle_margin
    sol = solve_geodesic(rho_a, rho_b, angle_margin=margin,
                         require_full_rank=not args.allow_rank_deficient)
    samples = args.samples or 201
    if samples < 2:
        raise _UsageError(f"--samples must be >= 2, got {samples}")
    ts = np.linspace(0.0, sol.theta, samples)
    length = path_length(geodesic_samples(sol, ts), ts)
    qubit = rho_a.dim == 2
    ellipse = bloch_ellipse_check(sol) if qubit else None

    fmt = args.format or "json"
    if fmt == "json":
        report = {
            "theta": sol.theta,
            "fidelity": float(np.cos(sol.theta)),
            "path_length": length,
            "samples": int(samples),
            "ellipse": None if ellipse is None else {
                "center": ellipse.center.tolist(),
                "semi_major": ellipse.semi_major,
                "semi_minor": ellipse.semi_minor,
                "max_deviation": ellipse.max_deviation,
                "out_of_plane": ellipse.out_of_plane,
            },
        }
        _emit(json.dumps(report) + "\n", args.output)
    elif fmt == "csv":
        dim = rho_a.dim
        columns = ["t"]
        columns += [f"re_rho_{i}_{j}" for i in range(dim) for j in range(dim)]
        columns += [f"im_rho_{i}_{j}" for i in range(dim) for j in range(dim)]
        if qubit:
            columns += ["bloch_x", "bloch_y", "bloch_z"]
        columns += ["fidelity_to_a", "fidelity_to_b", "ode_residual"]
        rows = []
        fd = 1e-3
        for t in ts:
            rho_t = geodesic_point(sol, t)
            row = [float(t)]
            row.extend(rho_t.mat.real.ravel())
            row.extend(rho_t.mat.imag.ravel())
            if qubit:
                m = rho_t.mat
                row.extend([
                    float(2 * m[0, 1].real),
                    float(2 * m[1, 0].imag),
                    float((m[0, 0] - m[1, 1]).real),
                ])
            mid = geodesic_purification(sol, t).amplitudes
            plus = geodesic_purification(sol, t + fd).amplitudes
            minus = geodesic_purification(sol, t - fd).amplitudes
            accel = float(np.linalg.norm((plus - 2 * mid + minus) / fd ** 2 + mid))
            row.extend([fidelity(rho_t, rho_a), fidelity(rho_t, rho_b), accel])
            rows.append(row)
        _emit(_csv_text(columns, rows), args.output)
    else:
        raise _UsageError(f"--format must be csv or json, got {fmt!r}")
    return EXIT_OK


def _load_loop(path, model):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or "points" not in obj:
        raise SchemaError('loop file must be an object with a "points" key')
    pts = obj["points"]
    if not isinstance(pts, list) or len(pts) < 3:
        raise SchemaError("loop needs at least 3 chart points")
    vertices = []
    for k, p in enumerate(pts):
        if not isinstance(p, list) or len(p) != model.n_params:
            raise SchemaError(
                f"loop point {k} must list {model.n_params} coordinates"
            )
        vertices.append(np.asarray(p, dtype=float))
    # an open vertex list is legal here; closure is enforced on the
    # density-matrix curve itself (NotClosed -> exit 4)
    return np.array(vertices)


def _chart_loop_curve(model, vertices):
    segs = len(vertices) - 1

    def curve(t):
        s = float(np.clip(t, 0.0, 1.0)) * segs
        k = min(int(s), segs - 1)
        frac = s - k
        point = (1 - frac) * vertices[k] + frac * vertices[k + 1]
        return model.evaluate(point)

    return curve


def _random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def _cmd_holonomy(args):
    model = _build_model(args.model or "bloch", _parse_overrides(args.set))
    if args.loop is None:
        raise _UsageError("--loop is required")
    vertices = _load_loop(args.loop, model)
    curve = _chart_loop_curve(model, vertices)
    gauge = None
    if args.seed is not None:
        # randomized (constant) reference gauge: the result is reference
        # independent, so the seed only exercises that invariance.
        g = _random_unitary(np.random.default_rng(args.seed), model.evaluate(vertices[0]).dim)
        gauge = lambda t: g
    steps = args.steps or 1024
    result = holonomy(curve, steps=steps, reference_gauge=gauge)
    fmt = args.format or "json"
    if fmt != "json":
        raise _UsageError("holonomy output supports only --format json")
    _emit(json.dumps(holonomy_report_json(result)) + "\n", args.output)
    return EXIT_OK


def _cmd_limit_sweep(args):
    overrides = _parse_overrides(args.set)
    gap = overrides.pop("gap", 0.5)
    if overrides:
        raise _UsageError(f"unknown --set keys for limit-sweep: {sorted(overrides)}")
    if args.model not in (None, "thermal-qubit"):
        raise _UsageError("limit-sweep supports only the thermal-qubit model")
    try:
        betas = [float(b) for b in (args.betas or "1,2,5,10,20,40").split(",")]
    except ValueError:
        raise _UsageError(f"--betas must be comma-separated numbers, got {args.betas!r}") from None
    if args.point is None:
        raise _UsageError("--point is required")
    model = rotated_field_qubit(betas[0], gap=gap)
    point = _parse_point(args.point, model.param_labels)
    result = thermal_limit_sweep(model, point, betas)

    labels = model.param_labels
    pairs = _pair_indices(len(labels))
    devs = result.deviations
    tail_monotone = all(b < a for a, b in zip(devs, devs[1:]))
    fmt = args.format or "csv"
    if fmt == "csv":
        columns = ["beta"]
        columns += [f"re_Q_{labels[a]}_{labels[b]}" for a, b in pairs]
        columns += [f"im_Q_{labels[a]}_{labels[b]}" for a, b in pairs]
        columns += ["deviation_from_pure", "tail_monotone"]
        rows = []
        for entry in result.entries:
            row = [entry.beta]
            row.extend(entry.tensor.entries[a, b].real for a, b in pairs)
            row.extend(entry.tensor.entries[a, b].imag for a, b in pairs)
            row.extend([entry.deviation, float(tail_monotone)])
            rows.append(row)
        _emit(_csv_text(columns, rows), args.output)
    elif fmt == "json":
        _emit(json.dumps({
            "betas": result.betas,
            "deviations": result.deviations,
            "tail_monotone": tail_monotone,
            "truncated_at": result.truncated_at,
            "pure": qgt_to_json(result.pure_tensor),
            "tensors": [qgt_to_json(e.tensor) for e in result.entries],
        }) + "\n", args.output)
    else:
        raise _UsageError(f"--format must be csv or json, got {fmt!r}")
    if result.truncated_at is not None:
        print(
            f"error: state fell below the rank floor at beta = {result.truncated_at:g};"
            " sweep truncated", file=sys.stderr,
        )
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_validate(args):
    with open(args.input, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise SchemaError("top level must be a JSON object")

    findings = []
    if {"params", "nodes"} <= set(obj):
        model = load_grid_model(obj, check=False, validate_nodes=False)
        for idx in np.ndindex(*(g.size for g in model.grids)):
            for message in density_violations(model.values[idx]):
                findings.append(f"node {list(idx)}: {message}")
        kind = "grid model"
    elif {"dim", "re", "im"} <= set(obj):
        findings.extend(density_violations(matrix_from_json(obj)))
        kind = "matrix"
    else:
        raise SchemaError(
            "unrecognized document: expected matrix keys dim/re/im or"
            " grid-model keys params/nodes"
        )
    for line in findings:
        print(f"FAIL {line}")
    if findings:
        return EXIT_FINDINGS
    print(f"OK: valid {kind}")
    return EXIT_OK


def _add_common(sub):
    sub.add_argument("--model", help="bloch | thermal-qubit | grid-model JSON path")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="model parameter override (repeatable)")
    sub.add_argument("--output", help="output path ('-' or omitted: stdout)")
    sub.add_argument("--format", choices=["csv", "json"], default=None)
    sub.add_argument("--seed", type=int, help="seed for randomized cross-checks")
    sub.add_argument("--config", help="JSON file of defaults for these options")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mixedqgt",
        description="Mixed-state geometric tensor, Bures geodesics and holonomy tools",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    field = subs.add_parser("field", help="tensor over a parameter grid")
    _add_common(field)
    field.add_argument("--grid", action="append", metavar="NAME:MIN:MAX:COUNT")
    field.add_argument("--scheme", help="analytic | central[:h]")
    field.add_argument("--pole-margin", type=float, dest="pole_margin",
                       help="clamp theta grids this far from the poles (default 0.05)")
    field.add_argument("--workers", type=int, help="process count (default 1)")

    geo = subs.add_parser("geodesic", help="geodesic between two states")
    _add_common(geo)
    geo.add_argument("--point-a", dest="point_a", metavar="NAME=VAL,...")
    geo.add_argument("--point-b", dest="point_b", metavar="NAME=VAL,...")
    geo.add_argument("--state-a", dest="state_a", metavar="PATH")
    geo.add_argument("--state-b", dest="state_b", metavar="PATH")
    geo.add_argument("--samples", type=int, help="trace sample count (default 201)")
    geo.add_argument("--angle-margin", type=float, dest="angle_margin")
    geo.add_argument("--allow-rank-deficient", action="store_true",
                     dest="allow_rank_deficient")

    hol = subs.add_parser("holonomy", help="holonomy of a closed chart loop")
    _add_common(hol)
    hol.add_argument("--loop", metavar="PATH", help="JSON file with chart vertices")
    hol.add_argument("--steps", type=int, help="integration steps (default 1024)")

    sweep = subs.add_parser("limit-sweep", help="thermal tensor toward the pure limit")
    _add_common(sweep)
    sweep.add_argument("--point", metavar="NAME=VAL,...")
    sweep.add_argument("--betas", metavar="B1,B2,...")

    val = subs.add_parser("validate", help="validate a matrix or grid-model file")
    val.add_argument("input", metavar="PATH")
    return parser


def _apply_config(args):
    if getattr(args, "config", None) is None:
        return
    with open(args.config, encoding="utf-8") as fh:
        try:
            conf = json.load(fh)
        except json.JSONDecodeError as exc:
            raise _UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(conf, dict):
        raise _UsageError("config must be a JSON object of option values")
    for key, value in conf.items():
        dest = key.replace("-", "_")
        if dest in ("command", "config") or not hasattr(args, dest):
            raise _UsageError(f"config key {key!r} is not an option of this command")
        if getattr(args, dest) is None:
            setattr(args, dest, value)


_COMMANDS = {
    "field": _cmd_field,
    "geodesic": _cmd_geodesic,
    "holonomy": _cmd_holonomy,
    "limit-sweep": _cmd_limit_sweep,
    "validate": _cmd_validate,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        _apply_config(args)
        return _COMMANDS[args.command](args)
    except (_UsageError, SchemaError, NoAnalyticDerivativesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MixedQGTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
