"""Command-line front end: every pipeline reachable with JSON in, JSON/CSV
out, deterministic bytes for a fixed (config, seed) pair.

Exit codes: 0 success, 2 validation/config error (message names the file and
JSON path), 3 numerical failure (divergence details written to --out when
given).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources

import jsonschema
import numpy as np

from .cumulants import convolve, make_nu, moments_to_cumulants, power_eta, \
    species_by_name
from .dist import (MomentTensor, RealizedCP, RealizedDistribution,
                   model_from_json, moments_of, sigma_eval, tensor_to_json)
from .errors import (DimensionMismatchError, FlowDivergenceError,
                     NumericalFailure, SizeCapError,
                     UnsupportedStructureError, ValidationFailure)
from .flow import Generator, h_sigma_evaluator, picard_flow, recover_sigma, \
    rk4_flow
from .limits import TriangularArray, run_bp, run_scalar_bp
from .matalg import matrix_from_json, matrix_to_json, op_norm
from .ncseries import evolution_check, monotone_convolve

_CONFIG_ERRORS = (ValidationFailure, DimensionMismatchError, SizeCapError,
                  UnsupportedStructureError)


def _schema(name: str) -> dict:
    ref = resources.files("ncprob").joinpath(f"schemas/{name}.schema.json")
    with ref.open("r") as fh:
        return json.load(fh)


def _load_json(path: str, schema_name: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ValidationFailure(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise ValidationFailure(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    try:
        jsonschema.validate(raw, _schema(schema_name))
    except jsonschema.ValidationError as exc:
        raise ValidationFailure(
            f"{path}: {exc.json_path}: {exc.message}")
    return raw


def _dump(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _header(args, command: str) -> dict:
    skip = {"func", "out", "csv"}
    opts = {k: v for k, v in sorted(vars(args).items())
            if k not in skip and not callable(v)}
    return {"command": command, "seed": int(getattr(args, "seed", 0)),
            "options": opts}


def _load_law(path: str, orders: int) -> MomentTensor:
    obj = _load_json(path, "model")
    model = model_from_json(obj)
    if isinstance(model, MomentTensor):
        return model
    if isinstance(model, RealizedDistribution):
        return moments_of(model, orders)
    raise ValidationFailure(
        f"{path}: expected a law (moments or realized), got a CP map")


def _load_generator(path: str) -> Generator:
    obj = _load_json(path, "model")
    model = model_from_json(obj)
    if not (isinstance(model, tuple) and len(model) == 2):
        raise ValidationFailure(
            f"{path}: generator files are cp models carrying a gamma block")
    gamma, cp = model
    return Generator(gamma, cp)


def _ints(text: str):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ValidationFailure(f"expected comma-separated integers: {text!r}")


def _floats(text: str):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValidationFailure(f"expected comma-separated numbers: {text!r}")


# --- command handlers ---------------------------------------------------------

def _cmd_cumulants(args) -> int:
    m = _load_law(args.infile, args.orders)
    c = moments_to_cumulants(m, args.species)
    out = tensor_to_json(c, kind="cumulants", species=args.species)
    out["header"] = _header(args, "cumulants")
    _dump(out, args.out)
    return 0


def _cmd_convolve(args) -> int:
    m1 = _load_law(args.infiles[0], args.orders)
    m2 = _load_law(args.infiles[1], args.orders)
    if species_by_name(args.species).tag == "monotone":
        res = monotone_convolve(m1, m2)
    else:
        res = convolve(m1, m2, args.species)
    out = tensor_to_json(res)
    out["header"] = _header(args, "convolve")
    _dump(out, args.out)
    return 0


def _cmd_power(args) -> int:
    m = _load_law(args.infile, args.orders)
    if args.eta is not None:
        eta = matrix_from_json(_load_json(args.eta, "matrix"))
        if eta.shape != (m.d * m.d, m.d * m.d):
            raise ValidationFailure(
                f"{args.eta}: eta must be {m.d * m.d} x {m.d * m.d}")
    else:
        eta = float(args.k) * np.eye(m.d * m.d)
    res = power_eta(m, eta)
    out = tensor_to_json(res)
    out["header"] = _header(args, "power")
    _dump(out, args.out)
    return 0


def _cmd_flow(args) -> int:
    g = _load_generator(args.generator)
    b = matrix_from_json(_load_json(args.point, "matrix"))
    if b.shape[0] % g.d:
        raise ValidationFailure(
            f"{args.point}: dimension must be a multiple of d = {g.d}")
    g = g.at_level(b.shape[0] // g.d)
    if args.method == "picard":
        state = picard_flow(g, b, args.t_max, grid_steps=args.grid_steps,
                            tol=args.tol)
    else:
        state = rk4_flow(g, b, args.t_max, args.dt)
    out = {
        "header": _header(args, "flow"),
        "method": state.method,
        "t_grid": state.t_grid.tolist(),
        "values": [matrix_to_json(w) for w in state.values],
    }
    _dump(out, args.out)
    return 0


def _sigma_from_flag(text: str, d: int) -> RealizedCP:
    if text == "unit":
        if d != 1:
            raise ValidationFailure("--sigma unit is scalar shorthand (d=1)")
        return RealizedCP(1, 1, np.zeros((1, 1)), np.ones((1, 1)))
    if text == "zero":
        return RealizedCP(d, 1, np.zeros((d, d)), np.zeros((d, 1)))
    model = model_from_json(_load_json(text, "model"))
    if isinstance(model, tuple):
        model = model[1]
    if not isinstance(model, RealizedCP):
        raise ValidationFailure(f"{text}: expected a cp model")
    return model


def _gamma_from_flag(text: str) -> np.ndarray:
    try:
        return np.array([[float(text)]], dtype=np.complex128)
    except ValueError:
        return matrix_from_json(_load_json(text, "matrix"))


def _cmd_bp(args) -> int:
    schedule = _ints(args.schedule)
    if args.scalar_seed is not None:
        report = run_scalar_bp(True, schedule, seed=args.scalar_seed,
                               shift=args.shift, n_orders=args.orders,
                               threads=args.threads)
    else:
        gamma = _gamma_from_flag(args.gamma)
        sigma = _sigma_from_flag(args.sigma, gamma.shape[0])
        arr = TriangularArray(gamma, sigma, schedule, n_orders=args.orders)
        report = run_bp(arr, species_set=tuple(args.species.split(",")),
                        threads=args.threads)
    out = report.to_json()
    out["header"] = _header(args, "bp")
    _dump(out, args.out)
    if args.csv is not None:
        with open(args.csv, "w") as fh:
            fh.write(report.to_csv())
    return 0


def _cmd_recover_sigma(args) -> int:
    obj = _load_json(args.sigma, "model")
    model = model_from_json(obj)
    if isinstance(model, tuple):
        model = model[1]
    if not isinstance(model, RealizedCP):
        raise ValidationFailure(f"{args.sigma}: expected a cp model")
    word = [matrix_from_json(_load_json(p, "matrix")) for p in args.word]
    a_norm = op_norm(model.A)
    radius = args.radius if args.radius is not None else \
        (1.0 / a_norm if a_norm > 0 else 1.0)
    got = recover_sigma(h_sigma_evaluator(model), word, model.d,
                        radius=radius)
    ref = sigma_eval(model, word)
    out = {
        "header": _header(args, "recover-sigma"),
        "recovered": matrix_to_json(got),
        "reference": matrix_to_json(ref),
        "max_error": float(np.abs(got - ref).max()),
    }
    _dump(out, args.out)
    return 0


def _cmd_evolution_check(args) -> int:
    m = _load_law(args.infile, args.orders)
    grid = _floats(args.t_grid)
    residual = evolution_check(m, grid)
    out = {
        "header": _header(args, "evolution-check"),
        "t_grid": list(grid),
        "residual": float(residual),
    }
    _dump(out, args.out)
    return 0


# --- parser -------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ncprob",
        description="moment/cumulant pipelines, half-plane flows, and "
                    "triangular-array limit experiments")
    p.add_argument("--seed", type=int, default=0,
                   help="seed recorded in output headers; expands via "
                        "numpy SeedSequence wherever sampling occurs")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("cumulants", help="moments -> species cumulants")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--species", required=True,
                    choices=["classical", "free", "boolean", "monotone"])
    sp.add_argument("--orders", type=int, default=6)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_cumulants)

    sp = sub.add_parser("convolve", help="two laws -> their convolution")
    sp.add_argument("--in", dest="infiles", nargs=2, required=True)
    sp.add_argument("--species", required=True,
                    choices=["classical", "free", "boolean", "monotone"])
    sp.add_argument("--orders", type=int, default=6)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_convolve)

    sp = sub.add_parser("power", help="monotone convolution power mu^(eta)")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--k", type=float, default=2.0,
                    help="scalar power: eta = k times the identity")
    sp.add_argument("--eta", help="matrix JSON overriding --k")
    sp.add_argument("--orders", type=int, default=6)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_power)

    sp = sub.add_parser("flow", help="integrate dF/dt = -Phi(F)")
    sp.add_argument("--generator", required=True,
                    help="cp model JSON carrying a gamma block")
    sp.add_argument("--point", required=True, help="matrix JSON start point")
    sp.add_argument("--t-max", dest="t_max", type=float, default=1.0)
    sp.add_argument("--method", choices=["rk4", "picard"], default="rk4")
    sp.add_argument("--dt", type=float, default=1.0 / 256)
    sp.add_argument("--grid-steps", dest="grid_steps", type=int, default=256)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_flow)

    sp = sub.add_parser("bp", help="triangular-array convergence report")
    sp.add_argument("--gamma", default="0",
                    help="scalar literal or matrix JSON path")
    sp.add_argument("--sigma", default="unit",
                    help="'unit', 'zero', or cp model JSON path")
    sp.add_argument("--schedule", default="2,4,8,16,32,64")
    sp.add_argument("--species", default="free,boolean,monotone")
    sp.add_argument("--scalar-seed", dest="scalar_seed",
                    choices=["clt", "shift", "poisson"],
                    help="run the scalar harness (with classical) instead")
    sp.add_argument("--shift", type=float, default=0.5)
    sp.add_argument("--orders", type=int, default=6)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out")
    sp.add_argument("--csv")
    sp.set_defaults(func=_cmd_bp)

    sp = sub.add_parser("recover-sigma",
                        help="read a sigma word off the H evaluator")
    sp.add_argument("--sigma", required=True, help="cp model JSON")
    sp.add_argument("--word", nargs="+", required=True,
                    help="matrix JSON paths b_1 ... b_{l+1}")
    sp.add_argument("--radius", type=float, default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_recover_sigma)

    sp = sub.add_parser("evolution-check",
                        help="semigroup evolution-equation residual")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--t-grid", dest="t_grid", default="0.3,1,2")
    sp.add_argument("--orders", type=int, default=6)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_evolution_check)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"ncprob: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, FlowDivergenceError) as exc:
        print(f"ncprob: numerical failure: {exc}", file=sys.stderr)
        out = getattr(args, "out", None)
        if out is not None:
            report = {"header": _header(args, args.command),
                      "error": str(exc)}
            residual = getattr(exc, "residual", None)
            if residual is not None:
                report["residual"] = float(residual)
            _dump(report, out)
        return 3


if __name__ == "__main__":
    sys.exit(main())
