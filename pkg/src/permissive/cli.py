"""Command-line front end.

Machine-readable results go to stdout as ``key=value`` lines, diagnostics to
stderr.  Exit codes: 0 success or sound, 1 infeasible or unsound, 2 usage,
3 model error, 4 budget exhausted without an incumbent.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import analysis as an
from .game import DYNAMIC, STATIC, Model, ModelError, gen_knapsack_game
from .milp import (
    EncodeOptions,
    encode_dynamic,
    encode_static,
    encode_transformed_static,
    parse_varmap,
    write_lp,
    write_varmap,
)
from .model_io import (
    format_rational,
    parse_game,
    parse_multistrategy,
    parse_property,
    parse_rational,
    write_game,
    write_multistrategy,
    write_strategy,
)
from .problem import instance_from_model
from .randomized import gadget_instance, write_mapping
from .solver import BudgetError, ImportRejected, import_solution, solve_native

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_MODEL, EXIT_BUDGET = 0, 1, 2, 3, 4
DEFAULT_TIME_LIMIT = 300.0
SMALL_GAME = 10


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _load(path: str):
    text = _read(path)
    return parse_game(text), text


def _fmt_num(v) -> str:
    if isinstance(v, Fraction):
        return format_rational(v)
    if math.isinf(v):
        return "inf"
    return f"{v:.12g}"


def _report(fields: dict) -> None:
    for k, v in fields.items():
        print(f"{k}={v}")


def _write_out(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_validate(args) -> int:
    model, _ = _load(args.model)
    g = model.game
    _report({"command": "validate", "states": len(g.states), "controller_states": len(g.controller_states),
             "pairs": len(g.delta), "status": "ok"})
    return EXIT_OK


def cmd_synth(args) -> int:
    model, text = _load(args.model)
    prop = parse_property(args.prop)
    t0 = time.monotonic()
    strategy, value, sound = an.synthesise(model.game, prop, model.rewards)
    _write_out(args.output, write_strategy(strategy, model.game))
    _report({"command": "synth", "model_sha256": _digest(text), "property": prop, "value": _fmt_num(value),
             "sound": str(sound).lower(), "wall_time": f"{time.monotonic() - t0:.3f}"})
    return EXIT_OK if sound else EXIT_FAIL


def _options(args, inst) -> EncodeOptions:
    opts = set(filter(None, (args.opt or "").split(",")))
    unknown = opts - {"bounds", "zeropen"}
    if unknown:
        raise UsageError(f"unknown optimisation(s): {', '.join(sorted(unknown))}")
    return EncodeOptions(bounds="bounds" in opts, zero_penalty="zeropen" in opts)


def _encode(inst, args, mapping=None, ginst=None):
    options = _options(args, inst)
    if mapping is not None:
        if inst.kind != STATIC:
            raise UsageError("MILP export with --rand supports static penalties only")
        return encode_transformed_static(ginst, mapping, inst, options)
    if inst.kind == STATIC:
        return encode_static(inst, options)
    return encode_dynamic(inst, options)


def cmd_permissive(args) -> int:
    model, text = _load(args.model)
    prop = parse_property(args.prop)
    kind = args.penalty
    if args.rand and args.M is None:
        raise UsageError("--rand needs a granularity -M")
    if args.M is not None and not args.rand:
        raise UsageError("-M only makes sense with --rand")
    if args.M is not None and args.M < 1:
        raise UsageError("-M must be at least 1")
    if args.import_file and args.solver != "export":
        raise UsageError("--import goes with --solver export")
    inst = instance_from_model(model, prop, kind)
    t0 = time.monotonic()
    base = {"command": "permissive", "model_sha256": _digest(text), "property": prop, "penalty_kind": kind,
            "randomised": str(bool(args.rand)).lower()}
    if args.rand:
        base["granularity"] = args.M
    mapping = ginst = None
    if args.rand:
        ginst, mapping = gadget_instance(inst, args.M)

    if args.solver == "export":
        if args.import_file:
            vm = parse_varmap(_read(args.varmap or args.import_file + ".varmap"))
            milp_model, _ = _encode(inst, args, mapping, ginst)
            sol = _read(args.import_file)
            inc = import_solution(sol, vm, inst, milp_model, mapping,
                                  ginst.game if ginst is not None else None)
            _write_out(args.output, write_multistrategy(inc.theta))
            _report({**base, "solver": "import", "solution_sha256": _digest(sol),
                     **_penalty_fields(inc.penalty), "margin": _fmt_num(inc.margin), "optimal": "unknown",
                     "sound": "true", "wall_time": f"{time.monotonic() - t0:.3f}"})
            return EXIT_OK
        if args.output is None or args.output == "-":
            raise UsageError("--solver export needs -o <file.lp>")
        milp_model, vm = _encode(inst, args, mapping, ginst)
        Path(args.output).write_text(write_lp(milp_model))
        Path(args.output + ".varmap").write_text(write_varmap(vm))
        fields = {**base, "solver": "export", "lp": args.output, "varmap": args.output + ".varmap",
                  "variables": len(milp_model.variables), "constraints": len(milp_model.constraints)}
        if mapping is not None:
            Path(args.output + ".mapping").write_text(write_mapping(mapping))
            fields["mapping"] = args.output + ".mapping"
        _report(fields)
        return EXIT_OK

    limit = args.time_limit
    if limit is None and len(inst.game.controller_states) > SMALL_GAME:
        limit = DEFAULT_TIME_LIMIT

    def progress(pen, theta, margin):
        print(f"incumbent penalty={_fmt_num(pen)} t={time.monotonic() - t0:.3f}", file=sys.stderr)

    res = solve_native(inst, time_limit=limit, on_improve=progress, randomised=args.rand, M=args.M,
                       jobs=args.jobs)
    wall = f"{time.monotonic() - t0:.3f}"
    if res.incumbent is None:
        status = "budget_exhausted" if res.timed_out else "infeasible"
        _report({**base, "solver": "native", "status": status, "nodes": res.nodes, "wall_time": wall})
        return EXIT_BUDGET if res.timed_out else EXIT_FAIL
    inc = res.incumbent
    _write_out(args.output, write_multistrategy(inc.theta))
    _report({**base, "solver": "native", "status": "ok", **_penalty_fields(inc.penalty),
             "margin": _fmt_num(inc.margin), "optimal": str(res.optimal).lower(), "sound": "true",
             "nodes": res.nodes, "wall_time": wall})
    return EXIT_OK


def _penalty_fields(pen) -> dict:
    if isinstance(pen, Fraction):
        return {"penalty": format_rational(pen), "penalty_decimal": f"{float(pen):.12g}"}
    return {"penalty": _fmt_num(pen), "penalty_decimal": _fmt_num(pen)}


def cmd_eval(args) -> int:
    model, text = _load(args.model)
    prop = parse_property(args.prop)
    mtext = _read(args.multistrategy)
    theta = parse_multistrategy(mtext, model.game)
    inst = instance_from_model(model, prop, STATIC)
    reduced = inst.restrict(theta)
    ok = an.check_sound(model.game, theta, prop, model.rewards)
    pen_sta = an.static_penalty(reduced, inst.psi, inst.game)
    pen_dyn = an.dynamic_penalty(inst.game, reduced, inst.psi.with_kind(DYNAMIC))
    fields = {"command": "eval", "model_sha256": _digest(text), "multistrategy_sha256": _digest(mtext),
              "property": prop, "sound": str(ok.sound).lower(), "value": _fmt_num(ok.value),
              "margin": _fmt_num(ok.margin), "pen_sta": format_rational(pen_sta), "pen_dyn": _fmt_num(pen_dyn)}
    if args.penalty:
        fields["penalty_kind"] = args.penalty
        fields.update(_penalty_fields(pen_sta if args.penalty == STATIC else pen_dyn))
    _report(fields)
    return EXIT_OK if ok.sound else EXIT_FAIL


def cmd_gen(args) -> int:
    values = [parse_rational(v) for v in args.values.split(",")]
    weights = [parse_rational(w) for w in args.weights.split(",")]
    game, reward, psi, prop = gen_knapsack_game(values, weights, parse_rational(args.V), parse_rational(args.W))
    stem = Path(args.output)
    model = Model(game, {reward.name: reward}, dict(psi.psi))
    Path(f"{stem}.game").write_text(write_game(model))
    Path(f"{stem}.prop").write_text(str(prop) + "\n")
    bound = parse_rational(args.W) / len(values)
    Path(f"{stem}.bound").write_text(f"penalty dynamic <= {format_rational(bound)}\n")
    _report({"command": "gen", "game": f"{stem}.game", "property": prop, "penalty_kind": DYNAMIC,
             "penalty_bound": format_rational(bound), "items": len(values)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="permissive", description="Permissive controller synthesis for stochastic games.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a game file")
    v.add_argument("model")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("synth", help="optimal deterministic strategy")
    s.add_argument("model")
    s.add_argument("--prop", required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("permissive", help="optimally permissive sound multi-strategy")
    m.add_argument("model")
    m.add_argument("--prop", required=True)
    m.add_argument("--penalty", choices=[STATIC, DYNAMIC], default=STATIC)
    m.add_argument("--rand", action="store_true", help="randomised multi-strategies of granularity M")
    m.add_argument("-M", type=int)
    m.add_argument("--solver", choices=["native", "export"], default="native")
    m.add_argument("--import", dest="import_file", metavar="SOL", help="verify a solved MILP (with --solver export)")
    m.add_argument("--varmap", help="variable map sidecar (default: SOL.varmap)")
    m.add_argument("--time-limit", type=float)
    m.add_argument("--opt", help="comma-separated: bounds,zeropen")
    m.add_argument("--jobs", type=int, default=1)
    m.add_argument("-o", "--output")
    m.set_defaults(func=cmd_permissive)

    e = sub.add_parser("eval", help="soundness and penalties of a multi-strategy")
    e.add_argument("model")
    e.add_argument("--prop", required=True)
    e.add_argument("--multistrategy", required=True)
    e.add_argument("--penalty", choices=[STATIC, DYNAMIC])
    e.set_defaults(func=cmd_eval)

    k = sub.add_parser("gen", help="knapsack reduction instance")
    k.add_argument("--values", required=True, help="comma-separated item values in (0,1]")
    k.add_argument("--weights", required=True, help="comma-separated item weights")
    k.add_argument("-V", required=True)
    k.add_argument("-W", required=True)
    k.add_argument("-o", "--output", required=True, help="output stem")
    k.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, BudgetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ImportRejected as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (ModelError, an.AnalysisError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
