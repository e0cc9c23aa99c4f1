"""MILP encodings of deterministic permissive synthesis.

Variables (names as written to LP files):

    y_<s>_<a>        binary, action a allowed at s
    x_<s>            worst-case expected (rescaled) reward from s
    al_<s>           binary, s may carry positive reward
    be_<s>_<a>_<t>   binary, t is the ranking successor of (s, a)
    ga_<s>           ranking value in [0, 1]
    l_<s>, z_<s>     local and expected dynamic penalty
    yp_<s>_<i>_<a>   gadget encoding: branch of selector i allows a
    w_<s>_<i>_<j>_<a> linearisation helper for yp

Lower-bound properties use the ranking encoding.  Upper-bound properties use
a mirrored encoding: ``x`` is a pre-fixed point of the maximising Bellman
operator over allowed actions, which over-approximates the worst case, so no
ranking variables are needed.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping

import numpy as np

from .analysis import MAX, MIN, ObjectiveMode, finite_reward_check, total_reward_values
from .game import DYNAMIC, STATIC, ModelError, MultiStrategy, PenaltyScheme
from .model_io import format_rational, parse_rational
from .problem import Instance

BINARY = "binary"
CONTINUOUS = "continuous"
ROUND_TOL = 1e-5
MAX_DENOMINATOR = 10**12


class EncodingError(ModelError):
    pass


class DecodeError(ModelError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[str, float], ...]
    sense: str  # "<=", ">=", "="
    rhs: float
    family: str = ""


@dataclass(frozen=True)
class MilpModel:
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[str, float], ...]
    offset: float = 0.0

    @property
    def var_index(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    def variable(self, name: str) -> Variable:
        return self.variables[self.var_index[name]]


@dataclass(frozen=True)
class Rescaling:
    kappa_r: Fraction
    kappa_psi: Fraction
    threshold: Fraction
    r_max: Fraction


@dataclass
class VarMap:
    """Two-way index between LP variable names and model roles."""

    kind: str
    lower_bound: bool
    scaling: Rescaling
    by_name: dict[str, tuple] = field(default_factory=dict)
    by_role: dict[tuple, str] = field(default_factory=dict)
    granularity: int | None = None

    def add(self, role: tuple) -> str:
        base = _lp_name(role)
        name, k = base, 1
        while name in self.by_name:
            name = f"{base}_{k}"
            k += 1
        self.by_name[name] = role
        self.by_role[role] = name
        return name

    def __getitem__(self, role: tuple) -> str:
        return self.by_role[role]

    def get(self, role: tuple):
        return self.by_role.get(role)


_PREFIX = {"y": "y", "x": "x", "alpha": "al", "beta": "be", "gamma": "ga",
           "z": "z", "ell": "l", "yp": "yp", "w": "w"}


def _lp_name(role: tuple) -> str:
    parts = [_PREFIX[role[0]]] + [re.sub(r"[^A-Za-z0-9]", "_", str(p)) for p in role[1:]]
    return "_".join(parts)


class _Builder:
    def __init__(self, varmap: VarMap):
        self.vm = varmap
        self.vars: list[Variable] = []
        self.cons: list[Constraint] = []
        self.obj: dict[str, float] = {}
        self.offset = 0.0

    def var(self, role, kind, lb=0.0, ub=1.0) -> str:
        name = self.vm.add(role)
        self.vars.append(Variable(name, kind, float(lb), float(ub)))
        return name

    def add(self, coeffs: Mapping[str, float], sense: str, rhs: float, family: str):
        merged: dict[str, float] = {}
        for k, v in coeffs.items():
            merged[k] = merged.get(k, 0.0) + float(v)
        items = tuple((k, v) for k, v in merged.items() if v != 0.0)
        self.cons.append(Constraint(f"c{len(self.cons) + 1}", items, sense, float(rhs), family))

    def build(self) -> MilpModel:
        return MilpModel(tuple(self.vars), tuple(self.cons),
                         tuple((k, v) for k, v in self.obj.items() if v != 0.0), self.offset)


def _check_denominators(inst: Instance):
    for dist in inst.game.delta.values():
        for _, p in dist:
            if p.denominator > MAX_DENOMINATOR:
                raise EncodingError(f"probability {p} has a denominator above 10^12")


def rational_gcd(values) -> Fraction:
    """Largest rational g such that every value is an integer multiple of g."""
    vals = [Fraction(v) for v in values if v]
    if not vals:
        return Fraction(1)
    num = 0
    den = 1
    for v in vals:
        den = den * v.denominator // math.gcd(den, v.denominator)
    for v in vals:
        num = math.gcd(num, v.numerator * (den // v.denominator))
    return Fraction(num, den)


def rescale(inst: Instance, extra_penalties=()) -> Rescaling:
    """Scale rewards so every sup-value is at most 1/2 and penalties to integers."""
    game, reward = inst.game, inst.reward
    if not finite_reward_check(game, reward):
        raise EncodingError("rewards can grow without bound; rescaling needs finite values")
    vals = total_reward_values(game, reward, ObjectiveMode(MAX, MAX)).values
    r_max = Fraction(float(np.max(vals))).limit_denominator(10**6) if len(vals) else Fraction(0)
    kappa_r = Fraction(1) if r_max == 0 else 1 / (2 * r_max)
    penalties = [v for v in inst.psi.psi.values() if v] + [v for v in extra_penalties if v]
    kappa_psi = 1 / rational_gcd(penalties)
    return Rescaling(kappa_r, kappa_psi, inst.threshold * kappa_r, r_max)


@dataclass(frozen=True)
class EncodeOptions:
    bounds: bool = False
    zero_penalty: bool = False
    c: float | None = None


def _core(inst: Instance, b: _Builder, scaling: Rescaling):
    """Core constraints for lower bounds, or their mirrored form for upper bounds."""
    game = inst.game
    rw = {k: float(v * scaling.kappa_r) for k, v in inst.reward.values.items() if v}
    S = len(game.states)
    x = {s: b.var(("x", s), CONTINUOUS, 0.0, 1.0) for s in game.states}
    y = {}
    lower = inst.lower_bound
    for s in game.states:
        if game.is_controller(s) or lower:
            for a in game.actions(s):
                y[(s, a)] = b.var(("y", s, a), BINARY)
    init = x[game.initial]
    bval = float(scaling.threshold)
    if lower:
        b.add({init: 1}, ">=", bval, "1")
    else:
        b.add({init: 1}, "<=", bval, "1")
    for s in game.controller_states:
        b.add({y[(s, a)]: 1 for a in game.actions(s)}, ">=", 1, "2")
    for s in game.states:
        ctrl = game.is_controller(s)
        for a in game.actions(s):
            coeffs = {x[s]: 1.0}
            for t, p in game.delta[(s, a)]:
                coeffs[x[t]] = coeffs.get(x[t], 0.0) - float(p)
            r = rw.get((s, a), 0.0)
            if lower:
                if ctrl:
                    # x_s - sum d x_t + y <= r + 1
                    coeffs[y[(s, a)]] = 1.0
                    b.add(coeffs, "<=", r + 1.0, "3")
                else:
                    b.add(coeffs, "<=", r, "4")
            else:
                if ctrl:
                    # x_s - sum d x_t - y >= r - 1
                    coeffs[y[(s, a)]] = -1.0
                    b.add(coeffs, ">=", r - 1.0, "3")
                else:
                    b.add(coeffs, ">=", r, "4")
    if lower:
        alpha = {s: b.var(("alpha", s), BINARY) for s in game.states}
        gamma = {s: b.var(("gamma", s), CONTINUOUS, 0.0, 1.0) for s in game.states}
        for s in game.states:
            b.add({x[s]: 1, alpha[s]: -1}, "<=", 0, "5")
            for a in game.actions(s):
                coeffs = {y[(s, a)]: 1.0, alpha[s]: 1.0}
                betas = []
                for t, _ in game.delta[(s, a)]:
                    beta = b.var(("beta", s, a, t), BINARY)
                    betas.append((t, beta))
                    coeffs[beta] = -1.0
                b.add(coeffs, "=", 1, "6")
                if not game.is_controller(s):
                    b.add({y[(s, a)]: 1}, "=", 1, "7")
                if rw.get((s, a), 0.0) == 0.0:
                    for t, beta in betas:
                        # gamma_t <= gamma_s + (1 - beta) - 1/|S|
                        coeffs = {beta: 1.0}
                        if t != s:
                            coeffs[gamma[t]] = 1.0
                            coeffs[gamma[s]] = -1.0
                        b.add(coeffs, "<=", 1 - 1 / S, "8")
    return x, y


def encode_static(inst: Instance, options: EncodeOptions = EncodeOptions(), scaling: Rescaling | None = None):
    """Static-penalty encoding; objective is penalty plus a reward tie-break."""
    if inst.kind != STATIC:
        raise EncodingError("encode_static needs a static penalty scheme")
    _check_denominators(inst)
    scaling = scaling or rescale(inst)
    vm = VarMap(STATIC, inst.lower_bound, scaling)
    b = _Builder(vm)
    x, y = _core(inst, b, scaling)
    game = inst.game
    for s in game.controller_states:
        for a in game.actions(s):
            w = inst.psi(s, a) * scaling.kappa_psi
            if w:
                b.obj[y[(s, a)]] = b.obj.get(y[(s, a)], 0.0) - float(w)
                b.offset += float(w)
    b.obj[x[game.initial]] = b.obj.get(x[game.initial], 0.0) + (-1.0 if inst.lower_bound else 1.0)
    model = _finish(b, inst, options)
    return model, vm


def compute_c(inst_or_game, psi: PenaltyScheme) -> float:
    """Upper bound on any finite dynamic penalty of a deterministic multi-strategy.

    ``|S| * pen_max * (1 - q) / q`` with ``q = p^|S|`` for the smallest
    transition probability ``p``; when that is 0 but penalties exist,
    ``|S| * sum(psi)`` is used instead, and 1 when there are no penalties.
    """
    game = inst_or_game.game if isinstance(inst_or_game, Instance) else inst_or_game
    if psi.kind != DYNAMIC:
        raise EncodingError("compute_c applies to dynamic penalties")
    n = len(game.states)
    pen_max = max((psi.total(game, s) for s in game.controller_states), default=Fraction(0))
    if pen_max == 0:
        return 1.0
    p = float(game.min_probability)
    q = p ** n
    c = n * float(pen_max) * (1 - q) / q if q > 0 else math.inf
    if c == 0:
        c = n * float(sum(psi.psi.values()))
    return c


def default_c(inst: Instance, scaling: Rescaling) -> float:
    """Big-M for the dynamic encoding, in rescaled penalty units.

    The series bound misses the block in which the penalty-free region is
    finally reached, and the big-M must exceed successor penalties plus a
    local penalty, so ``(|S| + 1) * pen_max`` is added on top.
    """
    psi = PenaltyScheme({k: v * scaling.kappa_psi for k, v in inst.psi.psi.items()}, DYNAMIC)
    game = inst.game
    pen_max = max((float(psi.total(game, s)) for s in game.controller_states), default=0.0)
    return compute_c(game, psi) + (len(game.states) + 1) * pen_max


def encode_dynamic(inst: Instance, options: EncodeOptions = EncodeOptions(), scaling: Rescaling | None = None):
    """Dynamic-penalty encoding minimising the expected penalty ``z`` at the initial state."""
    if inst.kind != DYNAMIC:
        raise EncodingError("encode_dynamic needs a dynamic penalty scheme")
    _check_denominators(inst)
    scaling = scaling or rescale(inst)
    c = options.c if options.c is not None else default_c(inst, scaling)
    if not c > 0:
        raise EncodingError("the constant c must be positive")
    vm = VarMap(DYNAMIC, inst.lower_bound, scaling)
    b = _Builder(vm)
    x, y = _core(inst, b, scaling)
    game = inst.game
    z = {s: b.var(("z", s), CONTINUOUS, 0.0, c) for s in game.states}
    for s in game.controller_states:
        psis = {a: float(inst.psi(s, a) * scaling.kappa_psi) for a in game.actions(s)}
        ell = b.var(("ell", s), CONTINUOUS, 0.0, sum(psis.values()))
        coeffs = {ell: 1.0}
        for a, w in psis.items():
            if w:
                coeffs[y[(s, a)]] = w
        b.add(coeffs, "=", sum(psis.values()), "9")
        for a in game.actions(s):
            co = {z[s]: 1.0, ell: -1.0, y[(s, a)]: -c}
            for t, p in game.delta[(s, a)]:
                co[z[t]] = co.get(z[t], 0.0) - float(p)
            b.add(co, ">=", -c, "10")
    for s in game.environment_states:
        for a in game.actions(s):
            co = {z[s]: 1.0}
            for t, p in game.delta[(s, a)]:
                co[z[t]] = co.get(z[t], 0.0) - float(p)
            b.add(co, ">=", 0.0, "11")
    b.obj[z[game.initial]] = 1.0
    return _finish(b, inst, options), vm


def _finish(b: _Builder, inst: Instance, options: EncodeOptions) -> MilpModel:
    model = b.build()
    if options.bounds:
        model = apply_bounds_optimisation(model, inst, b.vm)
    if options.zero_penalty:
        model = apply_zero_penalty_optimisation(model, inst, b.vm)
    return model


def apply_bounds_optimisation(model: MilpModel, inst: Instance, varmap: VarMap) -> MilpModel:
    """Tighten each x_s to [inf E, sup E] of the (rescaled) reward over all strategies."""
    game = inst.game
    k = float(varmap.scaling.kappa_r)
    lo = total_reward_values(game, inst.reward, ObjectiveMode(MIN, MIN)).values
    hi = total_reward_values(game, inst.reward, ObjectiveMode(MAX, MAX)).values
    names = {varmap[("x", s)]: i for i, s in enumerate(game.states)}
    out = []
    for v in model.variables:
        i = names.get(v.name)
        if i is None:
            out.append(v)
            continue
        l = 0.0 if lo[i] == 0 else max(0.0, lo[i] * k - 1e-9)
        u = 0.0 if hi[i] == 0 else min(v.ub, hi[i] * k + 1e-9)
        out.append(replace(v, lb=max(v.lb, l), ub=u))
    return replace(model, variables=tuple(out))


def apply_zero_penalty_optimisation(model: MilpModel, inst: Instance, varmap: VarMap) -> MilpModel:
    """Allow at most one zero-penalty action per controller state.

    With the ranking encoding a state whose ``al`` is 0 must allow every
    action, so there the constraint is relaxed by ``(|Z_s| - 1)(1 - al_s)``.
    """
    cons = list(model.constraints)
    game = inst.game
    for s in game.controller_states:
        zs = [a for a in game.actions(s) if inst.psi(s, a) == 0]
        if len(zs) < 2:
            continue
        coeffs = {varmap[("y", s, a)]: 1.0 for a in zs}
        rhs = 1.0
        al = varmap.get(("alpha", s))
        if al is not None:
            coeffs[al] = float(len(zs) - 1)
            rhs = float(len(zs))
        cons.append(Constraint(f"c{len(cons) + 1}", tuple(coeffs.items()), "<=", rhs, "Z"))
    return replace(model, constraints=tuple(cons))


def encode_transformed_static(ginst: Instance, mapping, base: Instance,
                              options: EncodeOptions = EncodeOptions(), scaling: Rescaling | None = None):
    """Static encoding on a gadget game whose objective charges original penalties.

    ``ginst`` is the instance on the gadget game, ``base`` the instance on the
    original (reward) game that owns the penalty function.
    """
    if base.kind != STATIC:
        raise EncodingError("the transformed objective is for static penalties")
    if set(mapping.selectors) != set(base.game.controller_states):
        raise EncodingError("gadget mapping does not match the game")
    _check_denominators(ginst)
    scaling = scaling or rescale(ginst, extra_penalties=base.psi.psi.values())
    M = mapping.M
    vm = VarMap("transformed", ginst.lower_bound, scaling, granularity=M)
    b = _Builder(vm)
    x, y = _core(ginst, b, scaling)
    g = ginst.game
    for s, sels in mapping.selectors.items():
        g1, g2 = mapping.gadgets[s]
        for i, (sel, l) in enumerate(zip(sels, mapping.weights), start=1):
            for a in base.game.actions(s):
                yp = b.var(("yp", s, i, a), BINARY)
                ws = []
                for j, gj in ((1, g1), (2, g2)):
                    w = b.var(("w", s, i, j, a), BINARY)
                    ws.append(w)
                    b.add({w: 1, y[(sel, f"b{j}")]: -1}, "<=", 0, "yp")
                    b.add({w: 1, y[(gj, a)]: -1}, "<=", 0, "yp")
                b.add({yp: 1, ws[0]: -1, ws[1]: -1}, "<=", 0, "yp")
                wgt = float(Fraction(l) * base.psi(s, a) * scaling.kappa_psi)
                if wgt:
                    b.obj[yp] = b.obj.get(yp, 0.0) - wgt
                    b.offset += wgt
    b.obj[x[g.initial]] = b.obj.get(x[g.initial], 0.0) + (-1.0 if ginst.lower_bound else 1.0)
    return _finish(b, ginst, options), vm


# --- LP text and solutions --------------------------------------------------


def _num(v: float) -> str:
    return f"{v:.15g}"


def _terms(coeffs) -> str:
    out = []
    for k, (name, v) in enumerate(coeffs):
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        coef = "" if mag == 1 else _num(mag) + " "
        if k == 0:
            out.append(f"{'- ' if v < 0 else ''}{coef}{name}")
        else:
            out.append(f"{sign} {coef}{name}")
    return " ".join(out) if out else "0"


def write_lp(model: MilpModel) -> str:
    lines = ["\\ objective offset " + _num(model.offset), "Minimize", " obj: " + _terms(model.objective),
             "Subject To"]
    for c in model.constraints:
        lines.append(f" {c.name}: {_terms(c.coeffs)} {c.sense} {_num(c.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == CONTINUOUS:
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    lines.append("Binary")
    for v in model.variables:
        if v.kind == BINARY:
            lines.append(f" {v.name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_varmap(vm: VarMap) -> str:
    sc = vm.scaling
    lines = [
        f"kind {vm.kind}",
        f"direction {'>=' if vm.lower_bound else '<='}",
        f"kappa_r {format_rational(sc.kappa_r)}",
        f"kappa_psi {format_rational(sc.kappa_psi)}",
        f"threshold {format_rational(sc.threshold)}",
        f"r_max {format_rational(sc.r_max)}",
    ]
    if vm.granularity is not None:
        lines.append(f"granularity {vm.granularity}")
    for name, role in vm.by_name.items():
        lines.append("var " + " ".join([name] + [str(p) for p in role]))
    return "\n".join(lines) + "\n"


def parse_varmap(text: str) -> VarMap:
    head: dict[str, str] = {}
    roles: list[tuple[str, tuple]] = []
    for line in text.splitlines():
        toks = line.split()
        if not toks or toks[0].startswith("#"):
            continue
        if toks[0] == "var":
            role = list(toks[2:])
            if role[0] in ("yp", "w"):
                role[2] = int(role[2])
            if role[0] == "w":
                role[3] = int(role[3])
            roles.append((toks[1], tuple(role)))
        else:
            head[toks[0]] = toks[1]
    sc = Rescaling(parse_rational(head["kappa_r"]), parse_rational(head["kappa_psi"]),
                   parse_rational(head["threshold"]), parse_rational(head.get("r_max", "0")))
    vm = VarMap(head["kind"], head["direction"] == ">=", sc,
                granularity=int(head["granularity"]) if "granularity" in head else None)
    for name, role in roles:
        vm.by_name[name] = role
        vm.by_role[role] = name
    return vm


def parse_solution(text: str) -> dict[str, float]:
    out = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 2:
            raise DecodeError(f"line {ln}: expected `<variable> <value>`")
        try:
            out[toks[0]] = float(toks[1])
        except ValueError:
            raise DecodeError(f"line {ln}: bad number {toks[1]!r}") from None
    return out


def write_solution(assignment: Mapping[str, float]) -> str:
    return "".join(f"{k} {_num(v)}\n" for k, v in assignment.items())


@dataclass
class Decoded:
    theta: MultiStrategy  # on the encoded game
    objective: float
    penalty_scaled: float  # penalty read off the assignment, original scale


def _binary(assignment, name):
    if name not in assignment:
        raise DecodeError(f"binary variable {name} missing from the assignment")
    v = assignment[name]
    r = round(v)
    if abs(v - r) > ROUND_TOL or r not in (0, 1):
        raise DecodeError(f"variable {name} = {v} is not binary within {ROUND_TOL}")
    return int(r)


def decode_solution(assignment: Mapping[str, float], varmap: VarMap, game, model: MilpModel | None = None) -> Decoded:
    """Read the deterministic multi-strategy encoded by the ``y`` variables."""
    sets = {}
    for s in game.controller_states:
        allowed = [a for a in game.actions(s) if _binary(assignment, varmap[("y", s, a)])]
        if not allowed:
            raise DecodeError(f"no action allowed at {s}: every controller state needs at least one y_{s},a = 1")
        sets[s] = allowed
    theta = MultiStrategy.from_sets(sets)
    objective = float("nan")
    if model is not None:
        lbs = {v.name: v.lb for v in model.variables}
        objective = model.offset + sum(c * assignment.get(n, lbs.get(n, 0.0)) for n, c in model.objective)
    kpsi = float(varmap.scaling.kappa_psi)
    if varmap.kind == DYNAMIC:
        pen = assignment.get(varmap[("z", game.initial)], 0.0) / kpsi
    elif model is not None:
        xname = varmap[("x", game.initial)]
        xv = assignment.get(xname, 0.0)
        pen = (objective + (xv if varmap.lower_bound else -xv)) / kpsi
    else:
        pen = float("nan")
    if varmap.kind == "transformed" and varmap.granularity:
        # objective weights are l_i = M * p_i
        pen /= varmap.granularity
    return Decoded(theta, objective, pen)


# passed to HiGHS verbatim; big-M rows make the defaults (1e-6) too loose
_HIGHS_TOLERANCES = {"mip_feasibility_tolerance": 1e-10, "primal_feasibility_tolerance": 1e-10}
REPAIR_ROUNDS = 100


def _highs(c, A, lo, hi, integrality, lb, ub, time_limit):
    import warnings

    from scipy.optimize import Bounds, LinearConstraint, milp

    options = {"mip_rel_gap": 0.0, **_HIGHS_TOLERANCES}
    if time_limit is not None:
        options["time_limit"] = max(float(time_limit), 1e-3)
    cons = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lb, ub), options=options)


def solve_milp(model: MilpModel, time_limit: float | None = None):
    """Solve with SciPy's HiGHS interface; returns ``(status, assignment, objective)``.

    ``status`` is one of ``optimal``, ``infeasible``, ``time_limit`` or ``error``.
    Binaries in the returned assignment are exact 0/1 and the continuous part
    is re-solved with them fixed.  If rounding breaks feasibility or worsens the
    objective (big-M rows are sensitive to integrality slack), that binary
    pattern is cut off and the MILP solved again.
    """
    from scipy.sparse import lil_matrix, vstack

    deadline = None if time_limit is None else time.monotonic() + time_limit
    idx = model.var_index
    n = len(model.variables)
    c = np.zeros(n)
    for name, v in model.objective:
        c[idx[name]] += v
    A = lil_matrix((len(model.constraints), n))
    lo = np.full(len(model.constraints), -np.inf)
    hi = np.full(len(model.constraints), np.inf)
    for r, con in enumerate(model.constraints):
        for name, v in con.coeffs:
            A[r, idx[name]] += v
        if con.sense in ("<=", "="):
            hi[r] = con.rhs
        if con.sense in (">=", "="):
            lo[r] = con.rhs
    A = A.tocsr()
    integrality = np.array([1 if v.kind == BINARY else 0 for v in model.variables])
    binary = integrality == 1
    lb = np.array([v.lb for v in model.variables], dtype=float)
    ub = np.array([v.ub for v in model.variables], dtype=float)
    timed_out = False
    for _ in range(REPAIR_ROUNDS):
        left = None if deadline is None else deadline - time.monotonic()
        if left is not None and left <= 0:
            return "time_limit", None, None
        res = _highs(c, A, lo, hi, integrality, lb, ub, left)
        if res.x is None:
            status = "infeasible" if res.status == 2 else ("time_limit" if res.status == 1 else "error")
            return status, None, None
        timed_out = res.status != 0
        pattern = np.round(res.x[binary])
        flb, fub = lb.copy(), ub.copy()
        flb[binary] = fub[binary] = pattern
        fixed = _highs(c, A, lo, hi, np.zeros(n), flb, fub, None)
        scale = max(1.0, abs(res.fun))
        if fixed.x is not None and fixed.fun <= res.fun + 1e-7 * scale:
            x = fixed.x
            x[binary] = pattern
            assignment = {v.name: float(x[i]) for i, v in enumerate(model.variables)}
            return ("time_limit" if timed_out else "optimal"), assignment, float(fixed.fun) + model.offset
        # no-good cut: sum over ones of (1 - y) + sum over zeros of y >= 1
        row = lil_matrix((1, n))
        cols = np.flatnonzero(binary)
        ones = 0
        for j, v in zip(cols, pattern):
            row[0, j] = -1.0 if v == 1 else 1.0
            ones += int(v == 1)
        A = vstack([A, row.tocsr()]).tocsr()
        lo = np.append(lo, 1.0 - ones)
        hi = np.append(hi, np.inf)
    return "error", None, None
