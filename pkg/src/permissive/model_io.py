"""Line-oriented text formats for games, properties and multi-strategies.

Game files::

    # comment
    state s0 controller
    state s1 environment
    init s0
    trans s0 east s1:1
    trans s1 impede s0:3/4 s2:0.25
    label goal s5
    reward moves s0 east 1
    penalty s0 east 1

Multi-strategy files::

    multistrategy rand
    allow s0 : east south
    allow s3 : 7/10 { east } 3/10 { east north }
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .game import (
    CONTROLLER,
    ENVIRONMENT,
    Model,
    ModelError,
    MultiStrategy,
    Property,
    RewardStructure,
    StochasticGame,
    check_multistrategy,
    validate_game,
)

_ID = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.'\-@]*\Z")
_RAT = re.compile(r"(\d+)(?:/(\d+)|\.(\d{1,12}))?\Z")
_MAX_DECIMALS = 12


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


class ParseError(ModelError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


def parse_rational(text: str, span: SourceSpan | None = None) -> Fraction:
    """Parse ``7``, ``3/4`` or ``0.75`` exactly."""
    span = span or SourceSpan(1, 1)
    m = _RAT.match(text)
    if not m:
        if re.fullmatch(r"\d+\.\d{13,}", text):
            raise ParseError(f"more than {_MAX_DECIMALS} fractional digits in {text!r}", span)
        raise ParseError(f"expected a non-negative rational, got {text!r}", span)
    whole, den, frac = m.groups()
    if den is not None:
        if int(den) == 0:
            raise ParseError("zero denominator", span)
        return Fraction(int(whole), int(den))
    if frac is not None:
        return Fraction(int(whole + frac), 10 ** len(frac))
    return Fraction(int(whole))


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _tokens(line: str):
    """Yield ``(token, column)`` pairs, dropping a trailing comment."""
    cut = line.find("#")
    if cut >= 0:
        line = line[:cut]
    for m in re.finditer(r"\S+", line):
        yield m.group(), m.start() + 1


def _check_id(tok: str, span: SourceSpan, allow_reserved: bool) -> str:
    if not _ID.match(tok):
        raise ParseError(f"invalid identifier {tok!r}", span)
    if "@" in tok and not allow_reserved:
        raise ParseError(f"'@' is reserved for generated states: {tok!r}", span)
    return tok


def parse_game(text: str, allow_reserved: bool = False) -> Model:
    """Parse a game file into a :class:`Model` (game, rewards, penalties)."""
    states: list[str] = []
    owners: dict[str, str] = {}
    spans: dict[str, SourceSpan] = {}
    initial = None
    delta: dict[tuple[str, str], tuple] = {}
    refs: list[tuple[str, SourceSpan]] = []
    dist_spans: dict[tuple[str, str], SourceSpan] = {}
    labels: dict[str, set[str]] = {}
    rewards: dict[str, dict] = {}
    psi: dict[tuple[str, str], Fraction] = {}
    pair_refs: list[tuple[str, str, SourceSpan, str]] = []
    seen_rewards: set = set()
    seen_psi: set = set()

    for ln, line in enumerate(text.splitlines(), start=1):
        toks = list(_tokens(line))
        if not toks:
            continue
        kw, col = toks[0]

        def sp(i):
            return SourceSpan(ln, toks[i][1])

        def need(n, usage):
            if len(toks) != n:
                where = sp(min(len(toks) - 1, n)) if len(toks) > n else SourceSpan(ln, len(line) + 1)
                raise ParseError(f"expected `{usage}`", where)

        if kw == "state":
            need(3, "state <id> controller|environment")
            sid = _check_id(toks[1][0], sp(1), allow_reserved)
            if sid in owners:
                raise ParseError(f"duplicate state {sid!r}", sp(1))
            if toks[2][0] not in (CONTROLLER, ENVIRONMENT):
                raise ParseError("state owner must be controller or environment", sp(2))
            states.append(sid)
            owners[sid] = toks[2][0]
            spans[sid] = sp(1)
        elif kw == "init":
            need(2, "init <id>")
            if initial is not None:
                raise ParseError("initial state given twice", sp(0))
            initial = toks[1][0]
            refs.append((initial, sp(1)))
        elif kw == "trans":
            if len(toks) < 4:
                raise ParseError("expected `trans <state> <action> <succ>:<rat> ...`", SourceSpan(ln, len(line) + 1))
            s, a = toks[1][0], _check_id(toks[2][0], sp(2), True)
            refs.append((s, sp(1)))
            if (s, a) in delta:
                raise ParseError(f"duplicate transition {s} {a}", sp(2))
            dist = []
            seen = set()
            for i in range(3, len(toks)):
                tok, c = toks[i]
                if ":" not in tok:
                    raise ParseError(f"expected <succ>:<prob>, got {tok!r}", sp(i))
                t, _, p = tok.rpartition(":")
                if t in seen:
                    raise ParseError(f"successor {t!r} listed twice", sp(i))
                seen.add(t)
                q = parse_rational(p, SourceSpan(ln, c + len(t) + 1))
                if q == 0:
                    raise ParseError("transition probability must be positive", SourceSpan(ln, c + len(t) + 1))
                refs.append((t, sp(i)))
                dist.append((t, q))
            total = sum((q for _, q in dist), Fraction(0))
            if total != 1:
                raise ParseError(f"distribution sums to {format_rational(total)}", sp(2))
            delta[(s, a)] = tuple(dist)
            dist_spans[(s, a)] = sp(2)
        elif kw == "label":
            if len(toks) < 3:
                raise ParseError("expected `label <name> <state> ...`", SourceSpan(ln, len(line) + 1))
            name = _check_id(toks[1][0], sp(1), False)
            for i in range(2, len(toks)):
                refs.append((toks[i][0], sp(i)))
                labels.setdefault(name, set()).add(toks[i][0])
        elif kw == "reward":
            need(5, "reward <name> <state> <action> <rat>")
            name = _check_id(toks[1][0], sp(1), False)
            key = (toks[2][0], toks[3][0])
            pair_refs.append((key[0], key[1], sp(2), "reward"))
            table = rewards.setdefault(name, {})
            if key in table or (name, key) in seen_rewards:
                raise ParseError(f"duplicate reward for {key[0]} {key[1]}", sp(3))
            seen_rewards.add((name, key))
            value = parse_rational(toks[4][0], sp(4))
            if value:
                table[key] = value
        elif kw == "penalty":
            need(4, "penalty <state> <action> <rat>")
            key = (toks[1][0], toks[2][0])
            pair_refs.append((key[0], key[1], sp(1), "penalty"))
            value = parse_rational(toks[3][0], sp(3))
            if key in seen_psi:
                raise ParseError(f"duplicate penalty for {key[0]} {key[1]}", sp(2))
            seen_psi.add(key)
            if value:
                psi[key] = value
        else:
            raise ParseError(f"unknown keyword {kw!r}", SourceSpan(ln, col))

    if not states:
        raise ParseError("no states declared", SourceSpan(1, 1))
    for sid, span in refs:
        if sid not in owners:
            raise ParseError(f"unknown state {sid!r}", span)
    for s, a, span, what in pair_refs:
        if s not in owners:
            raise ParseError(f"unknown state {s!r}", span)
        if (s, a) not in delta:
            raise ParseError(f"{what} on undefined action {a!r} of {s}", span)
        if what == "penalty" and owners[s] != CONTROLLER:
            raise ParseError(f"penalty on environment state {s!r}", span)
    game = StochasticGame(
        tuple(states), owners, initial if initial is not None else states[0], delta,
        {k: frozenset(v) for k, v in labels.items()},
    )
    report = validate_game(game)
    if report:
        v = report[0]
        span = spans.get(v.state, SourceSpan(1, 1)) if v.state else SourceSpan(1, 1)
        raise ParseError(str(v), span)
    return Model(game, {k: RewardStructure(k, v) for k, v in rewards.items()}, psi)


def write_game(model: Model) -> str:
    game = model.game
    out = []
    for s in game.states:
        out.append(f"state {s} {game.owners[s]}")
    out.append(f"init {game.initial}")
    for s in game.states:
        for a in game.actions(s):
            succ = " ".join(f"{t}:{format_rational(p)}" for t, p in game.delta[(s, a)])
            out.append(f"trans {s} {a} {succ}")
    for name in sorted(game.labels):
        members = sorted(game.labels[name], key=game.index.get)
        if members:
            out.append(f"label {name} {' '.join(members)}")
    first = next(iter(game.delta))
    for name in sorted(model.rewards):
        entries = [(k, v) for k, v in model.rewards[name].values.items() if v]
        if not entries:
            # a zero entry keeps an all-zero structure declared
            entries = [(first, Fraction(0))]
        for (s, a), v in entries:
            out.append(f"reward {name} {s} {a} {format_rational(v)}")
    for (s, a), v in model.psi.items():
        if v:
            out.append(f"penalty {s} {a} {format_rational(v)}")
    return "\n".join(out) + "\n"


_PROP_REACH = re.compile(r"\s*P\s*(>=|<=)\s*(\S+?)\s*\[\s*F\s+([^\]]*?)\s*\]\s*\Z")
_PROP_REWARD = re.compile(r"\s*R\s*\{\s*([^}\s]+)\s*\}\s*(>=|<=)\s*(\S+)\s*\Z")


def parse_property(text: str) -> Property:
    """``P>=p [F s5 goal]`` or ``R{moves}<=5``."""
    m = _PROP_REACH.match(text)
    if m:
        span = SourceSpan(1, m.start(2) + 1)
        p = parse_rational(m.group(2), span)
        if p > 1:
            raise ParseError(f"probability bound {format_rational(p)} outside [0,1]", span)
        targets = tuple(m.group(3).split())
        if not targets:
            raise ParseError("empty target set", SourceSpan(1, m.start(3) + 1))
        return Property("reach", m.group(1), p, target=targets)
    m = _PROP_REWARD.match(text)
    if m:
        b = parse_rational(m.group(3), SourceSpan(1, m.start(3) + 1))
        return Property("reward", m.group(2), b, reward=m.group(1))
    col = len(text) - len(text.lstrip()) + 1
    raise ParseError("expected `P(>=|<=)<p> [F <targets>]` or `R{<name>}(>=|<=)<b>`", SourceSpan(1, col))


def write_property(prop: Property) -> str:
    return str(prop)


def write_multistrategy(theta: MultiStrategy) -> str:
    det = theta.is_deterministic
    out = [f"multistrategy {'det' if det else 'rand'}"]
    for s in sorted(theta.choice):
        dist = theta.choice[s]
        if len(dist) == 1:
            out.append(f"allow {s} : {' '.join(sorted(dist[0][0]))}")
        else:
            parts = []
            for acts, w in sorted(dist, key=lambda e: (len(e[0]), sorted(e[0]))):
                parts.append(f"{format_rational(w)} {{ {' '.join(sorted(acts))} }}")
            out.append(f"allow {s} : {' '.join(parts)}")
    return "\n".join(out) + "\n"


def parse_multistrategy(text: str, game: StochasticGame) -> MultiStrategy:
    header = None
    choice: dict[str, list] = {}
    last = SourceSpan(1, 1)
    for ln, line in enumerate(text.splitlines(), start=1):
        toks = list(_tokens(line))
        if not toks:
            continue
        last = SourceSpan(ln, 1)

        def sp(i):
            return SourceSpan(ln, toks[i][1])

        if header is None:
            if toks[0][0] != "multistrategy" or len(toks) != 2 or toks[1][0] not in ("det", "rand"):
                raise ParseError("expected `multistrategy det|rand` header", sp(0))
            header = toks[1][0]
            continue
        if toks[0][0] != "allow" or len(toks) < 4 or toks[2][0] != ":":
            raise ParseError("expected `allow <state> : ...`", sp(0))
        s = toks[1][0]
        if s not in game.index:
            raise ParseError(f"unknown state {s!r}", sp(1))
        if not game.is_controller(s):
            raise ParseError(f"{s!r} is not a controller state", sp(1))
        if s in choice:
            raise ParseError(f"state {s!r} listed twice", sp(1))
        enabled = set(game.actions(s))
        body = toks[3:]
        entries = []
        if "{" not in [t for t, _ in body]:
            acts = [t for t, _ in body]
            for i, (a, c) in enumerate(body):
                if a not in enabled:
                    raise ParseError(f"action {a!r} not enabled at {s}", SourceSpan(ln, c))
            entries.append((acts, Fraction(1)))
        else:
            if header == "det":
                raise ParseError("weighted sets in a deterministic multi-strategy", sp(3))
            i = 0
            while i < len(body):
                wtok, wc = body[i]
                w = parse_rational(wtok, SourceSpan(ln, wc))
                if w == 0:
                    raise ParseError("zero weight", SourceSpan(ln, wc))
                if i + 1 >= len(body) or body[i + 1][0] != "{":
                    raise ParseError("expected `{` after weight", SourceSpan(ln, wc))
                j = i + 2
                acts = []
                while j < len(body) and body[j][0] != "}":
                    a, c = body[j]
                    if a not in enabled:
                        raise ParseError(f"action {a!r} not enabled at {s}", SourceSpan(ln, c))
                    acts.append(a)
                    j += 1
                if j >= len(body):
                    raise ParseError("missing `}`", SourceSpan(ln, body[-1][1]))
                if not acts:
                    raise ParseError("empty action set", SourceSpan(ln, body[i + 1][1]))
                entries.append((acts, w))
                i = j + 1
            total = sum((w for _, w in entries), Fraction(0))
            if total != 1:
                raise ParseError(f"weights sum to {format_rational(total)}", sp(1))
        choice[s] = entries
    if header is None:
        raise ParseError("empty multi-strategy file", SourceSpan(1, 1))
    theta = MultiStrategy.from_distributions(choice)
    try:
        check_multistrategy(game, theta)
    except ModelError as e:
        raise ParseError(str(e), last) from None
    return theta


def write_strategy(strategy, game: StochasticGame) -> str:
    """Deterministic strategy as a one-set-per-state multi-strategy file."""
    return write_multistrategy(MultiStrategy.from_sets({s: [strategy.action(s)] for s in strategy.choice}))
