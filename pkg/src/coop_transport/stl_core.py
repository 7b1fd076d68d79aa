"""Signal temporal logic over sampled 3-D signals.

Formulas are immutable trees built from norm-ball predicates and the
timed operators Until, Always, and Eventually (the latter two stored as
derived nodes whose meaning equals their Until encodings). Signals are
strictly increasing time stamps with piecewise-linear interpolation in
between. Boolean satisfaction follows the closed-interval timed
semantics; robustness is the standard min/max recursion whose sign
matches the Boolean verdict away from ties.

Inter-sample extrema are approximated by evaluating at interval
endpoints plus all enclosed sample points; the sampling step of the
signal is the accuracy knob. The text grammar is documented in
docs/stl-grammar.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class StlError(Exception):
    pass


class ParseError(StlError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class HorizonError(StlError):
    pass


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class Predicate:
    """Atomic predicate p(x, t) >= 0 over the 3-D signal value.

    func_id "ball":    p = r - |x - c|   (inside a ball)
    func_id "outside": p = |x - c| - r   (outside a ball)
    func_id "avoid":   p = dist(x) - margin, where dist is looked up in
                       the evaluation environment under set_name.
    """

    func_id: str
    params: tuple
    set_name: str | None = None

    def __post_init__(self):
        if self.func_id not in ("ball", "outside", "avoid"):
            raise ValueError(f"unknown predicate function '{self.func_id}'")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.func_id in ("ball", "outside"):
            if len(self.params) != 4:
                raise ValueError(f"{self.func_id} needs center and radius")
            if self.params[3] <= 0.0:
                raise ValueError("predicate radius must be > 0")
        else:
            if len(self.params) != 1 or self.set_name is None:
                raise ValueError("avoid needs a set name and a margin")

    def value(self, x, env=None) -> float:
        x = np.asarray(x, dtype=float)
        if self.func_id == "ball":
            c = np.array(self.params[:3])
            return self.params[3] - float(np.linalg.norm(x - c))
        if self.func_id == "outside":
            c = np.array(self.params[:3])
            return float(np.linalg.norm(x - c)) - self.params[3]
        if env is None or self.set_name not in env:
            raise StlError(
                f"predicate references unknown distance field '{self.set_name}'"
            )
        return float(env[self.set_name](x)) - self.params[0]

    def values(self, xs: np.ndarray, env=None) -> np.ndarray:
        """Vectorized value over an (m, 3) array of signal samples."""
        xs = np.asarray(xs, dtype=float).reshape(-1, 3)
        if self.func_id == "ball":
            c = np.array(self.params[:3])
            return self.params[3] - np.linalg.norm(xs - c, axis=1)
        if self.func_id == "outside":
            c = np.array(self.params[:3])
            return np.linalg.norm(xs - c, axis=1) - self.params[3]
        if env is None or self.set_name not in env:
            raise StlError(
                f"predicate references unknown distance field '{self.set_name}'"
            )
        f = env[self.set_name]
        return np.array([float(f(x)) for x in xs]) - self.params[0]


@dataclass(frozen=True)
class Formula:
    kind: str  # "true" | "pred" | "not" | "and" | "until" | "always" | "eventually"
    children: tuple = ()
    interval: tuple | None = None
    pred: Predicate | None = None

    def __post_init__(self):
        if self.kind not in (
            "true", "pred", "not", "and", "until", "always", "eventually",
        ):
            raise ValueError(f"unknown formula kind '{self.kind}'")
        if self.interval is not None:
            a, b = (float(self.interval[0]), float(self.interval[1]))
            if a < 0.0 or b < a or not np.isfinite(b):
                raise ValueError(f"invalid interval [{a}, {b}]")
            object.__setattr__(self, "interval", (a, b))

    def __str__(self) -> str:
        return format_formula(self)


TRUE = Formula("true")


def pred(p: Predicate) -> Formula:
    return Formula("pred", pred=p)


def ball(center, radius: float) -> Formula:
    c = np.asarray(center, dtype=float).reshape(3)
    return pred(Predicate("ball", (*c, radius)))


def outside(center, radius: float) -> Formula:
    c = np.asarray(center, dtype=float).reshape(3)
    return pred(Predicate("outside", (*c, radius)))


def avoid(set_name: str, margin: float) -> Formula:
    return pred(Predicate("avoid", (margin,), set_name=set_name))


def not_(f: Formula) -> Formula:
    return Formula("not", (f,))


def and_(*fs: Formula) -> Formula:
    if not fs:
        raise ValueError("empty conjunction")
    out = fs[0]
    for f in fs[1:]:
        out = Formula("and", (out, f))
    return out


def until(a: float, b: float, f1: Formula, f2: Formula) -> Formula:
    return Formula("until", (f1, f2), interval=(a, b))


def always(a: float, b: float, f: Formula) -> Formula:
    return Formula("always", (f,), interval=(a, b))


def eventually(a: float, b: float, f: Formula) -> Formula:
    return Formula("eventually", (f,), interval=(a, b))


def horizon(f: Formula) -> float:
    """Look-ahead needed to evaluate f: nesting sum of upper bounds."""
    if f.kind in ("true", "pred"):
        return 0.0
    if f.kind in ("not", "and"):
        return max(horizon(c) for c in f.children)
    return f.interval[1] + max(horizon(c) for c in f.children)


def iter_nodes(f: Formula):
    yield f
    for c in f.children:
        yield from iter_nodes(c)


# ---------------------------------------------------------------------------
# signals


@dataclass(frozen=True)
class SampledSignal:
    """Strictly increasing time stamps with R^3 samples, linear in between."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1, 3)
        if len(t) < 2:
            raise ValueError("signal needs at least two samples")
        if len(t) != len(v):
            raise ValueError("times and values length mismatch")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("signal times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("signal contains non-finite entries")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise HorizonError(
                f"time {t} outside signal range [{self.t_start}, {self.t_end}]"
            )
        t = min(max(t, self.t_start), self.t_end)
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def at_many(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        idx = np.clip(
            np.searchsorted(self.times, ts, side="right") - 1, 0, len(self.times) - 2
        )
        t0 = self.times[idx]
        t1 = self.times[idx + 1]
        w = ((ts - t0) / (t1 - t0))[:, None]
        return (1.0 - w) * self.values[idx] + w * self.values[idx + 1]


def _candidates(sig: SampledSignal, lo: float, hi: float, extra=()) -> np.ndarray:
    """Evaluation times for an interval: endpoints plus enclosed samples."""
    i0 = int(np.searchsorted(sig.times, lo, side="right"))
    i1 = int(np.searchsorted(sig.times, hi, side="left"))
    pts = [lo, *sig.times[i0:i1], hi, *extra]
    out = np.unique(np.asarray(pts, dtype=float))
    return out[(out >= lo - 1e-12) & (out <= hi + 1e-12)]


# ---------------------------------------------------------------------------
# evaluation


def _check_horizon(f: Formula, sig: SampledSignal, t: float):
    h = horizon(f)
    if t < sig.t_start - 1e-9 or t + h > sig.t_end + 1e-9:
        raise HorizonError(
            f"evaluation at t={t} needs horizon {h:.6g}, but the signal covers "
            f"[{sig.t_start:.6g}, {sig.t_end:.6g}]"
        )


def eval_boolean(f: Formula, sig: SampledSignal, t: float, env=None) -> bool:
    """Recursive Boolean satisfaction at time t.

    Raises HorizonError when t plus the formula horizon leaves the
    signal range (never silently truncates).
    """
    _check_horizon(f, sig, t)
    return _bool(f, sig, float(t), env, {})


def _bool(f, sig, t, env, cache):
    key = (id(f), t)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if f.kind == "true":
        out = True
    elif f.kind == "pred":
        out = f.pred.value(sig.at(t), env) >= 0.0
    elif f.kind == "not":
        out = not _bool(f.children[0], sig, t, env, cache)
    elif f.kind == "and":
        out = _bool(f.children[0], sig, t, env, cache) and _bool(
            f.children[1], sig, t, env, cache
        )
    elif f.kind == "always":
        a, b = f.interval
        out = all(
            _bool(f.children[0], sig, s, env, cache)
            for s in _candidates(sig, t + a, t + b)
        )
    elif f.kind == "eventually":
        a, b = f.interval
        out = any(
            _bool(f.children[0], sig, s, env, cache)
            for s in _candidates(sig, t + a, t + b)
        )
    else:  # until
        a, b = f.interval
        f1, f2 = f.children
        run1 = True
        out = False
        for s in _candidates(sig, t, t + b, extra=(t + a,)):
            run1 = run1 and _bool(f1, sig, s, env, cache)
            if s >= t + a - 1e-12 and run1 and _bool(f2, sig, s, env, cache):
                out = True
                break
            if not run1:
                break
    cache[key] = out
    return out


def eval_robustness(f: Formula, sig: SampledSignal, t: float, env=None) -> float:
    """Quantitative robustness at time t (positive iff satisfied, modulo ties)."""
    _check_horizon(f, sig, t)
    return _rob(f, sig, float(t), env, {})


def _rob(f, sig, t, env, cache):
    key = (id(f), t)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if f.kind == "true":
        out = np.inf
    elif f.kind == "pred":
        out = f.pred.value(sig.at(t), env)
    elif f.kind == "not":
        out = -_rob(f.children[0], sig, t, env, cache)
    elif f.kind == "and":
        out = min(
            _rob(f.children[0], sig, t, env, cache),
            _rob(f.children[1], sig, t, env, cache),
        )
    elif f.kind == "always":
        a, b = f.interval
        out = _window_extreme(f.children[0], sig, t + a, t + b, env, cache, np.min)
    elif f.kind == "eventually":
        a, b = f.interval
        out = _window_extreme(f.children[0], sig, t + a, t + b, env, cache, np.max)
    else:  # until: sup over t1 of min(rob2(t1), inf of rob1 over [t, t1])
        a, b = f.interval
        f1, f2 = f.children
        run1 = np.inf
        out = -np.inf
        for s in _candidates(sig, t, t + b, extra=(t + a,)):
            run1 = min(run1, _rob(f1, sig, s, env, cache))
            if s >= t + a - 1e-12:
                out = max(out, min(_rob(f2, sig, s, env, cache), run1))
    cache[key] = float(out)
    return cache[key]


def _window_extreme(child, sig, lo, hi, env, cache, reducer):
    cand = _candidates(sig, lo, hi)
    if child.kind == "pred":  # fast path: vectorized predicate over the window
        return float(reducer(child.pred.values(sig.at_many(cand), env)))
    return float(reducer([_rob(child, sig, s, env, cache) for s in cand]))


# ---------------------------------------------------------------------------
# text grammar (see docs/stl-grammar.md)

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<sym>[()\[\],;&!]))"
)


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip():
                    raise ParseError(f"unexpected character {text[pos]!r}", pos)
                break
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, tok, pos = self.next()
        if tok != value:
            raise ParseError(f"expected {value!r}, found {tok!r}", pos)

    def accept(self, value: str) -> bool:
        if self.peek()[1] == value:
            self.i += 1
            return True
        return False


def parse_formula(text: str) -> Formula:
    """Parse the documented grammar into a Formula tree."""
    toks = _Tokens(text)
    f = _parse_and(toks)
    kind, tok, pos = toks.peek()
    if kind is not None:
        raise ParseError(f"trailing input {tok!r}", pos)
    return f


def _parse_and(toks) -> Formula:
    out = _parse_until(toks)
    while True:
        if toks.accept("&") or (toks.peek()[1] == "and" and bool(toks.next())):
            out = Formula("and", (out, _parse_until(toks)))
        else:
            return out


def _parse_until(toks) -> Formula:
    left = _parse_unary(toks)
    if toks.peek()[1] == "U":
        toks.next()
        a, b = _parse_interval(toks)
        right = _parse_unary(toks)
        return Formula("until", (left, right), interval=(a, b))
    return left


def _parse_unary(toks) -> Formula:
    kind, tok, pos = toks.peek()
    if tok in ("!", "not"):
        toks.next()
        return Formula("not", (_parse_unary(toks),))
    if tok in ("G", "F"):
        toks.next()
        a, b = _parse_interval(toks)
        child = _parse_unary(toks)
        return Formula("always" if tok == "G" else "eventually", (child,), interval=(a, b))
    return _parse_primary(toks)


def _parse_interval(toks):
    toks.expect("[")
    a = _parse_number(toks)
    toks.expect(",")
    b = _parse_number(toks)
    toks.expect("]")
    if a < 0.0 or b < a:
        raise ParseError(f"negative or inverted interval [{a}, {b}]", toks.peek()[2])
    return a, b


def _parse_number(toks) -> float:
    kind, tok, pos = toks.next()
    if kind != "num":
        raise ParseError(f"expected a number, found {tok!r}", pos)
    return float(tok)


def _parse_primary(toks) -> Formula:
    kind, tok, pos = toks.peek()
    if toks.accept("("):
        f = _parse_and(toks)
        toks.expect(")")
        return f
    if kind == "ident":
        toks.next()
        if tok == "true":
            return TRUE
        if tok in ("ball", "outside"):
            toks.expect("(")
            x = _parse_number(toks)
            toks.expect(",")
            y = _parse_number(toks)
            toks.expect(",")
            z = _parse_number(toks)
            toks.expect(";")
            r = _parse_number(toks)
            toks.expect(")")
            return pred(Predicate(tok, (x, y, z, r)))
        if tok == "avoid":
            toks.expect("(")
            nkind, name, npos = toks.next()
            if nkind != "ident":
                raise ParseError(f"expected an obstacle-set name, found {name!r}", npos)
            toks.expect(";")
            m = _parse_number(toks)
            toks.expect(")")
            return pred(Predicate("avoid", (m,), set_name=name))
        raise ParseError(f"unknown identifier {tok!r}", pos)
    raise ParseError(f"expected a formula, found {tok!r}", pos)


def _fmt_num(x: float) -> str:
    return repr(float(x))


def format_formula(f: Formula) -> str:
    """Print a formula so that parse_formula(format_formula(f)) == f."""
    if f.kind == "true":
        return "true"
    if f.kind == "pred":
        p = f.pred
        if p.func_id == "avoid":
            return f"avoid({p.set_name}; {_fmt_num(p.params[0])})"
        x, y, z, r = p.params
        return (
            f"{p.func_id}({_fmt_num(x)},{_fmt_num(y)},{_fmt_num(z)}; {_fmt_num(r)})"
        )
    if f.kind == "not":
        return f"!({format_formula(f.children[0])})"
    if f.kind == "and":
        return f"({format_formula(f.children[0])}) & ({format_formula(f.children[1])})"
    a, b = f.interval
    iv = f"[{_fmt_num(a)},{_fmt_num(b)}]"
    if f.kind == "until":
        return (
            f"({format_formula(f.children[0])}) U{iv} "
            f"({format_formula(f.children[1])})"
        )
    op = "G" if f.kind == "always" else "F"
    return f"{op}{iv}({format_formula(f.children[0])})"
