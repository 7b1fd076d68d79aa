import numpy as np
import pytest

from coop_transport import stl_core as stl
from coop_transport.stl_core import (
    Formula,
    HorizonError,
    ParseError,
    Predicate,
    SampledSignal,
    always,
    and_,
    avoid,
    ball,
    eval_boolean,
    eval_robustness,
    eventually,
    format_formula,
    horizon,
    not_,
    outside,
    parse_formula,
    until,
)

from stl_oracle import oracle_boolean, oracle_robustness


def const_signal(value, t_end=10.0, n=11):
    t = np.linspace(0.0, t_end, n)
    return SampledSignal(t, np.tile(np.asarray(value, dtype=float), (n, 1)))


# ---------------------------------------------------------------------------
# parsing and printing


def test_parse_always_ball():
    f = parse_formula("G[0,1](ball(0,0,0; 1))")
    assert f.kind == "always"
    assert f.interval == (0.0, 1.0)
    child = f.children[0]
    assert child.kind == "pred"
    assert child.pred.func_id == "ball"
    assert child.pred.params == (0.0, 0.0, 0.0, 1.0)


def test_parse_eventually_ball():
    f = parse_formula("F[2,3](ball(1,0,0; 0.5))")
    assert f == eventually(2.0, 3.0, ball([1, 0, 0], 0.5))


def test_parse_separation_conjunct():
    # the obstacle-separation shape: G over an avoid predicate with 0.5 m margin
    f = parse_formula("G[0,250](avoid(obs; 0.5))")
    assert f.kind == "always"
    assert f.interval == (0.0, 250.0)
    p = f.children[0].pred
    assert p.func_id == "avoid"
    assert p.set_name == "obs"
    assert p.params == (0.5,)


def test_parse_until_infix():
    f = parse_formula("(ball(0,0,0; 2)) U[0,1] (ball(3,0,0; 0.1))")
    assert f.kind == "until"
    assert f.interval == (0.0, 1.0)


def test_parse_conjunction_left_assoc():
    f = parse_formula("true & true & ball(0,0,0; 1)")
    assert f.kind == "and"
    assert f.children[0].kind == "and"


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_formula("G[1,0](true)")  # inverted interval
    with pytest.raises(ParseError):
        parse_formula("G[-1,2](true)")  # negative bound
    with pytest.raises(ParseError):
        parse_formula("ball(0,0,0 1)")
    with pytest.raises(ParseError):
        parse_formula("G[0,1](true) extra")
    err = None
    try:
        parse_formula("G[0,1](blah(1))")
    except ParseError as e:
        err = e
    assert err is not None and err.position >= 0


def _random_formula(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        kind = rng.integers(0, 3)
        c = rng.uniform(-2, 2, 3)
        r = rng.uniform(0.2, 2.0)
        if kind == 0:
            return ball(c, r)
        if kind == 1:
            return outside(c, r)
        return stl.TRUE
    a = round(rng.uniform(0, 1.5), 2)
    b = round(a + rng.uniform(0.1, 1.5), 2)
    k = rng.integers(0, 5)
    if k == 0:
        return not_(_random_formula(rng, depth - 1))
    if k == 1:
        return and_(_random_formula(rng, depth - 1), _random_formula(rng, depth - 1))
    if k == 2:
        return always(a, b, _random_formula(rng, depth - 1))
    if k == 3:
        return eventually(a, b, _random_formula(rng, depth - 1))
    return until(a, b, _random_formula(rng, depth - 1), _random_formula(rng, depth - 1))


def test_print_parse_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(100):
        f = _random_formula(rng, 3)
        assert parse_formula(format_formula(f)) == f


# ---------------------------------------------------------------------------
# boolean evaluation


def test_always_ball_constant_signal():
    sig = const_signal([1.0, 0.0, 0.0])
    f = always(0.0, 1.0, ball([0, 0, 0], 2.0))
    assert eval_boolean(f, sig, 0.0) is True


def test_eventually_never_holds():
    sig = const_signal([1.0, 1.0, 1.0])
    f = eventually(2.0, 3.0, ball([0, 0, 0], 0.1))
    assert eval_boolean(f, sig, 0.0) is False


def test_until_ramp_signal():
    # x(t) = (3t, 0, 0) on [0, 2]; left operand |x| <= 2 fails from t = 2/3
    # while the target ball is reached only near t = 1, so Until is false.
    # Expected value computed with the 1 ms brute-force oracle.
    t = np.array([0.0, 2.0])
    v = np.array([[0.0, 0.0, 0.0], [6.0, 0.0, 0.0]])
    sig = SampledSignal(t, v)
    f = until(0.0, 1.0, ball([0, 0, 0], 2.0), ball([3, 0, 0], 0.1))
    expected = oracle_boolean(f, sig, 0.0)
    assert expected is False
    assert eval_boolean(f, sig, 0.0) is expected


def test_until_holds_when_left_operand_survives():
    # same shape but the left ball is wide enough to cover the whole approach
    t = np.array([0.0, 2.0])
    v = np.array([[0.0, 0.0, 0.0], [6.0, 0.0, 0.0]])
    sig = SampledSignal(t, v)
    f = until(0.0, 1.0, ball([0, 0, 0], 3.5), ball([3, 0, 0], 0.1))
    assert oracle_boolean(f, sig, 0.0) is True
    assert eval_boolean(f, sig, 0.0) is True


def test_horizon_error():
    sig = const_signal([0.0, 0.0, 0.0], t_end=1.0)
    f = eventually(0.5, 2.0, ball([0, 0, 0], 1.0))
    with pytest.raises(HorizonError):
        eval_boolean(f, sig, 0.0)
    with pytest.raises(HorizonError):
        eval_robustness(f, sig, 0.0)


def test_avoid_predicate_uses_environment():
    sig = const_signal([0.0, 0.0, 0.0])
    f = always(0.0, 1.0, avoid("obs", 0.5))
    env = {"obs": lambda x: 2.0}
    assert eval_boolean(f, sig, 0.0, env=env) is True
    assert eval_robustness(f, sig, 0.0, env=env) == pytest.approx(1.5)
    with pytest.raises(stl.StlError):
        eval_boolean(f, sig, 0.0)


# ---------------------------------------------------------------------------
# robustness


def test_robustness_ball_point():
    sig = const_signal([1.0, 0.0, 0.0])
    f = ball([0, 0, 0], 2.0)
    assert eval_robustness(f, sig, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_robustness_always_constant():
    sig = const_signal([1.0, 0.0, 0.0])
    f = always(0.0, 1.0, ball([0, 0, 0], 2.0))
    assert eval_robustness(f, sig, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_negation_and_idempotence_exact():
    rng = np.random.default_rng(3)
    for _ in range(50):
        f = _random_formula(rng, 2)
        t = np.sort(rng.uniform(0, 8, 40))
        t[0], t[-1] = 0.0, 8.0
        sig = SampledSignal(t, rng.uniform(-2, 2, (40, 3)))
        r = eval_robustness(f, sig, 0.0)
        assert eval_robustness(not_(f), sig, 0.0) == -r
        assert eval_robustness(and_(f, f), sig, 0.0) == r


def test_translation_of_ball_predicate():
    rng = np.random.default_rng(11)
    center = np.array([0.5, -0.3, 1.0])
    f = ball(center, 1.2)
    t = np.linspace(0, 5, 30)
    vals = rng.uniform(-2, 2, (30, 3))
    shift = np.array([0.3, 0.4, -0.2])
    sig = SampledSignal(t, vals)
    sig_shifted = SampledSignal(t, vals + shift)
    for tq in [0.0, 1.3, 4.9]:
        x = sig.at(tq)
        expected_delta = np.linalg.norm(x - center) - np.linalg.norm(x + shift - center)
        got = eval_robustness(f, sig_shifted, tq) - eval_robustness(f, sig, tq)
        assert got == pytest.approx(expected_delta, abs=1e-12)


def _task_formula(eps=0.35):
    goals = [
        (3.0, 3.4, [0.0, 2.0, 0.6]),
        (6.0, 6.4, [2.0, 2.0, 0.6]),
    ]
    parts = [always(a, b, ball(c, eps)) for a, b, c in goals]
    parts.append(eventually(8.0, 9.0, ball([2.0, 0.0, 0.6], eps)))
    parts.append(always(0.0, 9.5, avoid("obs", 0.5)))
    return and_(*parts)


def test_task_formula_on_satisfying_trajectory():
    # piecewise-linear trajectory that parks inside each goal ball during
    # its window; obstacle field kept far away
    knots_t = [0.0, 3.0, 3.4, 6.0, 6.4, 8.5, 8.8, 9.5]
    knots_x = [
        [0.0, 0.0, 0.6],
        [0.0, 2.0, 0.6],
        [0.0, 2.0, 0.6],
        [2.0, 2.0, 0.6],
        [2.0, 2.0, 0.6],
        [2.0, 0.0, 0.6],
        [2.0, 0.0, 0.6],
        [2.0, 0.0, 0.6],
    ]
    sig = SampledSignal(np.array(knots_t), np.array(knots_x))
    env = {"obs": lambda x: 3.0 + 0.1 * float(x[0])}
    f = _task_formula()
    rho = eval_robustness(f, sig, 0.0, env=env)
    assert rho > 0.0
    rho_oracle = oracle_robustness(f, sig, 0.0, env=env, step=1e-3)
    assert rho == pytest.approx(rho_oracle, abs=1e-6)
    assert eval_boolean(f, sig, 0.0, env=env) is True


# ---------------------------------------------------------------------------
# monitor vs oracle on random instances (small copy of the acceptance sweep)


def random_signal(rng, span=5.0, spacing=0.25):
    n = int(span / spacing) + 1
    t = np.arange(n) * spacing
    steps = rng.uniform(-0.5, 0.5, (n, 3))
    v = np.cumsum(steps, axis=0)
    return SampledSignal(t, v)


def random_formula_bounded(rng, span):
    for _ in range(50):
        f = _random_formula(rng, 3)
        if 1e-9 < horizon(f) <= span * 0.9:
            return f
    return always(0.0, span / 2, ball([0, 0, 0], 1.0))


def test_boolean_matches_oracle_on_random_instances():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(40):
        sig = random_signal(rng)
        f = random_formula_bounded(rng, sig.t_end)
        rho = eval_robustness(f, sig, 0.0)
        if abs(rho) <= 1e-6:
            continue
        assert eval_boolean(f, sig, 0.0) == oracle_boolean(f, sig, 0.0, step=5e-3), (
            f"disagreement on {format_formula(f)} with rho={rho}"
        )
        assert (rho > 0) == eval_boolean(f, sig, 0.0)
        checked += 1
    assert checked >= 25


def test_horizon_values():
    f = until(1.0, 2.0, ball([0, 0, 0], 1.0), eventually(0.5, 1.5, stl.TRUE))
    assert horizon(f) == pytest.approx(3.5)
