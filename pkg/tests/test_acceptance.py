"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import random
import time
from fractions import Fraction

import pytest

from pricedta import encode as en
from pricedta import gens
from pricedta import lipschitz as lp
from pricedta import model as m
from pricedta import oracle
from pricedta import pwl2lpta as tr
from pricedta import semantics as sem
from pricedta import solve
from pricedta.errors import DecodeIntegrityError

from acceptance_log import report
from helpers import needs_solver, random_pwl_automaton, random_walk

GAMMA = Fraction(1, 1000)
INTEGRITY_ERRORS = []


def guarded(fn, *args, **kw):
    """Call into the solver layer, remembering any witness that failed to replay."""
    try:
        return fn(*args, **kw)
    except DecodeIntegrityError as e:
        INTEGRITY_ERRORS.append(str(e))
        raise


def test_lift_and_project_keep_cost_exactly():
    t0 = time.monotonic()
    bad = []
    runs = 0
    for seed in range(200):
        rng = random.Random(seed)
        a_net = random_pwl_automaton(rng, max_locations=4, max_clocks=2, max_pieces=3, max_const=5)
        b_net, tmap = tr.transform(a_net)
        for k in range(50):
            run = random_walk(a_net, rng)
            cost = sem.replay(a_net, run)[1]
            lifted = tr.lift_run(a_net, b_net, tmap, run)
            lifted_cost = sem.replay(b_net, lifted)[1]
            back_cost = sem.replay(a_net, tr.project_run(a_net, b_net, tmap, lifted))[1]
            runs += 1
            if not cost == lifted_cost == back_cost:
                bad.append((seed, k, cost, lifted_cost, back_cost))
    elapsed = time.monotonic() - t0
    ok = not bad and elapsed < 60
    report(1, ok, f"{runs} runs over 200 automata, {len(bad)} cost mismatches, {elapsed:.1f}s")
    assert not bad, bad[:5]
    assert elapsed < 60


def random_polynomial(rng, T):
    """A non-negative polynomial on [0, T] with a Lipschitz constant read off its coefficients."""
    degree = rng.randint(1, 4)
    coeffs = [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(degree)]
    # |p'(t)| <= sum |i c_i| T^(i-1) on [0, T]
    K = sum(abs(i * c) * T ** (i - 1) for i, c in enumerate(coeffs, 1)) or Fraction(1)
    c0 = sum(abs(c) * T**i for i, c in enumerate(coeffs, 1))
    expr = ("add", c0) + tuple(("mul", c, ("pow", "t", i)) for i, c in enumerate(coeffs, 1))
    return expr, K


def test_sandwich_brackets_random_polynomials():
    t0 = time.monotonic()
    rng = random.Random(2024)
    tol = Fraction(1, 10**9)
    worst = []
    for _ in range(20):
        T = Fraction(rng.randint(1, 5))
        expr, K = random_polynomial(rng, T)
        price = m.Lipschitz(expr, K, T)
        # a sampling period giving between 10 and 300 grid intervals
        delta = T / rng.randint(10, 300) * Fraction(rng.randint(7, 10), 10)
        D = rng.randint(1, 4)
        cfg = lp.ApproxConfig(K * delta * D, K, T, D, delta)
        assert cfg.delta == lp.choose_delta(cfg.epsilon, K, D)
        lower, upper = lp.sandwich(price, cfg)
        f = lambda t: m.price_eval(price, {}, t)
        for j in range(1000):
            t = T * j / 999
            fl, fv, fu = lower(t), f(t), upper(t)
            if not (fl <= fv <= fu and fu - fl <= K * cfg.delta + tol):
                worst.append(("bracket", t, fl, fv, fu))
        for p in lower.points:
            if p > T:
                worst.append(("sampled past T", p))
            elif abs(lower(p) - f(p)) > tol or abs(upper(p) - f(p)) > tol:
                worst.append(("grid", p))
    elapsed = time.monotonic() - t0
    ok = not worst and elapsed < 10
    report(2, ok, f"20 polynomials x 1000 samples, {len(worst)} violations, {elapsed:.1f}s")
    assert not worst, worst[:5]
    assert elapsed < 10


@pytest.fixture(scope="session")
def solver_vs_oracle():
    t0 = time.monotonic()
    rows = []
    for seed in range(100):
        net, q = oracle.random_instance(seed)
        truth = oracle.opt_cost_exhaustive(net, q.source, q.target, q.steps)
        r = guarded(solve.minimize, net, q.source, q.target, q.steps, gamma=GAMMA)
        at = below = None
        if truth.reachable:
            at = guarded(solve.decide, net, m.Query(q.source, q.target, q.steps, truth.cost)).holds
            below = guarded(solve.decide, net, m.Query(q.source, q.target, q.steps, truth.cost - GAMMA)).holds
        rows.append((seed, truth.cost, r, at, below))
    return rows, time.monotonic() - t0


def _agrees(truth, r, at, below):
    if truth is None:
        return r.infeasible
    return (
        r.upper is not None
        and r.lower is not None
        and abs(r.upper - truth) <= GAMMA
        and r.lower <= truth
        and at is True
        and below is False
    )


@needs_solver
def test_optimize_matches_exhaustive_search(solver_vs_oracle):
    rows, elapsed = solver_vs_oracle
    bad = [(s, t, r.status, r.lower, r.upper, at, below) for s, t, r, at, below in rows if not _agrees(t, r, at, below)]
    reachable = sum(1 for row in rows if row[1] is not None)
    ok = not bad and elapsed < 300
    report(3, ok, f"100 instances ({reachable} reachable), {len(bad)} disagreements, {elapsed:.1f}s")
    assert not bad, bad[:5]
    assert elapsed < 300


def test_two_counter_gadget_costs_zero_only_when_exact():
    t0 = time.monotonic()
    prog = gens.parse_program("inc c 1\ninc c 2\ndec c 3\nhalt\n")
    net = gens.gen_two_counter(prog).network
    run = gens.gadget_run(net, prog)
    final, cost = sem.replay(net, run)
    pc, pd, _, _ = gens.final_parity(prog)
    c_value = gens.counter_values(net, final, pc, pd)[0]
    # each module delays twice; its first delay is the dwell that encodes the update
    correct = [s.t for s in run.steps if isinstance(s, sem.Delay)][::2]
    perturbed = []
    for i in range(len(correct)):
        for sign in (1, -1):
            dwells = list(correct)
            dwells[i] += sign * Fraction(1, 8)
            perturbed.append(sem.replay(net, gens.gadget_run(net, prog, dwells))[1])
    elapsed = time.monotonic() - t0
    ok = cost == 0 and final.locs == (gens.HALT,) and c_value == Fraction(1, 2) and all(p > 0 for p in perturbed) and elapsed < 1
    report(4, ok, f"correct run cost {cost}, c encoding {c_value}, perturbed costs {[str(p) for p in perturbed]}, {elapsed:.2f}s")
    assert cost == 0 and final.locs == (gens.HALT,)
    assert c_value == Fraction(1, 2)
    assert all(p > 0 for p in perturbed)
    assert elapsed < 1


@needs_solver
def test_two_counter_gadget_nonlinear_check():
    # best effort: an unknown or timed-out answer is recorded, not failed
    prog = gens.parse_program("inc c 1\ninc c 2\ndec c 3\nhalt\n")
    doc = gens.gen_two_counter(prog)
    q = doc.queries[0]
    q = m.Query(q.source, q.target, q.steps, Fraction(1, 10**6), "<=")
    d = guarded(solve.decide, doc.network, q, solve.SolverConfig(timeout=300))
    assert d.status in (solve.Status.SAT, solve.Status.UNKNOWN, solve.Status.TIMEOUT)
    if d.status is solve.Status.SAT:
        assert d.cost <= Fraction(1, 10**6) + solve.SolverConfig().nonlinear_tolerance
    report("4 (solver, best effort)", True, f"QF_NRA budget 1e-6 -> {d.status.value} in {d.elapsed:.1f}s")


ALP_CASES = {
    "2 planes / 1 runway": (
        [gens.PlaneSpec(0, 5, 12, 2, 3), gens.PlaneSpec(0, 6, 14, 2, 3)],
        1,
        [[3]],
    ),
    "3 planes / 2 runways": (
        [gens.PlaneSpec(0, 4, 12, 2, 3, 0), gens.PlaneSpec(1, 5, 12, 1, 2, 1), gens.PlaneSpec(2, 6, 15, 3, 1, 0)],
        2,
        [[3, 2], [4, 3]],
    ),
}


@pytest.fixture(scope="session")
def alp_runs():
    out = {}
    for name, (planes, runways, sep) in ALP_CASES.items():
        doc = gens.gen_alp(planes, runways, sep)
        d = guarded(solve.decide, doc.network, doc.queries[0], solve.SolverConfig(timeout=60))
        problems = None
        if d.holds:
            sched = gens.landing_schedule(doc.network, d.witness)
            problems = gens.schedule_problems(planes, sep, sched)
            if len(sched) != len(planes):
                problems.append(f"{len(sched)} landings for {len(planes)} planes")
        out[name] = (doc.queries[0].budget, d, problems)
    single = gens.gen_alp([gens.PlaneSpec(0, 5, 10, 1, 2)], 1, [[3]])
    q = single.queries[0]
    out["single"] = guarded(solve.minimize, single.network, q.source, q.target, q.steps, gamma=GAMMA)
    return out


@needs_solver
def test_alp_instances_solve_at_desk_scale(alp_runs):
    details, ok = [], True
    for name in ALP_CASES:
        budget, d, problems = alp_runs[name]
        good = budget == 800 and d.holds is True and d.elapsed < 60 and problems == []
        ok &= good
        details.append(f"{name}: {d.status.value} in {d.elapsed:.1f}s, {'valid' if problems == [] else problems}")
    single = alp_runs["single"]
    # one plane can always land exactly on its target time
    ok &= single.status is solve.OptStatus.OPTIMAL and single.upper == 0
    details.append(f"1 plane optimum {single.upper}")
    report(5, ok, "; ".join(details))
    assert ok


@needs_solver
def test_encoding_is_deterministic_and_witnesses_replay(solver_vs_oracle, alp_runs):
    scripts = []
    for seed in range(100):
        net, q = oracle.random_instance(seed)
        scripts.append((en.encode(net, q), en.encode(net, q)))
    for name, (planes, runways, sep) in ALP_CASES.items():
        doc = gens.gen_alp(planes, runways, sep)
        scripts.append((en.encode(doc.network, doc.queries[0]), en.encode(gens.gen_alp(planes, runways, sep).network, doc.queries[0])))
    differing = sum(1 for a, b in scripts if a.encode() != b.encode())
    ok = differing == 0 and not INTEGRITY_ERRORS
    report(6, ok, f"{len(scripts)} script pairs, {differing} differ; {len(INTEGRITY_ERRORS)} decode-integrity errors")
    assert differing == 0
    assert not INTEGRITY_ERRORS, INTEGRITY_ERRORS[:3]
