"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Each criterion returns a JSON report of the numbers it checked, and the
determinism criterion reruns all of them under other thread counts and
compares the serialized reports byte for byte.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE
from metricbundles._parallel import set_threads
from metricbundles.certificates import verify
from metricbundles.errors import DefectTooLarge
from metricbundles.extension import check_restriction, lambda_star, lift_projection
from metricbundles.fields import MatrixField, key_lemma_slack, lipschitz_constant
from metricbundles.hermitian import defects, op_norm, rank1
from metricbundles.homotopy import extension_uniqueness, join_projections
from metricbundles.io import dumps
from metricbundles.zoo import (
    chern_number_torus,
    circle_space,
    constant_projection,
    induced_lipschitz_exact,
    mobius_projection,
    monopole_irrep,
    monopole_rank2,
    sphere_space,
    torus_line_projection,
)

EVEN_256 = range(0, 256, 2)


def unit(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def c1():
    vals = [lambda_star(n) for n in (1, 2, 3)]
    exact = [Fraction(1), Fraction(5, 3), Fraction(19, 8)]
    assert all(abs(v - float(e)) <= 1e-15 for v, e in zip(vals, exact))
    return {"lambda_star": vals}


def c2():
    Ls = {m: lipschitz_constant(mobius_projection(m)).L for m in (4, 12, 360)}
    for m, L in Ls.items():
        assert abs(L - m * math.sin(math.pi / m)) <= 1e-9
    seq = [Ls[4], Ls[12], Ls[360]]
    assert seq[0] < seq[1] < seq[2] < math.pi
    assert abs(Ls[360] - math.pi) <= 1e-3
    return {"L": {str(m): L for m, L in Ls.items()}}


def c3():
    rng = np.random.default_rng(3)
    worst = {}
    for n in (2, 5):
        e1 = e2 = 0.0
        for _ in range(1000):
            v, w = unit(rng, n), unit(rng, n)
            # distance between rank-one projections
            lhs = op_norm(rank1(v) - rank1(w))
            e1 = max(e1, abs(lhs - math.sqrt(max(0.0, 1 - abs(np.vdot(v, w)) ** 2))))
            # tangent identity: for Re<v, x> = 0, ||v x* + x v*|| = ||x - v <v, x>||
            x = rng.normal(size=n) + 1j * rng.normal(size=n)
            x = x - v * np.vdot(v, x).real
            t = np.outer(v, x.conj()) + np.outer(x, v.conj())
            e2 = max(e2, abs(op_norm(t) - np.linalg.norm(x - v * np.vdot(v, x))))
        assert e1 < 1e-10 and e2 < 1e-10
        worst[str(n)] = [e1, e2]
    return {"max_errors": worst}


def c4():
    S = circle_space(32)
    q0, q1 = mobius_projection(space=S), mobius_projection(space=S, phase=math.pi / 32)
    path = join_projections(q0, q1, steps=50)
    assert abs(path.delta - math.sin(math.pi / 32)) < 1e-12
    worst = max(float(defects(np.asarray(f.values)).max()) for f in path.fields)
    assert worst < 1e-10
    bound = max(lipschitz_constant(q0).L, lipschitz_constant(q1).L) / (1 - path.delta)
    assert path.L_max <= bound + 1e-6
    return {"delta": path.delta, "L_max": path.L_max, "bound": bound, "max_defect": worst}


def c5():
    p = mobius_projection(128)
    res = lift_projection(p, circle_space(256), EVEN_256)
    c = res.certificate
    assert c.eps == 1 / 256
    assert check_restriction(res.q, p, EVEN_256)
    assert c.delta_actual < 0.25
    assert c.L_q <= c.L_b / (1 - 4 * c.delta_actual) + 1e-9
    with pytest.raises(DefectTooLarge):
        lift_projection(mobius_projection(4), circle_space(64), range(0, 64, 16))
    return c.to_json()


def c6():
    rng = np.random.default_rng(6)
    S = circle_space(32)
    worst = math.inf
    for _ in range(500):
        a = rng.normal(size=(32, 2, 2)) + 1j * rng.normal(size=(32, 2, 2))
        f = MatrixField(S, 0.5 * (a + np.conj(np.swapaxes(a, 1, 2))))
        worst = min(worst, key_lemma_slack(S, f, range(0, 32, 2)))
    assert worst >= -1e-10
    return {"min_slack": worst}


def c7():
    vals = {str(n): induced_lipschitz_exact(n) for n in range(1, 7)}
    for n, v in vals.items():
        assert abs(v - math.sqrt(int(n))) < 1e-3
    return {"induced_L": vals}


def c8():
    S = sphere_space(2000)
    out = {}
    for n in (1, 2, 3):
        L = lipschitz_constant(monopole_irrep(n, S)).L
        assert 0.9 * math.sqrt(n) <= L <= math.sqrt(n) + 1e-9
        out[f"irrep_{n}"] = L
    for n in (1, 2):
        L = lipschitz_constant(monopole_rank2(n, S)).L
        assert 0.9 * n <= L <= n * math.sqrt(2) + 1e-9
        out[f"rank2_{n}"] = L
    return out


def c9():
    out = {}
    for k in (1, 2):
        L = lipschitz_constant(torus_line_projection(k, 128, 128)).L
        assert 0.9 * math.pi * k <= L <= 2 * math.pi * k + 1e-9
        out[str(k)] = L
    return {"L": out}


def c10():
    out = {}
    for k in (-2, -1, 0, 1, 2):
        p = torus_line_projection(k, 128, 128, sigma=0.05)
        res = chern_number_torus(p)
        L = lipschitz_constant(p).L
        assert abs(res.c_normalized - k) < 0.02
        assert L >= math.sqrt(math.pi * abs(k)) - 0.05
        out[str(k)] = {"c": res.c_normalized, "L": L}
    return out


def c11():
    X, Z = circle_space(64), circle_space(128)
    sub = range(0, 128, 2)
    qm = lift_projection(mobius_projection(space=X), Z, sub).q
    qt = lift_projection(constant_projection(X, np.diag([1, 0])), Z, sub).q
    qr = lift_projection(mobius_projection(space=X, phase=math.pi / 64), Z, sub).q
    no, _ = extension_uniqueness(qm, qt, sub)
    assert no.delta >= 1 and no.decision == "no-certificate"
    yes, path = extension_uniqueness(qm, qr, sub)
    assert yes.certified and path is not None
    assert verify(yes.to_json())
    assert verify(path.to_json())
    return {"trivial": no.to_json(), "rotated": yes.to_json(), "path": path.to_json()}


# criterion -> (check, runtime limit in seconds)
CRITERIA = {
    1: (c1, 1.0), 2: (c2, 1.0), 3: (c3, 1.0), 4: (c4, 5.0), 5: (c5, 10.0), 6: (c6, 10.0),
    7: (c7, 5.0), 8: (c8, 120.0), 9: (c9, 120.0), 10: (c10, 60.0), 11: (c11, 30.0),
}
REPORTS: dict[int, str] = {}


def record(k, ok, seconds, note=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k} ({seconds:.2f} s){' ' + note if note else ''}"
    ACCEPTANCE[k] = line
    print(line)


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    check, limit = CRITERIA[k]
    t0 = time.perf_counter()
    try:
        report = check()
    except BaseException:
        record(k, False, time.perf_counter() - t0)
        raise
    dt = time.perf_counter() - t0
    within = dt < limit
    record(k, within, dt, "" if within else f"over the {limit:g} s budget")
    REPORTS[k] = dumps(report)
    assert within


def test_criterion_12_determinism():
    t0 = time.perf_counter()
    mismatched = []
    try:
        for threads in (1, 4):
            set_threads(threads)
            for k, (check, _) in sorted(CRITERIA.items()):
                first = REPORTS.get(k) or dumps(check())
                REPORTS.setdefault(k, first)
                if dumps(check()) != first:
                    mismatched.append((k, threads))
    finally:
        set_threads(None)
    ok = not mismatched
    record(12, ok, time.perf_counter() - t0, "" if ok else f"differs: {mismatched}")
    assert ok
