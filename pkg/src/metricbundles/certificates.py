"""Independent re-checking of certificate JSON.

Every certificate records the quantities it was built from.  ``verify``
recomputes each derived number from its recorded terms and re-tests every
inequality, so an edited file is caught without redoing the geometry.
"""

from __future__ import annotations

import math
from typing import Any, Callable

from .errors import PreconditionError
from .extension import lambda_star, lambda_lift_bound

INEQ_SLACK = 1e-9
PATH_SLACK = 1e-6


class CertificateViolation(PreconditionError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("certificate check failed: " + "; ".join(violations))


def _same(a: float | None, b: float | None) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-15)


class _Checks:
    def __init__(self, prefix: str = ""):
        self.prefix = prefix
        self.passed: list[str] = []
        self.failed: list[str] = []

    def __call__(self, name: str, ok: bool) -> None:
        (self.passed if ok else self.failed).append(self.prefix + name)

    def merge(self, other: "_Checks") -> None:
        self.passed += other.passed
        self.failed += other.failed


def _lift(c: dict[str, Any], chk: _Checks) -> None:
    d, Lb, Lq = c["delta_actual"], c["L_b"], c["L_q"]
    chk("delta_actual < 1/4", d < 0.25)
    chk("L_q <= L_b / (1 - 4 delta_actual)", Lq <= c["bound_li"] + INEQ_SLACK)
    if d < 0.25:
        chk("bound_li = L_b / (1 - 4 delta_actual)", _same(c["bound_li"], Lb / (1 - 4 * d)))
    chk("delta_actual <= eps (2 sup_b + 1) L_b", d <= c["defect_chain_bound"] + INEQ_SLACK)
    chk("defect_chain_bound = eps (2 sup_b + 1) L_b",
        _same(c["defect_chain_bound"], c["eps"] * (2 * c["sup_b"] + 1) * Lb))
    chk("spectral_gap_min >= gap_tol", c["spectral_gap_min"] >= c["gap_tol"])
    chk("spectral_gap_min >= 1/2 - 2 delta_actual", c["spectral_gap_min"] >= 0.5 - 2 * d - 1e-12)
    chk("lambda_star = 2n (n/(n+1))^(n-1) - 1", _same(c["lambda_star"], lambda_star(c["n"])))
    lam = c["lambda_star"]
    chk("bound_paper_lower = lam L_p / (1 - 12 eps lam L_p)",
        _same(c["bound_paper_lower"], lambda_lift_bound(lam, c["L_p"], c["eps"])))
    chk("bound_paper_upper = 2 lam L_p / (1 - 24 eps lam L_p)",
        _same(c["bound_paper_upper"], lambda_lift_bound(2 * lam, c["L_p"], c["eps"])))
    if "extension_ratio" in c and c["L_p"] > 0:
        chk("extension_ratio = L_b / L_p", _same(c["extension_ratio"], Lb / c["L_p"]))
    pre = c.get("preconditions_met", {})
    expect = {
        "delta_below_quarter": d < 0.25,
        "defect_chain_below_quarter": c["defect_chain_bound"] < 0.25,
        "eps_lambda_L_below_1_12_lower": c["eps"] * lam * c["L_p"] < 1 / 12,
        "eps_lambda_L_below_1_12_upper": c["eps"] * 2 * lam * c["L_p"] < 1 / 12,
    }
    for key, val in pre.items():
        if key in expect:
            chk(f"preconditions_met.{key} is {expect[key]}", val == expect[key])


def _homotopy(c: dict[str, Any], chk: _Checks) -> None:
    Ls = c["L_per_step"]
    chk("L_max = max_t L(q_t)", _same(c["L_max"], max(Ls)))
    chk("L_endpoints match the path", c["L_endpoints"] == [Ls[0], Ls[-1]])
    chk("grid is increasing in [0, 1]",
        all(a < b for a, b in zip(c["grid"], c["grid"][1:])) and 0 <= c["grid"][0]
        and c["grid"][-1] <= 1)
    chk("delta < 1", c["delta"] < 1)
    chk("L_max <= bound", c["L_max"] <= c["bound"] + PATH_SLACK)
    if "N" in c:
        chk("bound = N / (1 - delta)", c["delta"] >= 1 or _same(c["bound"], c["N"] / (1 - c["delta"])))
        chk("L_max <= N / (1 - delta)", max(Ls) <= c["bound"] + PATH_SLACK)
    else:
        chk("bound = max(L(q0), L(q1)) / (1 - delta)",
            c["delta"] >= 1 or _same(c["bound"], max(Ls[0], Ls[-1]) / (1 - c["delta"])))


def _uniqueness(c: dict[str, Any], chk: _Checks) -> None:
    t = c["formula_terms"]
    delta = t["norm_p_diff"] + t["eps"] * (t["L_q0"] + t["L_q1"])
    chk("delta = ||p0 - p1|| + eps (L(q0) + L(q1))", _same(c["delta"], delta))
    chk("decision is certified exactly when delta < 1",
        (c["decision"] == "certified") == (delta < 1))
    if c["decision"] == "certified":
        chk("bound = max(L(q0), L(q1)) / (1 - delta)",
            _same(c["bound"], max(t["L_q0"], t["L_q1"]) / (1 - delta)))
        if c.get("path_L_max") is not None:
            chk("path_L_max <= bound", c["path_L_max"] <= c["bound"] + PATH_SLACK)


def _lift_path(c: dict[str, Any], chk: _Checks) -> None:
    certs = c["certificates"]
    for i, sub in enumerate(certs):
        inner = _Checks(f"step {i}: ")
        _lift(sub, inner)
        chk.merge(inner)
    chk("L_q_max = max_t L(q_t)", _same(c["L_q_max"], max(s["L_q"] for s in certs)))
    chk("N = max_t L(p_t)", _same(c["N"], max(s["L_p"] for s in certs)))
    lam, eps = certs[0]["lambda_star"], certs[0]["eps"]
    chk("bound_paper_lower = lam N / (1 - 12 eps lam N)",
        _same(c["bound_paper_lower"], lambda_lift_bound(lam, c["N"], eps)))
    chk("bound_paper_upper = 2 lam N / (1 - 24 eps lam N)",
        _same(c["bound_paper_upper"], lambda_lift_bound(2 * lam, c["N"], eps)))


def _transport(c: dict[str, Any], chk: _Checks) -> None:
    for key, fn in (("lift", _lift), ("lift_shared_slope", _lift), ("uniqueness", _uniqueness)):
        inner = _Checks(f"{key}: ")
        fn(c[key], inner)
        chk.merge(inner)
    if c.get("fiberwise_path") is not None:
        inner = _Checks("fiberwise_path: ")
        _homotopy(c["fiberwise_path"], inner)
        chk.merge(inner)
    chk("fiberwise path exists exactly when certified",
        (c.get("fiberwise_path") is not None) == (c["uniqueness"]["decision"] == "certified"))
    lam = lambda_star(c["lift"]["n"])
    chk("s_lower = lam r / (1 - 12 eps lam r)",
        _same(c["s_lower"], lambda_lift_bound(lam, c["r"], c["eps"])))
    chk("s_upper = 2 lam r / (1 - 24 eps lam r)",
        _same(c["s_upper"], lambda_lift_bound(2 * lam, c["r"], c["eps"])))
    chk("L_q matches the lift", _same(c["L_q"], c["lift"]["L_q"]))
    chk("L(p_Y) <= L(q)", c["L_p_y"] <= c["L_q"] + INEQ_SLACK)


def _chern(c: dict[str, Any], chk: _Checks) -> None:
    chk("|Im c| < 1e-6", abs(c["imag_part"]) < 1e-6)
    if c.get("lower_bound") is not None:
        re, im = c["c_raw"]
        chk("lower_bound = sqrt(|c_raw| / (2 trace_mean))",
            _same(c["lower_bound"], math.sqrt(math.hypot(re, im) / (2 * c["trace_mean"]))))
        if c.get("L") is not None:
            chk("L >= lower_bound - 0.05", c["L"] >= c["lower_bound"] - 0.05)


def _components(c: dict[str, Any], chk: _Checks) -> None:
    chk("every edge has L_max <= budget",
        all(e["L_max"] <= c["budget"] for e in c["edges"]))
    where = {i: k for k, comp in enumerate(c["components"]) for i in comp}
    chk("edges stay inside components",
        all(where.get(e["i"]) == where.get(e["j"]) for e in c["edges"]))


_CHECKERS: dict[str, Callable[[dict[str, Any], _Checks], None]] = {
    "lift": _lift,
    "lift_path": _lift_path,
    "homotopy": _homotopy,
    "uniqueness": _uniqueness,
    "transport": _transport,
    "chern": _chern,
    "components": _components,
}


def verify(cert: dict[str, Any]) -> list[str]:
    """Re-check a certificate; returns the names of the checks that passed.

    Raises :class:`CertificateViolation` naming every failed check.
    """
    kind = cert.get("type")
    if kind not in _CHECKERS:
        raise CertificateViolation([f"unknown certificate type {kind!r}"])
    chk = _Checks()
    try:
        _CHECKERS[kind](cert, chk)
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateViolation([f"malformed certificate: {exc!r}"]) from exc
    if chk.failed:
        raise CertificateViolation(chk.failed)
    return chk.passed
