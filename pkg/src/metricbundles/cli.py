"""Command-line front end.

Exit codes: 0 success, 2 precondition violation, 3 numeric failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from ._parallel import set_threads
from .certificates import verify
from .errors import BadParams, BundleError
from .extension import DEFAULT_GAP_TOL, lift_path, lift_projection
from .fields import (
    PROJ_TOL,
    MatrixField,
    ProjectionField,
    field_to_json,
    frame_to_projection,
    lipschitz_constant,
    rank1_field,
)
from .homotopy import (
    chained_join,
    component_graph,
    fiberwise_join,
    join_projections,
    transport,
)
from .io import digest, dumps, load_coupled, load_field, load_json, load_space, save_json
from .metric import METRIC_TOL, correspondence_distortion, couple_by_correspondence
from . import zoo

EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


class Run:
    """Per-invocation state: tolerances, inputs read and outputs written."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.argv = list(argv)
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.rng = np.random.default_rng(args.seed)

    @property
    def tolerances(self) -> dict[str, float]:
        a = self.args
        return {"proj_tol": a.proj_tol, "gap_tol": a.gap_tol, "metric_tol": a.metric_tol}

    def _seen(self, path: str) -> None:
        if Path(path).exists():
            self.inputs[str(path)] = digest(path)

    def field(self, path: str, projection: bool = True) -> MatrixField:
        self._seen(path)
        f = load_field(path, proj_tol=self.args.proj_tol, metric_tol=self.args.metric_tol)
        if projection and not isinstance(f, ProjectionField):
            raise BadParams(f"{path} holds a general matrix field, a projection field is needed")
        return f

    def space(self, path: str):
        self._seen(path)
        return load_space(path, metric_tol=self.args.metric_tol)

    def coupled(self, path: str):
        self._seen(path)
        return load_coupled(path, metric_tol=self.args.metric_tol)

    def write(self, obj: Any, path: str | Path) -> None:
        save_json(obj, path)
        self.outputs[str(path)] = digest(path)

    def manifest(self) -> dict[str, Any]:
        return {
            "type": "manifest",
            "command": _without_threads(self.argv),
            "version": __version__,
            "seed": self.args.seed,
            "tolerances": self.tolerances,
            "inputs": self.inputs,
            "outputs": self.outputs,
        }


def _without_threads(argv: list[str]) -> list[str]:
    # the thread count never changes results, so it stays out of the record
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
        elif tok == "--threads":
            skip = True
        elif not tok.startswith("--threads="):
            out.append(tok)
    return out


def parse_subset(text: str, n: int) -> list[int]:
    """``start:stop:step`` slice, comma list, or ``@file.json`` holding a list of indices."""
    text = text.strip()
    if text.startswith("@"):
        data = load_json(text[1:])
        if not isinstance(data, list):
            raise BadParams("subset file must hold a JSON list of indices")
        return [int(i) for i in data]
    if ":" in text:
        parts = [int(p) if p else None for p in text.split(":")]
        if len(parts) > 3:
            raise BadParams(f"bad slice {text!r}")
        return list(range(n))[slice(*parts)]
    try:
        return [int(i) for i in text.split(",") if i]
    except ValueError as exc:
        raise BadParams(f"bad subset {text!r}") from exc


# --- commands -------------------------------------------------------------

def _emit_field(run: Run, field: MatrixField, out: str | None) -> dict[str, Any]:
    data = field_to_json(field)
    if out:
        run.write(data, out)
        return {"points": len(field), "n": field.n, "output": out}
    sys.stdout.write(dumps(data))
    return {}


def cmd_gen_space(run: Run) -> dict[str, Any]:
    a = run.args
    params = {"m": a.m, "m1": a.m1, "m2": a.m2, "N": a.N, "offset": a.offset}
    params = {k: v for k, v in params.items() if v is not None}
    try:
        space = zoo.make_space(a.kind, **params)
    except KeyError as exc:
        raise BadParams(f"--{exc.args[0]} is required for kind {a.kind}") from exc
    data = space.to_json()
    if a.output:
        run.write(data, a.output)
        return {"type": "gen", "kind": a.kind, "points": len(space), "output": a.output}
    sys.stdout.write(dumps(data))
    return {}


def _need(value, flag: str):
    if value is None:
        raise BadParams(f"{flag} is required")
    return value


def cmd_gen_bundle(run: Run) -> dict[str, Any]:
    a = run.args
    space = run.space(a.space) if a.space else None
    if a.kind == "mobius":
        if space is None:
            space = zoo.circle_space(_need(a.m, "--m"))
        field = zoo.mobius_projection(space=space, phase=a.phase)
    elif a.kind == "torus-line":
        k = _need(a.k, "--k")
        if space is None:
            field = zoo.torus_line_projection(k, _need(a.m1, "--m1"), _need(a.m2, "--m2"),
                                              sigma=a.sigma, offset=a.offset)
        else:
            field = frame_to_projection(zoo.torus_frame(k, space, a.sigma))
    elif a.kind in ("monopole-rank2", "monopole-irrep"):
        n = _need(a.n, "--n")
        if space is None:
            space = zoo.sphere_space(_need(a.N, "--N"))
        make = zoo.monopole_rank2 if a.kind == "monopole-rank2" else zoo.monopole_irrep
        field = make(n, space)
    elif a.kind == "trivial":
        if space is None:
            space = zoo.circle_space(_need(a.m, "--m"))
        r = a.rank if a.rank is not None else 1
        dim = a.dim if a.dim is not None else 2
        if not 0 <= r <= dim:
            raise BadParams("need 0 <= rank <= dim")
        field = zoo.constant_projection(space, np.diag([1.0] * r + [0.0] * (dim - r)))
    else:  # pragma: no cover - argparse restricts choices
        raise BadParams(a.kind)
    rep = _emit_field(run, field, a.output)
    return {"type": "gen", "kind": a.kind, **rep} if rep else {}


def cmd_gen_random(run: Run) -> dict[str, Any]:
    a = run.args
    space = run.space(a.space)
    N, n = len(space), a.n
    if a.projection:
        u = run.rng.normal(size=(N, n)) + 1j * run.rng.normal(size=(N, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        field: MatrixField = rank1_field(space, u, proj_tol=a.proj_tol)
    else:
        m = run.rng.normal(size=(N, n, n)) + 1j * run.rng.normal(size=(N, n, n))
        field = MatrixField(space, 0.5 * (m + np.conj(np.swapaxes(m, -1, -2))))
    rep = _emit_field(run, field, a.output)
    return {"type": "gen", "kind": "random", **rep} if rep else {}


def cmd_lipschitz(run: Run) -> dict[str, Any]:
    field = run.field(run.args.field, projection=False)
    return {"type": "lipschitz", **lipschitz_constant(field).to_json()}


def cmd_couple(run: Run) -> dict[str, Any]:
    a = run.args
    X, Y = run.space(a.x), run.space(a.y)
    if a.pairs:
        run._seen(a.pairs)
        pairs = [tuple(p) for p in load_json(a.pairs)]
    else:
        pairs = zoo.nearest_correspondence(X, Y)
    eps0 = a.eps0
    dis = correspondence_distortion(X, Y, pairs)
    if eps0 is None:
        eps0 = max(dis / 2, 1e-12)
    coupled = couple_by_correspondence(X, Y, pairs, eps0)
    data = coupled.to_json()
    if a.output:
        run.write(data, a.output)
    else:
        sys.stdout.write(dumps(data))
        return {}
    return {"type": "couple", "points": len(coupled.space), "pairs": len(pairs),
            "distortion": dis, "eps0": eps0, "eps": coupled.eps, "output": a.output}


def _target(run: Run):
    a = run.args
    if a.coupled:
        c = run.coupled(a.coupled)
        return c.space, list(c.x_ids)
    if not a.target or not a.subset:
        raise BadParams("give --coupled, or --target together with --subset")
    Z = run.space(a.target)
    return Z, parse_subset(a.subset, len(Z))


def cmd_lift(run: Run) -> dict[str, Any]:
    a = run.args
    Z, idx = _target(run)
    fields = [run.field(f) for f in a.fields]
    opts = dict(shared_slope=a.shared_slope, gap_tol=a.gap_tol, certify=not a.no_certify)
    if len(fields) == 1:
        res = lift_projection(fields[0], Z, idx, **opts)
        cert = res.certificate.to_json()
        if a.output:
            run.write(field_to_json(res.q), a.output)
        qs = [res.q]
    else:
        pl = lift_path(fields, Z, idx, **opts)
        cert = pl.to_json()
        qs = [r.q for r in pl.lifts]
        if a.output:
            out = Path(a.output)
            out.mkdir(parents=True, exist_ok=True)
            for i, q in enumerate(qs):
                run.write(field_to_json(q), out / f"q_{i:04d}.json")
    if a.certificate:
        run.write(cert, a.certificate)
    return cert


def _write_path_fields(run: Run, path, directory: str | None) -> None:
    if not directory:
        return
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(path.fields):
        run.write(field_to_json(f), out / f"t_{i:04d}.json")


def cmd_homotopy(run: Run) -> dict[str, Any]:
    a = run.args
    if a.mode == "join":
        if len(a.fields) != 2:
            raise BadParams("join takes exactly two fields")
        q0, q1 = (run.field(f) for f in a.fields)
        path = join_projections(q0, q1, a.steps, a.gap_tol)
    elif a.mode == "fiberwise":
        if len(a.fields) != 2 or not a.subset:
            raise BadParams("fiberwise takes two fields and --subset")
        q0, q1 = (run.field(f) for f in a.fields)
        path = fiberwise_join(q0, q1, parse_subset(a.subset, len(q0)), a.steps, a.gap_tol)
    else:
        if not a.samples or not a.lifts or not a.subset or a.delta is None:
            raise BadParams("chain needs --samples, --lifts, --subset and --delta")
        ps = [run.field(f) for f in a.samples]
        qs = [run.field(f) for f in a.lifts]
        path = chained_join(ps, qs, parse_subset(a.subset, len(qs[0])), a.delta, a.steps)
    cert = path.to_json()
    _write_path_fields(run, path, a.fields_dir)
    if a.output:
        run.write(cert, a.output)
    return cert


def cmd_transport(run: Run) -> dict[str, Any]:
    a = run.args
    p = run.field(a.field)
    res = transport(p, run.coupled(a.coupled), a.steps)
    if a.output:
        run.write(field_to_json(res.p_y), a.output)
    if a.certificate:
        run.write(res.certificate, a.certificate)
    return res.certificate


def cmd_components(run: Run) -> dict[str, Any]:
    a = run.args
    fields = [run.field(f) for f in a.fields]
    subset = parse_subset(a.subset, len(fields[0])) if a.subset and fields else None
    comps = component_graph(fields, a.budget, subset, a.steps)
    out = comps.to_json()
    out["inputs"] = list(a.fields)
    if a.output:
        run.write(out, a.output)
    return out


def cmd_chern(run: Run) -> dict[str, Any]:
    a = run.args
    field = run.field(a.field)
    res = zoo.chern_number_torus(field)
    out = {"type": "chern", **res.to_json()}
    out["lower_bound"] = zoo.chern_lower_bound(abs(res.c_raw), res.trace_mean)
    out["L"] = lipschitz_constant(field).L if a.with_lipschitz else None
    if a.output:
        run.write(out, a.output)
    return out


def cmd_oracle(run: Run) -> dict[str, Any]:
    a = run.args
    grid = zoo.tangent_grid(a.n_alpha, a.n_beta)
    val = zoo.induced_lipschitz_exact(a.n, grid, a.h)
    return {"type": "oracle", "oracle": "induced-lipschitz", "n": a.n, "value": val,
            "sqrt_n": float(np.sqrt(a.n)), "grid": [a.n_alpha, a.n_beta], "h": a.h}


def cmd_verify(run: Run) -> dict[str, Any]:
    run._seen(run.args.certificate)
    passed = verify(load_json(run.args.certificate))
    return {"type": "verify", "ok": True, "checks": passed}


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--json", action="store_true", help="print the report as JSON")
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $BUNDLES_THREADS or 1)")
    g.add_argument("--seed", type=int, default=0, help="seed for random generators")
    g.add_argument("--manifest", help="write a run manifest to this path")
    g.add_argument("--proj-tol", type=float, default=PROJ_TOL)
    g.add_argument("--gap-tol", type=float, default=DEFAULT_GAP_TOL)
    g.add_argument("--metric-tol", type=float, default=METRIC_TOL)

    p = _Parser(prog="metricbundles", description="Vector bundles on finite metric spaces.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate spaces and fields")
    gsub = gen.add_subparsers(dest="what", required=True, parser_class=_Parser)
    s = gsub.add_parser("space", parents=[common])
    s.add_argument("--kind", choices=["circle", "torus", "sphere"], required=True)
    s.add_argument("--m", type=int)
    s.add_argument("--m1", type=int)
    s.add_argument("--m2", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--offset", action="store_true", help="torus grid at half spacings")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_gen_space)
    b = gsub.add_parser("bundle", parents=[common])
    b.add_argument("--kind", required=True, choices=[
        "mobius", "torus-line", "monopole-rank2", "monopole-irrep", "trivial"])
    b.add_argument("--space", help="existing space file to sample on")
    b.add_argument("--m", type=int)
    b.add_argument("--phase", type=float, default=0.0)
    b.add_argument("--k", type=int)
    b.add_argument("--m1", type=int)
    b.add_argument("--m2", type=int)
    b.add_argument("--sigma", type=float, help="plateau half-width (smoothed torus)")
    b.add_argument("--offset", action="store_true")
    b.add_argument("--n", type=int)
    b.add_argument("--N", type=int)
    b.add_argument("--rank", type=int)
    b.add_argument("--dim", type=int)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_gen_bundle)
    r = gsub.add_parser("random", parents=[common])
    r.add_argument("--space", required=True)
    r.add_argument("--n", type=int, default=2)
    r.add_argument("--projection", action="store_true", help="random rank-one projections")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_gen_random)

    s = sub.add_parser("lipschitz", parents=[common], help="Lipschitz constant of a field")
    s.add_argument("field")
    s.set_defaults(func=cmd_lipschitz)

    s = sub.add_parser("couple", parents=[common], help="couple two spaces along a correspondence")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--pairs", help="JSON list of [i, j] index pairs")
    s.add_argument("--nearest", action="store_true", help="nearest-point correspondence (default)")
    s.add_argument("--eps0", type=float, help="slack (default: half the distortion)")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_couple)

    s = sub.add_parser("lift", parents=[common], help="lift projection fields to a superspace")
    s.add_argument("fields", nargs="+")
    s.add_argument("--coupled")
    s.add_argument("--target")
    s.add_argument("--subset", help="start:stop:step, comma list, or @file.json")
    s.add_argument("--shared-slope", action="store_true")
    s.add_argument("--no-certify", action="store_true",
                   help="check only the sampled defect, not the a priori bound")
    s.add_argument("-o", "--output", help="lifted field (a directory for several fields)")
    s.add_argument("--certificate")
    s.set_defaults(func=cmd_lift)

    s = sub.add_parser("homotopy", parents=[common], help="paths between projection fields")
    s.add_argument("mode", choices=["join", "fiberwise", "chain"])
    s.add_argument("fields", nargs="*")
    s.add_argument("--samples", nargs="+")
    s.add_argument("--lifts", nargs="+")
    s.add_argument("--subset")
    s.add_argument("--delta", type=float)
    s.add_argument("--steps", type=int, default=50)
    s.add_argument("--fields-dir", help="write every path field here")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_homotopy)

    s = sub.add_parser("transport", parents=[common], help="carry a field across a coupling")
    s.add_argument("field")
    s.add_argument("--coupled", required=True)
    s.add_argument("--steps", type=int, default=50)
    s.add_argument("-o", "--output", help="transported field on Y")
    s.add_argument("--certificate")
    s.set_defaults(func=cmd_transport)

    s = sub.add_parser("components", parents=[common], help="components under a Lipschitz budget")
    s.add_argument("fields", nargs="*")
    s.add_argument("--budget", type=float, required=True)
    s.add_argument("--subset")
    s.add_argument("--steps", type=int, default=50)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_components)

    s = sub.add_parser("chern", parents=[common], help="first Chern number on a torus grid")
    s.add_argument("field")
    s.add_argument("--with-lipschitz", action="store_true")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_chern)

    s = sub.add_parser("oracle", parents=[common], help="analytic oracles")
    s.add_argument("which", choices=["induced-lipschitz"])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--n-alpha", type=int, default=33)
    s.add_argument("--n-beta", type=int, default=32)
    s.add_argument("--h", type=float, default=1e-5)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("verify", parents=[common], help="re-check a certificate file")
    s.add_argument("certificate")
    s.set_defaults(func=cmd_verify)
    return p


def _human(report: dict[str, Any]) -> str:
    lines = []
    for k, v in report.items():
        if isinstance(v, (dict, list)) and len(str(v)) > 100:
            v = f"<{type(v).__name__} of {len(v)}>"
        lines.append(f"{k}: {v}")
    return "\n".join(lines) + "\n"


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    if args.threads is not None:
        if args.threads < 1:
            sys.stderr.write("--threads must be positive\n")
            return EXIT_USAGE
        set_threads(args.threads)
    ctx = Run(args, argv)
    try:
        report = args.func(ctx)
    except BundleError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    finally:
        if args.threads is not None:
            set_threads(None)
    if report:
        sys.stdout.write(dumps(report) if args.json else _human(report))
    if args.manifest:
        save_json(ctx.manifest(), args.manifest)
    return 0


def main() -> None:
    sys.exit(run())
