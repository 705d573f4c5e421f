"""Command-line front end: ``dle build|evolve|analyze|check``.

Exit codes: 0 success, 2 input/validation error, 3 pre-constraint
rejection, 4 invariant-suite failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .adapted import build_frame, to_adapted
from .checks import run_suite
from .io import FIXTURES, dynamical_matrix, load_problem
from .linalg import DEFAULT_REL_TOL
from .solutions import (
    TrajectoryRejected,
    constraint_space_D,
    null_and_representative,
    representative_nondegeneracy,
    solution_space,
)
from .timestep import (
    DEFAULT_CONSTRAINT_TOL,
    ConstraintViolation,
    ValidationError,
    build_move,
    evolve,
    symplectic_product,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_REJECTED = 3
EXIT_INVARIANT = 4


# -- JSON with 17 significant digits ---------------------------------------

def _plain(obj):
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _number(x):
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x}")
    if x == 0:
        return "0.0"
    text = format(x, ".17g")
    return text if "." in text or "e" in text else text + ".0"


def dumps(obj, indent=2, _level=0):
    """Deterministic JSON: sorted keys, floats written with 17 significant digits."""
    obj = _plain(obj)
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _number(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [inner + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if not obj:
        return "{}"
    items = [inner + json.dumps(k) + ": " + dumps(obj[k], indent, _level + 1) for k in sorted(obj)]
    return "{\n" + ",\n".join(items) + "\n" + pad + "}"


# -- argument parsing ------------------------------------------------------

def _csv(text, what):
    text = text.strip()
    if not text:
        return np.zeros(0)
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ValidationError(f"{what}: cannot parse {text!r} as comma-separated numbers") from None
    if not np.all(np.isfinite(vals)):
        raise ValidationError(f"{what}: non-finite value")
    return vals


def _lambdas(text, steps):
    parts = text.split(";")
    if len(parts) != len(steps):
        raise ValidationError(f"--lambda has {len(parts)} group(s), expected one per step ({len(steps)})")
    return [_csv(part, f"--lambda group {n}") for n, part in enumerate(parts)]


def _positive(text):
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return val


def _at_least_one(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return val


def build_parser():
    p = argparse.ArgumentParser(
        prog="dle",
        description="Evolution and constraint analysis of linear systems in discrete time.",
        epilog=f"--input accepts a JSON file or a bundled fixture name: {', '.join(FIXTURES)}",
    )
    p.add_argument("command", choices=("build", "evolve", "analyze", "check"))
    p.add_argument("--input", help="lattice or raw-matrix JSON file, or a fixture name")
    p.add_argument("--y0", help="initial phase vector (x, p) as CSV")
    p.add_argument("--z0", help="companion initial vector; its symplectic product with y is reported per slice")
    p.add_argument("--lambda", dest="lam", help="free parameters per step, CSV groups separated by ';'")
    p.add_argument("--project", action="store_true",
                   help="project each state onto the pre-constraint surface instead of rejecting it")
    p.add_argument("--rel-tol", type=_positive, default=DEFAULT_REL_TOL, help="relative SVD rank tolerance")
    p.add_argument("--constraint-tol", type=_positive, default=DEFAULT_CONSTRAINT_TOL,
                   help="tolerance for lying on a constraint surface")
    p.add_argument("--seed", type=int, default=0, help="random seed (random lambda, random systems)")
    p.add_argument("--iterations", type=_at_least_one, default=100, help="rounds of the invariant suite")
    p.add_argument("--machine", action="store_true", help="emit a single JSON document")
    return p


# -- commands --------------------------------------------------------------

def _moves(problem, args):
    return [build_move(s, args.rel_tol) for s in problem.steps]


def cmd_build(args):
    problem = load_problem(_require(args.input, "--input"))
    steps = []
    for n, (st, mv) in enumerate(zip(problem.steps, _moves(problem, args))):
        steps.append({
            "step": n, "L": st.L, "R": st.R, "Rbar": st.Rbar,
            "r": mv.r, "s": mv.s, "constraint_rank": mv.constraint_rank(args.rel_tol),
            "singular_values": mv.svd_R.sigma_r,
            "C": mv.C, "Cbar_next": mv.Cbar_next, "E": mv.E, "F": mv.F,
        })
    data = {"q": problem.q, "t": problem.t, "steps": steps}
    K = dynamical_matrix(problem)
    if K is not None:
        data["K"] = K.K
    lines = [f"q = {problem.q}, t = {problem.t}"]
    for s in steps:
        lines.append(f"step {s['step']}: r = {s['r']}, s = {s['s']}, sigma = {_fmt(s['singular_values'])}")
        for key in ("L", "R", "Rbar", "C", "E"):
            lines.append(f"  {key} =\n{_indent(s[key])}")
        if s["s"]:
            lines.append(f"  F =\n{_indent(s['F'])}")
    return EXIT_OK, "ok", data, lines


def cmd_evolve(args):
    problem = load_problem(_require(args.input, "--input"))
    steps, moves = problem.steps, _moves(problem, args)
    q2 = 2 * problem.q
    y0 = _csv(_require(args.y0, "--y0"), "--y0")
    if y0.size != q2:
        raise ValidationError(f"--y0 has length {y0.size}, expected {q2}")
    if args.lam is not None:
        lams = _lambdas(args.lam, steps)
    else:
        rng = np.random.default_rng(args.seed)
        lams = [rng.uniform(-1, 1, m.s) for m in moves]
    for n, (lam, mv) in enumerate(zip(lams, moves)):
        if lam.size != mv.s:
            raise ValidationError(f"lambda for step {n} has length {lam.size}, expected s = {mv.s}")
    z = None
    if args.z0 is not None:
        z = _csv(args.z0, "--z0")
        if z.size != q2:
            raise ValidationError(f"--z0 has length {z.size}, expected {q2}")
    frames = [build_frame(s, args.rel_tol) for s in steps]

    states, companions = [y0], [z]
    for n, (mv, lam) in enumerate(zip(moves, lams)):
        for which, seq, param in (("state", states, lam), ("companion", companions, np.zeros(mv.s))):
            if seq[-1] is None:
                seq.append(None)
                continue
            try:
                seq.append(evolve(mv, seq[-1], param, args.constraint_tol, project=args.project))
            except ConstraintViolation as exc:
                err = TrajectoryRejected(str(exc), exc.residual, exc.rows, n, tuple(seq))
                return _rejection(err, which)

    slices = []
    for n, y in enumerate(states):
        rec = {"slice": n, "x": y[: problem.q], "p": y[problem.q:]}
        if n < len(moves):
            rec["pre_constraint_residual"] = float(np.abs(moves[n].C @ y).max())
            rec["adapted_n"] = to_adapted(frames[n], y, "n")
        if n > 0:
            rec["post_constraint_residual"] = float(np.abs(moves[n - 1].Cbar_next @ y).max())
            rec["adapted_n_plus_1"] = to_adapted(frames[n - 1], y, "n_plus_1")
            rec["lambda"] = lams[n - 1]
        if companions[n] is not None:
            rec["omega_with_companion"] = symplectic_product(y, companions[n])
        slices.append(rec)
    data = {"q": problem.q, "t": problem.t, "projected": bool(args.project), "slices": slices}
    lines = []
    for rec in slices:
        line = f"slice {rec['slice']}: x = {_fmt(rec['x'])}, p = {_fmt(rec['p'])}"
        if "omega_with_companion" in rec:
            line += f", omega = {rec['omega_with_companion']:.12g}"
        lines.append(line)
    return EXIT_OK, "ok", data, lines


def _rejection(err, which):
    data = {
        "slice": err.slice_index,
        "vector": which,
        "residual_norm": err.residual_norm,
        "residual": err.residual,
        "rows": err.rows,
        "partial_states": list(err.partial),
    }
    message = f"{which} rejected by the pre-constraint at slice {err.slice_index} " \
              f"(residual {err.residual_norm:.3e}, rows {err.rows})"
    print(f"dle: {message}", file=sys.stderr)
    return EXIT_REJECTED, "rejected", data, [message]


def cmd_analyze(args):
    problem = load_problem(_require(args.input, "--input"))
    moves = _moves(problem, args)
    sol = solution_space(problem.steps, args.rel_tol, moves=moves)
    slices = []
    for n in range(sol.t + 1):
        D = constraint_space_D(sol, n, args.rel_tol)
        N, Dd = null_and_representative(D)
        slices.append({
            "slice": n, "dim_D": D.dim, "dim_N": N.dim, "dim_Ddot": Dd.dim,
            "nondegeneracy": representative_nondegeneracy(Dd),
        })
    rng = np.random.default_rng(args.seed)
    spread = 0.0
    if sol.dim:
        a = sol.kernel_basis.basis @ rng.normal(size=sol.dim)
        b = sol.kernel_basis.basis @ rng.normal(size=sol.dim)
        vals = [symplectic_product(sol.state(a, n), sol.state(b, n)) for n in range(sol.t + 1)]
        spread = max(vals) - min(vals)
    data = {
        "q": problem.q, "t": problem.t,
        "param_dim": sol.param_dim, "solution_dim": sol.dim,
        "steps": [{"step": n, "r": m.r, "s": m.s} for n, m in enumerate(moves)],
        "slices": slices,
        "solution_product_spread": spread,
    }
    lines = [f"solution space: dim {sol.dim} of {sol.param_dim} parameters"]
    for n, m in enumerate(moves):
        lines.append(f"step {n}: r = {m.r}, s = {m.s}")
    for rec in slices:
        lines.append(f"slice {rec['slice']}: dim D = {rec['dim_D']}, dim N = {rec['dim_N']}, "
                     f"dim Ddot = {rec['dim_Ddot']}")
    lines.append(f"solution product spread across slices: {spread:.3e}")
    return EXIT_OK, "ok", data, lines


def cmd_check(args):
    rng = np.random.default_rng(args.seed)
    steps = load_problem(args.input).steps if args.input else None
    results = run_suite(rng, args.iterations, steps, args.rel_tol)
    ok = all(r.passed for r in results)
    data = {
        "source": args.input or "random",
        "seed": args.seed,
        "iterations": args.iterations,
        "invariants": [r.as_dict() for r in results],
    }
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: worst {r.worst:.3e} (tol {r.tol:.0e}, {r.trials} trials)"
             for r in results]
    if ok:
        return EXIT_OK, "ok", data, lines
    failed = ", ".join(r.name for r in results if not r.passed)
    print(f"dle: invariant(s) failed: {failed}", file=sys.stderr)
    return EXIT_INVARIANT, "failed", data, lines


COMMANDS = {"build": cmd_build, "evolve": cmd_evolve, "analyze": cmd_analyze, "check": cmd_check}


# -- helpers ---------------------------------------------------------------

def _require(value, flag):
    if value is None:
        raise ValidationError(f"{flag} is required for this command")
    return value


def _fmt(v):
    return "(" + ", ".join(f"{x:.6g}" for x in np.asarray(v).ravel()) + ")"


def _indent(M):
    return "\n".join("    " + "  ".join(f"{x:10.6g}" for x in row) for row in np.asarray(M))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code, status, data, lines = COMMANDS[args.command](args)
    except (ValidationError, ValueError) as exc:
        print(f"dle: {exc}", file=sys.stderr)
        code, status, data, lines = EXIT_VALIDATION, "error", {"message": str(exc)}, []
    if args.machine:
        print(dumps({"command": args.command, "status": status, "data": data}))
    else:
        for line in lines:
            print(line)
    return code


if __name__ == "__main__":
    sys.exit(main())
