"""Command-line interface.

Subcommands:

  sample      draw a fragmentation tree and emit it (canonical string, JSON
              node list, or a stats record)
  exact-dist  write the exact height-CDF table as CSV
  constants   print the optimal tilt and height constants for a theta
  verify      run the exact-identity suite; exit 2 on any failure
  bijection   map a pair sequence to its bilabelled tree (or invert)
  stats       height / s-mass / macroscopic-children stats of a tree JSON
  experiment  run a Monte Carlo experiment from a JSON config to CSV

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 resource
budget exceeded.  Randomized subcommands take --seed; if omitted, a seed is
drawn from the OS and echoed to stderr so the run can be reproduced.
"""

from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from itertools import product

import numpy as np

from ewenstrees import bijection as bij
from ewenstrees import constants as consts
from ewenstrees import ewens, fragmentation, heights, montecarlo, trees

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_BUDGET = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="ewenstrees", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="sample a fragmentation tree")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--labelled", action="store_true")
    sp.add_argument("--emit", choices=("canon", "json", "stats"), default="canon")

    ed = sub.add_parser("exact-dist", help="exact height-CDF table to CSV")
    ed.add_argument("--n-max", type=int, required=True)
    ed.add_argument("--h-max", type=int, default=None)
    ed.add_argument("--theta", type=float, required=True)
    ed.add_argument("--out", required=True)

    co = sub.add_parser("constants", help="height constants for a theta")
    co.add_argument("--theta", type=float, required=True)
    co.add_argument("--json", action="store_true")

    ve = sub.add_parser("verify", help="run the exact-identity suite")
    ve.add_argument("--fast", action="store_true")
    ve.add_argument("--seed", type=int, default=None)

    bi = sub.add_parser("bijection", help="pair sequence <-> bilabelled tree")
    group = bi.add_mutually_exclusive_group(required=True)
    group.add_argument("--seq", help='pairs like "0,1;0,1;2,3"')
    group.add_argument("--invert", help="path to a JSON node list (or - for stdin)")

    st = sub.add_parser("stats", help="statistics of a mass-tree JSON or canonical string")
    group = st.add_mutually_exclusive_group(required=True)
    group.add_argument("--in", dest="infile", help="mass-tree JSON node list")
    group.add_argument("--tree", help='canonical string, e.g. "((())())"')
    st.add_argument("--s", default="2", help="comma-separated s values")
    st.add_argument("--delta", type=float, default=0.3)

    ex = sub.add_parser("experiment", help="run an experiment config")
    ex.add_argument("--config", required=True)
    ex.add_argument("--out", required=True)
    return p


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    fresh = secrets.randbits(63)
    print(f"seed (auto-generated): {fresh}", file=sys.stderr)
    return fresh


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _cmd_sample(args) -> int:
    if args.n < 1:
        raise _UsageError("--n must be >= 1")
    if not args.theta > 0:
        raise _UsageError("--theta must be > 0")
    rng = _rng(_resolve_seed(args.seed))
    if args.labelled:
        lt = fragmentation.sample_labelled_fragmentation(args.n, args.theta, rng)
        tree = lt.tree
    else:
        lt = None
        tree = fragmentation.sample_fragmentation(args.n, args.theta, rng)
    if args.emit == "canon":
        print(tree.shape().canon)
    elif args.emit == "json":
        obj = tree.to_json_obj()
        if lt is not None:
            for rec, lab in zip(obj, lt.label):
                rec["label"] = lab
        json.dump(obj, sys.stdout)
        print()
    else:
        print(json.dumps(_stats_record(tree, (2,), 0.3)))
    return EXIT_OK


def _cmd_exact_dist(args) -> int:
    if args.n_max < 1:
        raise _UsageError("--n-max must be >= 1")
    if not args.theta > 0:
        raise _UsageError("--theta must be > 0")
    try:
        table = heights.exact_height_cdf(args.n_max, args.h_max, args.theta)
    except heights.BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    with open(args.out, "w") as fh:
        fh.write("n,h,q,p\n")
        for n, h, q, pp in table.rows_csv():
            fh.write(f"{n},{h},{q!r},{pp!r}\n")
    print(f"wrote q_n(h) for n <= {table.N}, h <= {table.H} to {args.out}")
    return EXIT_OK


def _cmd_constants(args) -> int:
    if not args.theta > 0:
        raise _UsageError("--theta must be > 0")
    hc = consts.height_constants(args.theta)
    if args.json:
        json.dump(
            {
                "theta": hc.theta,
                "t_star": hc.t_star,
                "v_star": hc.v_star,
                "c_star": hc.c_star,
                "c_plus": hc.c_plus,
                "s_plus": hc.s_plus,
            },
            sys.stdout,
        )
        print()
    else:
        print(f"t_star={hc.t_star:.12f}")
        print(f"v_star={hc.v_star:.12f}")
        print(f"c_star={hc.c_star:.12f}")
        print(f"c_plus={hc.c_plus:.12f}")
        print(f"s_plus={hc.s_plus}")
    return EXIT_OK


def _cmd_bijection(args) -> int:
    if args.seq is not None:
        try:
            pairs = []
            for chunk in args.seq.split(";"):
                u, v = chunk.split(",")
                pairs.append((int(u), int(v)))
            seq = bij.ChordSequence(pairs=tuple(pairs))
        except (ValueError, bij.ChordSequenceError) as exc:
            raise _UsageError(f"bad --seq: {exc}") from exc
        bt = bij.sequence_to_bitree(seq)
        print(bt.render())
        json.dump(bt.to_json_obj(), sys.stdout)
        print()
        return EXIT_OK
    text = (
        sys.stdin.read()
        if args.invert == "-"
        else open(args.invert).read()
    )
    try:
        bt = bij.BilabelledTree.from_json_obj(json.loads(text))
        seq = bij.bitree_to_sequence(bt)
    except (ValueError, bij.BitreeStructureError) as exc:
        raise _UsageError(f"bad bilabelled tree: {exc}") from exc
    print(";".join(f"{u},{v}" for u, v in seq.pairs))
    return EXIT_OK


def _stats_record(tree, s_values, delta) -> dict:
    rec = {
        "n": tree.root_mass,
        "height": heights.height(tree),
        "macroscopic_count": heights.macroscopic_count(tree, delta)
        if tree.root_mass > 1
        else 0,
        "delta": delta,
        "s_mass": {},
    }
    for s in s_values:
        rec["s_mass"][str(s)] = list(heights.s_mass_profile(tree, s).values)
    return rec


def _cmd_stats(args) -> int:
    try:
        s_values = tuple(int(x) for x in args.s.split(","))
    except ValueError as exc:
        raise _UsageError(f"bad --s: {exc}") from exc
    if any(s < 2 for s in s_values):
        raise _UsageError("--s values must be >= 2")
    if not (0.0 < args.delta < 1.0):
        raise _UsageError("--delta must be in (0, 1)")
    if args.tree is not None:
        # canonical string carries the shape only: report labelling counts
        try:
            t = trees.CanonicalTree.from_string(args.tree)
        except trees.MalformedTreeError as exc:
            raise _UsageError(f"bad --tree: {exc}") from exc
        hd = trees.hook_counts(t)
        children = trees.parse_canonical(t.canon)
        depth = [0] * len(children)
        for v, kids in enumerate(children):
            for c in kids:
                depth[c] = depth[v] + 1
        json.dump(
            {
                "n": t.n,
                "canon": t.canon,
                "height": max(depth),
                "d": hd.d,
                "aut": hd.aut,
                "u": hd.u,
            },
            sys.stdout,
        )
        print()
        return EXIT_OK
    with open(args.infile) as fh:
        tree = fragmentation.MassTree.from_json_obj(json.load(fh))
    json.dump(_stats_record(tree, s_values, args.delta), sys.stdout)
    print()
    return EXIT_OK


def _cmd_experiment(args) -> int:
    try:
        cfg = montecarlo.ExperimentConfig.from_json(open(args.config).read())
    except montecarlo.ConfigError as exc:
        raise _UsageError(str(exc)) from exc
    try:
        result = montecarlo.run_experiment(cfg)
    except montecarlo.ResourceBudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    montecarlo.records_to_csv(result.records, args.out)
    json.dump(result.summary, sys.stdout, sort_keys=True)
    print()
    return EXIT_OK


# -- verify: the exact-identity suite -----------------------------------------


def _check_fundamental(fast: bool):
    top = 7 if fast else 9
    for n in range(1, top + 1):
        lhs, rhs = trees.fundamental_identity(n)
        if lhs != rhs:
            return False, f"n={n}: {lhs} != {rhs}"
    return True, f"exact equality for n <= {top}"

def _check_hook_example(fast: bool):
    t = trees.canonicalize([[1, 2, 3], [], [], [4], [5, 6, 7], [], [], []])
    hd = trees.hook_counts(t)
    ok = (hd.d, hd.u) == (252, 21)
    return ok, f"8-vertex example: d={hd.d}, u={hd.u} (want 252, 21)"


def _check_bijection(fast: bool):
    top = 5 if fast else 6
    for n in range(1, top + 1):
        ranges = [
            [(u, v) for v in range(1, i + 1) for u in range(v)] for i in range(1, n)
        ]
        seen = set()
        count = 0
        for pairs in product(*ranges):
            s = bij.ChordSequence(pairs=tuple(pairs))
            bt = bij.sequence_to_bitree(s)
            if bij.bitree_to_sequence(bt) != s:
                return False, f"roundtrip failed at n={n}"
            seen.add(bt.key())
            count += 1
        expected = math.prod(math.comb(i + 1, 2) for i in range(1, n))
        if count != expected or len(seen) != expected:
            return False, f"image cardinality mismatch at n={n}"
    return True, f"roundtrips and image cardinality exact for n <= {top}"


def _check_key_identity(fast: bool):
    h_max, degree = (3, 60) if fast else (10, 200)
    worst = 0.0
    for theta in (1.0, 2.0):
        table = heights.exact_height_cdf(degree + 1, h_max, theta)
        for h in range(1, h_max + 1):
            worst = max(
                worst, heights.key_identity_residual(h, theta, degree, table=table)
            )
    ok = worst < 1e-9
    return ok, f"max residual {worst:.3e} (tolerance 1e-9)"


def _check_ewens_tv(fast: bool, seed: int):
    reps = 10**5 if fast else 10**6
    tol = 0.015 if fast else 0.005
    rng = _rng(seed)
    m = 8
    cvs = ewens.all_count_vectors(m)
    index = {cv.counts: i for i, cv in enumerate(cvs)}
    worst = 0.0
    for theta in (0.5, 1.0, 2.0):
        probs = np.array([ewens.ewens_pmf(cv, theta) for cv in cvs])
        counts = np.zeros(len(cvs))
        for _ in range(reps):
            cv = ewens.sample_ewens_crp(m, theta, rng)
            counts[index[cv.counts]] += 1
        tv = 0.5 * float(np.abs(counts / reps - probs).sum())
        worst = max(worst, tv)
    ok = worst < tol
    return ok, f"max TV {worst:.4f} over theta in {{0.5, 1, 2}} (tolerance {tol})"


def _cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 987654321
    checks = [
        ("fundamental-identity", lambda: _check_fundamental(args.fast)),
        ("hook-example", lambda: _check_hook_example(args.fast)),
        ("bijection-roundtrip", lambda: _check_bijection(args.fast)),
        ("key-identity-residual", lambda: _check_key_identity(args.fast)),
        ("ewens-sampler-tv", lambda: _check_ewens_tv(args.fast, seed)),
    ]
    failed = 0
    for name, fn in checks:
        ok, detail = fn()
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        if not ok:
            failed += 1
    if failed:
        print(f"{failed} check(s) failed")
        return EXIT_VERIFY
    print("all checks passed")
    return EXIT_OK


_DISPATCH = {
    "sample": _cmd_sample,
    "exact-dist": _cmd_exact_dist,
    "constants": _cmd_constants,
    "verify": _cmd_verify,
    "bijection": _cmd_bijection,
    "stats": _cmd_stats,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MemoryError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
