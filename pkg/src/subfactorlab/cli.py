"""Command-line experiment runner.

Exit codes: 0 on success, 2 when a numeric acceptance check fails, 3 on
invalid input (unparsable files, bad geometry, size caps).
"""
import argparse
import concurrent.futures
import re
import sys

from . import blockalg, io, lattice, linalg, toric

EXIT_OK = 0
EXIT_NUMERIC = 2
EXIT_INPUT = 3

NAT_KEYS = ("entropy", "relative_entropy", "reverse_relative_entropy", "chi", "chi_ambient",
            "chi_sub", "disturbance", "equivalent_form", "privacy", "expected_disturbance")


class InputError(Exception):
    """Raised for invalid command-line input; maps to exit code 3."""


def parse_n_range(text):
    """``"1..3"`` -> ``[1, 2, 3]``, ``"1,3"`` -> ``[1, 3]``, ``""`` -> ``[]``."""
    text = text.strip()
    if not text:
        return []
    m = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return list(range(lo, hi + 1))
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse range {text!r}") from exc
    if any(v < 1 for v in values):
        raise InputError("region sizes must be positive")
    return values


def _positive(kind):
    def check(text):
        try:
            value = kind(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from exc
        if value <= 0:
            raise argparse.ArgumentTypeError(f"{text!r} must be positive")
        return value
    return check


# ------------------------------------------------------------------ commands


def _load_sections(paths):
    sections = []
    for path in paths:
        sections += io.read_states(path)
    dims = {s.matrix.shape[0] for s in sections}
    if len(dims) != 1:
        raise InputError(f"states have different dimensions {sorted(dims)}")
    return sections


def cmd_entropy(args):
    """One state: entropy.  Two unweighted states: relative entropy.  Otherwise Holevo chi."""
    sections = _load_sections(args.inputs)
    for s in sections:
        try:
            linalg.check_density(s.matrix)
        except ValueError as exc:
            raise InputError(f"state {s.label!r}: {exc}") from exc
    labels = [s.label for s in sections]
    config = {"inputs": [str(p) for p in args.inputs], "labels": labels, "tol": args.tol}
    weighted = any(s.weight is not None for s in sections)
    if len(sections) == 1:
        results = {"entropy": linalg.von_neumann_entropy(sections[0].matrix)}
    elif len(sections) == 2 and not weighted:
        rho, sigma = sections[0].matrix, sections[1].matrix
        results = {"relative_entropy": linalg.relative_entropy(rho, sigma, tol=args.tol),
                   "reverse_relative_entropy": linalg.relative_entropy(sigma, rho, tol=args.tol)}
    else:
        if weighted and any(s.weight is None for s in sections):
            raise InputError("either all states or none carry a weight line")
        weights = [s.weight if weighted else 1.0 / len(sections) for s in sections]
        try:
            linalg.check_weights(weights)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        results = {"chi": linalg.holevo_chi(weights, [s.matrix for s in sections])}
        results["members"] = len(sections)
    return [io.make_record("entropy", config, io.with_bits(results, NAT_KEYS))], EXIT_OK


def cmd_index(args):
    expectation = blockalg.block_average_expectation(args.k, args.dim)
    if args.power > 1:
        try:
            expectation = blockalg.tensor_power(expectation, args.power)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    est = blockalg.pimsner_popa_constant(expectation, args.trials, args.seed)
    expected = float(args.k ** args.power)
    config = {"k": args.k, "dim": args.dim, "power": args.power, "trials": args.trials,
              "seed": args.seed, "tol": args.tol}
    results = {"lambda_hat": est.lambda_hat, "index_hat": est.index_hat, "samples": est.samples,
               "expected_index": expected, "index_exact": expectation.index_exact}
    status = EXIT_OK if abs(est.index_hat - expected) <= args.tol * expected else EXIT_NUMERIC
    results["pass"] = status == EXIT_OK
    return [io.make_record("index", config, results, args.seed)], status


def _toric_row(n, backend, geometry, seed, trials, tol):
    """Single experiment as ``(config, results, elapsed, status)``; errors become rows."""
    config = {"n": n, "backend": backend, "geometry": geometry, "seed": seed, "trials": trials,
              "tol": tol}
    try:
        report = toric.disturbance_experiment(n, backend, geometry, seed, trials)
    except (ValueError, FileNotFoundError) as exc:
        return config, {"status": "error", "error": str(exc)}, None, EXIT_INPUT
    results = report.as_dict()
    elapsed = results.pop("elapsed")
    ok = report.passes(tol)
    results["expected_disturbance"] = toric.TWO_LOG_TWO
    results["status"] = "pass" if ok else "fail"
    return config, io.with_bits(results, NAT_KEYS), elapsed, EXIT_OK if ok else EXIT_NUMERIC


def _record(command, row, seed):
    config, results, elapsed, _ = row
    rec = io.make_record(command, config, results, seed)
    rec["provenance"]["elapsed"] = elapsed
    return rec


def cmd_toric(args):
    row = _toric_row(args.n, args.backend, args.geometry, args.seed, args.trials, args.tol)
    if row[3] == EXIT_INPUT:
        raise InputError(row[1]["error"])
    return [_record("toric", row, args.seed)], row[3]


def _sweep_task(task):
    return _toric_row(*task)


def cmd_sweep(args):
    sizes = parse_n_range(args.n)
    backends = [b.strip() for b in args.backends.split(",") if b.strip()]
    for b in backends:
        if b not in ("stabilizer", "dense"):
            raise InputError(f"unknown backend {b!r}")
    tasks = [(n, b, args.geometry, args.seed, args.trials, args.tol) for n in sizes for b in backends]
    if args.jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    records = [_record("sweep", row, args.seed) for row in rows]
    status = max((row[3] for row in rows), default=EXIT_OK)
    values = [row[1]["disturbance"] for row in rows if "disturbance" in row[1]]
    if values and max(values) - min(values) > 1e-9:
        status = max(status, EXIT_NUMERIC)
    return records, status


def _file_ensemble(args):
    sections = _load_sections(args.inputs)
    dim = sections[0].matrix.shape[0]
    if dim % args.k:
        raise InputError(f"dimension {dim} is not a multiple of k={args.k}")
    n = dim // args.k
    algebra = blockalg.BlockAlgebra((n,) * args.k)
    weighted = any(s.weight is not None for s in sections)
    weights = [s.weight if weighted else 1.0 / len(sections) for s in sections]
    try:
        members = [blockalg.BlockElement.from_dense(algebra, s.matrix) for s in sections]
        ens = blockalg.Ensemble(weights, members)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    bob = blockalg.identity_expectation(args.k, n)
    eve = blockalg.block_average_expectation(args.k, n)
    return ens, bob, eve, {"inputs": [str(p) for p in args.inputs], "k": args.k}


def cmd_privacy(args):
    """Privacy of an ensemble file (Bob: all blocks, Eve: block average) or of the toric ensemble."""
    if args.inputs:
        ens, bob, eve, config = _file_ensemble(args)
        value = blockalg.quantum_privacy(ens, bob, eve, tol=args.tol)
        results = {"privacy": value}
        status = EXIT_OK
    else:
        config = {"n": args.n, "backend": args.backend, "geometry": args.geometry}
        try:
            geom = lattice.load_geometry(args.geometry)
            region = lattice.build_region(args.n, geom)
            trans = toric.build_strings(region)
            rho0 = toric.ground_state_rdm(region, args.backend)
        except (ValueError, FileNotFoundError) as exc:
            raise InputError(str(exc)) from exc
        ens = toric.omega_decomposition(rho0, trans, check=False)
        if args.backend == "dense":
            hat = toric.HatInclusion(region, trans)
            bob = blockalg.identity_expectation(4, hat.expectation.block_dim)
            value = blockalg.quantum_privacy(ens, bob, hat.expectation, tol=args.tol)
        else:
            # Bob holds the whole ambient algebra, so privacy equals the disturbance.
            value = toric.coset_disturbance(ens).disturbance
        results = {"privacy": value, "expected_disturbance": toric.TWO_LOG_TWO}
        status = EXIT_OK if abs(value - toric.TWO_LOG_TWO) <= 1e-6 else EXIT_NUMERIC
    config["tol"] = args.tol
    return [io.make_record("privacy", config, io.with_bits(results, NAT_KEYS))], status


# -------------------------------------------------------------------- parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive(float), default=None,
                        help="numeric tolerance (command-specific default)")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("records", "csv"), default="records")

    parser = argparse.ArgumentParser(prog="subfactorlab",
                                     description="Entropic disturbance and index experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", parents=[common], help="entropy, relative entropy or Holevo chi")
    p.add_argument("inputs", nargs="+", help="density matrix files")
    p.set_defaults(func=cmd_entropy, default_tol=linalg.SUPPORT_TOL)

    p = sub.add_parser("index", parents=[common], help="Pimsner-Popa index of a block average")
    p.add_argument("--k", type=_positive(int), default=4, help="number of ambient blocks")
    p.add_argument("--dim", "--block-dim", dest="dim", type=_positive(int), default=2)
    p.add_argument("--power", type=_positive(int), default=1, help="tensor power")
    p.add_argument("--trials", type=_positive(int), default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_index, default_tol=1e-6)

    geometry_help = (f"geometry file or name (default {lattice.DEFAULT_GEOMETRY}; "
                     f"names are searched in ${lattice.GEOMETRY_ENV} first)")
    for name, func, helptext in (("toric", cmd_toric, "toric-code disturbance experiment"),
                                 ("sweep", cmd_sweep, "disturbance over region sizes and backends")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name == "toric":
            p.add_argument("--n", type=_positive(int), required=True)
            p.add_argument("--backend", choices=("stabilizer", "dense"), default="stabilizer")
        else:
            p.add_argument("--n", default="1..3", help='sizes as "1..3" or "1,2,3"')
            p.add_argument("--backends", "--backend", dest="backends", default="stabilizer",
                           help="comma-separated backends")
            p.add_argument("--jobs", type=_positive(int), default=1)
        p.add_argument("--geometry", default=None, help=geometry_help)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=_positive(int), default=1000,
                       help="random samples for the index estimate")
        p.set_defaults(func=func, default_tol=1e-6)

    p = sub.add_parser("privacy", parents=[common], help="quantum privacy of an ensemble")
    p.add_argument("inputs", nargs="*", help="ensemble files; omit for the toric ensemble")
    p.add_argument("--k", type=_positive(int), default=4, help="blocks in the file ensemble")
    p.add_argument("--n", type=_positive(int), default=1)
    p.add_argument("--backend", choices=("stabilizer", "dense"), default="stabilizer")
    p.add_argument("--geometry", default=None, help=geometry_help)
    p.set_defaults(func=cmd_privacy, default_tol=linalg.SUPPORT_TOL)
    return parser


def render(records, fmt):
    return io.dumps_csv(records) if fmt == "csv" else io.dumps_records(records)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.tol is None:
        args.tol = args.default_tol
    try:
        records, status = args.func(args)
    except (InputError, io.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = render(records, args.format) if records or args.format == "records" else ""
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for rec in records:
        res = rec["results"]
        if res.get("status") == "error":
            print(f"error: n={rec['config'].get('n')} {rec['config'].get('backend')}: {res['error']}",
                  file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
