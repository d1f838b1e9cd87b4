"""Command-line front end: ``ssmcert <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import metadata, resources
from pathlib import Path
from typing import Optional

from .branching import generate_matrix, read_matrix, row_sums, verify_domination, write_matrix
from .dms import DimensionError, PreconditionError, check_dms, falsify, read_certificate, write_certificate
from .gibbs import BracketError, brute_force_partition, glauber_run, weitz_partition_estimate
from .ising import IsingCertificate, beta_star_from_rho, check_ising, perron_certificate
from .lattice import EMPTY_PINS, LatticeRegion, PinError, read_graph, read_pins, read_region
from .rational import format_rational, parse_rational
from .sawtree import Boundary, SizeGuardError, TruncationError, build_saw_tree, root_unoccupied_prob, ssm_probe
from .search import SearchConfig, max_lambda, search_certificate

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# (max_cycle, pruned, types reported in the literature, lambda*, shipped certificate)
LAMBDA_TABLE = [
    (4, False, 4, "1.8801", "n_1.8801.cert"),
    (4, True, 17, "2.1625", "m2_2.1625.cert"),
    (6, True, 132, "2.3335", "m3_2.30.cert"),
    (8, True, 922, "2.3882", "m4_2.25.cert"),
]
BETA_TABLE = [(2, "0.392190"), (3, "0.214247"), (4, "0.148045"), (5, "0.113347")]


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(x):
    if isinstance(x, Fraction):
        return format_rational(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class RunReport:
    command: str
    inputs: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = field(default_factory=_version)

    def add_input(self, path) -> None:
        data = Path(path).read_bytes()
        self.inputs[str(path)] = hashlib.sha256(data).hexdigest()

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True)


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


def data_path(name: str) -> Path:
    return Path(str(resources.files("ssmcert") / "data" / name))


def _load_graph(path, report: RunReport):
    """Region or generic graph, told apart by the header word."""
    report.add_input(path)
    head = Path(path).read_text().split(None, 1)
    if head and head[0] == "region":
        return read_region(path)
    if head and head[0] == "graph":
        return read_graph(path)
    raise UsageError(f"{path}: expected a 'region' or 'graph' file")


def _load_pins(path, report: RunReport):
    if path is None:
        return EMPTY_PINS
    report.add_input(path)
    return read_pins(path)


def _vertex(text: str, G):
    parts = text.replace(",", " ").split()
    try:
        v = tuple(int(x) for x in parts)
    except ValueError:
        raise UsageError(f"bad vertex {text!r}") from None
    if isinstance(G, LatticeRegion):
        if len(v) != 2:
            raise UsageError("region vertices are given as 'i,j'")
        return v
    if len(v) != 1:
        raise UsageError("graph vertices are single integers")
    return v[0]


# ------------------------------------------------------------ subcommands


def cmd_gen_matrix(args, report: RunReport) -> int:
    M = generate_matrix(args.max_cycle, args.prune)
    write_matrix(M, args.output)
    sums, top = row_sums(M)
    report.verdicts.update(types=M.t, max_row_sum=top)
    print(f"{M.t} types, max row sum {top}")
    if args.verify_depth:
        ok, walk = verify_domination(M, args.verify_depth)
        report.verdicts.update(dominates=ok, counterexample=walk)
        print(f"domination to depth {args.verify_depth}: {'ok' if ok else 'FAILED at ' + str(walk)}")
        return EXIT_PASS if ok else EXIT_FAIL
    return EXIT_PASS


def cmd_check_dms(args, report: RunReport) -> int:
    report.add_input(args.matrix)
    report.add_input(args.cert)
    M = read_matrix(args.matrix)
    cert = read_certificate(args.cert)
    v = check_dms(M, cert)
    report.verdicts.update(passed=v.passed, lambda_star=cert.lambda_star, slack=v.slack,
                           methods=v.methods, witness=v.witness)
    print(f"lambda* = {format_rational(cert.lambda_star)} ({float(cert.lambda_star):.6f}): "
          f"{'PASS' if v.passed else 'FAIL'}")
    for j, (sl, m) in enumerate(zip(v.slack, v.methods)):
        print(f"  type {j:4d} [{m}] slack {'n/a' if sl is None else f'{float(sl):.6g}'}")
    if v.witness:
        print(f"  witness: {v.witness}")
    if args.falsify_samples and v.passed:
        hits = falsify(M, cert, v, args.falsify_samples)
        report.verdicts["falsification_hits"] = hits
        print(f"  falsification with {args.falsify_samples} samples: {len(hits)} hits")
        if hits:
            return EXIT_FAIL
    return EXIT_PASS if v.passed else EXIT_FAIL


def _config(args) -> SearchConfig:
    return SearchConfig(seed=args.seed, budget=args.budget, target_slack=args.target_slack)


def cmd_search(args, report: RunReport) -> int:
    report.add_input(args.matrix)
    M = read_matrix(args.matrix)
    cert = search_certificate(M, args.lam, _config(args))
    report.verdicts.update(found=cert is not None, lambda_star=args.lam)
    if cert is None:
        print(f"no certificate found at lambda = {format_rational(args.lam)}")
        return EXIT_FAIL
    write_certificate(cert, args.output)
    print(f"certificate at lambda = {format_rational(args.lam)} written to {args.output}")
    return EXIT_PASS


def cmd_max_lambda(args, report: RunReport) -> int:
    report.add_input(args.matrix)
    M = read_matrix(args.matrix)
    lam, cert = max_lambda(M, args.lo, args.hi, args.tol, _config(args))
    report.verdicts.update(lambda_star=lam)
    if lam is None:
        print("no certificate even at the lower end")
        return EXIT_FAIL
    print(f"certified lambda* = {format_rational(lam)} ({float(lam):.6f})")
    if args.output:
        write_certificate(cert, args.output)
    return EXIT_PASS


def cmd_count(args, report: RunReport) -> int:
    G = _load_graph(args.region, report)
    if args.exact:
        Z = brute_force_partition(G, args.lam, max_vertices=10**6)
        report.verdicts.update(Z=Z)
        print(format_rational(Z) if Z.denominator != 1 else Z.numerator)
        return EXIT_PASS
    try:
        est = weitz_partition_estimate(G, args.lam, args.eps, depth=args.depth)
    except BracketError as exc:
        report.verdicts.update(error=str(exc))
        print(f"bracket too wide: {exc}")
        return EXIT_FAIL
    report.verdicts.update(log_Z=est.log_value, log_lower=est.log_lower, log_upper=est.log_upper,
                           relative_error_bound=est.relative_error_bound)
    print(f"log Z = {est.log_value:.12g} in [{est.log_lower:.12g}, {est.log_upper:.12g}], "
          f"relative error <= {est.relative_error_bound:.3g}")
    return EXIT_PASS


def cmd_sample(args, report: RunReport) -> int:
    G = _load_graph(args.region, report)
    pins = _load_pins(args.pins, report)
    res = glauber_run(G, args.lam, pins, args.steps, args.seed, args.burnin)
    report.verdicts.update(steps=res.state.step_count, violations=res.violations)
    out = open(args.output, "w", newline="") if args.output != "-" else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["i", "j", "frequency"])
        for lab, f in zip(res.labels, res.frequencies):
            i, j = lab if isinstance(lab, tuple) else (lab, "")
            w.writerow([i, j, f"{f:.8f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_PASS if res.violations == 0 else EXIT_FAIL


def cmd_saw_marginal(args, report: RunReport) -> int:
    G = _load_graph(args.graph, report)
    pins = _load_pins(args.pins, report)
    v = _vertex(args.root, G)
    T = build_saw_tree(G, v, args.depth, pins)
    p = root_unoccupied_prob(T, args.lam, Boundary(args.boundary))
    report.verdicts.update(unoccupied=p, tree_size=T.size())
    print(f"Pr[root unoccupied] = {format_rational(p)} ~ {float(p):.12g} (tree size {T.size()})")
    return EXIT_PASS


def cmd_probe_ssm(args, report: RunReport) -> int:
    gaps = ssm_probe(args.lmax, args.lam, args.method)
    report.verdicts.update(gaps={L: float(g) for L, g in gaps})
    w = csv.writer(sys.stdout)
    w.writerow(["L", "gap"])
    for L, g in gaps:
        w.writerow([L, f"{float(g):.12g}"])
    return EXIT_PASS


def read_ising_certificate(path) -> IsingCertificate:
    tb = c = None
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if ln.startswith("ising tanh="):
            tb = parse_rational(ln[len("ising tanh="):])
        elif ln.startswith("c:"):
            c = [parse_rational(x) for x in ln[2:].split()]
        elif ln:
            raise ValueError(f"unexpected Ising certificate line {ln!r}")
    if tb is None or c is None:
        raise ValueError("Ising certificate needs 'ising tanh=p/q' and 'c:' lines")
    return IsingCertificate(tb, c)


def write_ising_certificate(cert: IsingCertificate, path) -> None:
    Path(path).write_text(f"ising tanh={format_rational(cert.tanh_beta_star)}\n"
                          "c: " + " ".join(format_rational(x) for x in cert.c) + "\n")


def cmd_ising_check(args, report: RunReport) -> int:
    report.add_input(args.matrix)
    M = read_matrix(args.matrix)
    if args.cert:
        report.add_input(args.cert)
        c = read_ising_certificate(args.cert).c
    else:
        c = perron_certificate(M, args.iters)[1]
    v = check_ising(M, IsingCertificate(args.tanh, c))
    report.verdicts.update(passed=v.passed, beta_star_lo=v.beta_star.lo, beta_star_hi=v.beta_star.hi,
                           witness=v.witness)
    print(f"tanh beta* = {format_rational(args.tanh)}: {'PASS' if v.passed else 'FAIL'}; "
          f"beta* in [{float(v.beta_star.lo):.10f}, {float(v.beta_star.hi):.10f}]")
    if v.witness:
        print(f"  witness: {v.witness}")
    return EXIT_PASS if v.passed else EXIT_FAIL


def cmd_ising_beta_star(args, report: RunReport) -> int:
    report.add_input(args.matrix)
    M = read_matrix(args.matrix)
    rho, _ = perron_certificate(M, args.iters)
    if rho <= 1:
        print(f"rho_hat = {float(rho):.6g}: every beta < infinity is certified")
        report.verdicts.update(rho_hat=rho)
        return EXIT_PASS
    b = beta_star_from_rho(rho)
    report.verdicts.update(rho_hat=rho, beta_star_lo=b.lo, beta_star_hi=b.hi)
    print(f"rho_hat = {float(rho):.10f}; beta* in [{float(b.lo):.10f}, {float(b.hi):.10f}]")
    return EXIT_PASS


def _lambda_rows(args, report: RunReport):
    cfg = _config(args)
    rows = []
    for k, pruned, lit_types, lit_lam, name in LAMBDA_TABLE:
        M = generate_matrix(k, pruned)
        lam = None
        if args.search:
            lam, _ = max_lambda(M, Fraction(21, 10) if pruned else Fraction(17, 10), parse_rational(lit_lam),
                                Fraction(1, 1000), cfg)
        else:
            path = data_path(name)
            if path.exists():
                report.add_input(path)
                cert = read_certificate(path)
                if cert.s and len(cert.s) == M.t and check_dms(M, cert).passed:
                    lam = cert.lambda_star
        rows.append((k, pruned, M.t, lit_types, lam, lit_lam))
    return rows


def cmd_reproduce_table(args, report: RunReport) -> int:
    if args.which == "lambda":
        rows = _lambda_rows(args, report)
        print("max_cycle,occupation_effect,types,types_reported,lambda_certified,lambda_reported")
        for k, pruned, t, lt, lam, ll in rows:
            shown = f"{float(lam):.4f}" if lam is not None else "none"
            print(f"{k},{'yes' if pruned else 'no'},{t},{lt},{shown},{ll}")
        report.verdicts["rows"] = [list(r) for r in rows]
        return EXIT_PASS if all(r[4] is not None for r in rows) else EXIT_FAIL
    print("dimension,matrix,beta_certified,beta_reported")
    out = []
    for pruned in (False, True):
        M = generate_matrix(8, pruned)
        rho, _ = perron_certificate(M)
        b = beta_star_from_rho(rho)
        label = "pruned-8" if pruned else "unpruned-8"
        print(f"2,{label},{float(b.lo):.6f},{BETA_TABLE[0][1]}")
        out.append((label, b.lo))
    for d, val in BETA_TABLE[1:]:
        print(f"{d},none,n/a,{val}")
    report.verdicts["rows"] = out
    return EXIT_PASS


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssmcert", description="Spatial-mixing certificates and lattice counting.")
    p.add_argument("--version", action="version", version=_version())
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--json", action="store_true", help="emit a JSON run report on stdout")
        sp.set_defaults(fn=fn)
        return sp

    def search_opts(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--budget", type=int, default=1500)
        sp.add_argument("--target-slack", type=float, default=1e-4)

    sp = add("gen-matrix", cmd_gen_matrix, "generate a branching matrix")
    sp.add_argument("--max-cycle", type=int, required=True, choices=(4, 6, 8, 10, 12))
    sp.add_argument("--prune", action="store_true")
    sp.add_argument("--verify-depth", type=int, default=0, help="also check domination to this depth")
    sp.add_argument("-o", "--output", required=True)

    sp = add("check-dms", cmd_check_dms, "check a DMS certificate exactly")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--cert", required=True)
    sp.add_argument("--falsify-samples", type=int, default=0)

    sp = add("search", cmd_search, "search for a DMS certificate")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)
    search_opts(sp)
    sp.add_argument("-o", "--output", required=True)

    sp = add("max-lambda", cmd_max_lambda, "bisect for the largest certified lambda")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--lo", type=_rational, required=True)
    sp.add_argument("--hi", type=_rational, required=True)
    sp.add_argument("--tol", type=_rational, required=True)
    search_opts(sp)
    sp.add_argument("-o", "--output")

    sp = add("count", cmd_count, "partition function of a region")
    sp.add_argument("--region", required=True)
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)
    sp.add_argument("--eps", type=float, default=1e-6)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--exact", action="store_true")

    sp = add("sample", cmd_sample, "Glauber dynamics occupation frequencies")
    sp.add_argument("--region", required=True)
    sp.add_argument("--pins")
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--burnin", type=int, default=0)
    sp.add_argument("-o", "--output", default="-")

    sp = add("saw-marginal", cmd_saw_marginal, "root marginal from the SAW tree")
    sp.add_argument("--graph", required=True, help="region or graph file")
    sp.add_argument("--root", required=True, help="'v' for graphs, 'i,j' for regions")
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)
    sp.add_argument("--pins")
    sp.add_argument("--depth", type=int)
    sp.add_argument("--boundary", choices=[b.value for b in Boundary], default="free")

    sp = add("probe-ssm", cmd_probe_ssm, "even/odd boundary gaps on growing boxes")
    sp.add_argument("--lmax", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)
    sp.add_argument("--method", choices=("transfer", "saw", "brute"), default="transfer")

    sp = add("ising-check", cmd_ising_check, "check tanh(beta*) M c < c")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--tanh", type=_rational, required=True)
    sp.add_argument("--cert")
    sp.add_argument("--iters", type=int, default=500)

    sp = add("ising-beta-star", cmd_ising_beta_star, "certified beta* from a Perron bound")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--iters", type=int, default=500)

    sp = add("reproduce-table", cmd_reproduce_table, "lambda* or beta* table")
    sp.add_argument("--which", choices=("lambda", "beta"), default="lambda")
    sp.add_argument("--search", action="store_true", help="re-run the search instead of re-checking shipped certificates")
    search_opts(sp)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    report = RunReport(args.command)
    start = time.perf_counter()
    try:
        if args.json:
            # keep stdout a single JSON document
            real, sys.stdout = sys.stdout, sys.stderr
            try:
                code = args.fn(args, report)
            finally:
                sys.stdout = real
        else:
            code = args.fn(args, report)
    except (UsageError, PreconditionError, DimensionError, PinError, SizeGuardError, TruncationError,
            ValueError, OSError) as exc:
        print(f"ssmcert {args.command}: {exc}", file=sys.stderr)
        report.verdicts["error"] = str(exc)
        code = EXIT_USAGE
    report.wall_time = time.perf_counter() - start
    report.verdicts["exit_code"] = code
    if args.json:
        print(report.to_json())
    return code


if __name__ == "__main__":
    sys.exit(main())
