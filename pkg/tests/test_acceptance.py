"""End-to-end acceptance checks, one per criterion, each printing a PASS/FAIL line."""
import math
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from ssmcert.branching import BranchingMatrix, generate_matrix, row_sums
from ssmcert.cli import data_path
from ssmcert.dms import DmsCertificate, check_dms, check_single_type, falsify, read_certificate, single_type_threshold
from ssmcert.gibbs import brute_force_partition, exact_occupation, glauber_run, weitz_partition_estimate
from ssmcert.ising import IsingCertificate, beta_star_from_rho, check_ising, perron_certificate
from ssmcert.lattice import GenericGraph, LatticeRegion, Pin, PinSet
from ssmcert.rational import parse_rational
from ssmcert.sawtree import brute_force_marginal, saw_marginal, ssm_probe
from ssmcert.search import SearchConfig, fit_envelopes, search_certificate

N_ENTRIES = ((0, 4, 0, 0), (0, 1, 2, 0), (0, 1, 1, 1), (0, 1, 1, 0))
S = [parse_rational(x) for x in "1.040 1.388 1.353 1.255".split()]
C = [parse_rational(x) for x in "0.266037 0.100891 0.100115 0.0973861".split()]
# search budget used for every searched certificate: 1500 outer steps, 3 inner eigen-solves each
SEARCH_CFG = SearchConfig(seed=0, budget=1500, target_slack=1e-4)

# certificates accepted by criteria 3 and 5, re-examined by criterion 11
ACCEPTED: dict = {}


def report(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}")


def square(k: int) -> LatticeRegion:
    return LatticeRegion(tuple((i, j) for i in range(k) for j in range(k)))


def test_criterion_01_matrix_reproduction(capsys):
    t0 = time.perf_counter()
    M = generate_matrix(4, False)
    dt = time.perf_counter() - t0
    sums, _ = row_sums(M)
    ok = M.entries == N_ENTRIES and sums == [4, 3, 3, 2] and dt < 1
    report(capsys, 1, ok, f"entries {M.entries}, row sums {sums}, {dt:.3f}s")
    assert ok


def test_criterion_02_type_counts(capsys):
    t0 = time.perf_counter()
    counts = [generate_matrix(k, True).t for k in (4, 6, 8)]
    dt = time.perf_counter() - t0
    ok = counts == [17, 132, 922] and dt < 60
    report(capsys, 2, ok, f"pruned type counts {counts} vs [17, 132, 922], {dt:.1f}s")
    assert ok


def test_criterion_03_published_certificate(capsys):
    t0 = time.perf_counter()
    N = generate_matrix(4, False)
    cert = fit_envelopes(N, DmsCertificate(Fraction(18801, 10000), S, C))
    good = check_dms(N, cert)
    bad = check_dms(N, DmsCertificate(3, S, C))
    dt = time.perf_counter() - t0
    ok = good.passed and not bad.passed and dt < 10
    if good.passed:
        ACCEPTED["published N at 1.8801"] = (N, cert, good)
    slack = min(float(x) for x in good.slack) if good.passed else float("nan")
    report(capsys, 3, ok, f"pass at 18801/10000 (min slack {slack:.2e}), fail at 3: {not bad.passed}, {dt:.2f}s")
    assert ok


def test_criterion_04_tree_threshold(capsys):
    bad = []
    for delta in range(2, 11):
        crit = single_type_threshold(delta)
        below = crit * (1 - Fraction(1, 10**6))
        above = crit * (1 + Fraction(1, 10**6))
        if not check_single_type(delta, below) or check_single_type(delta, above):
            bad.append(delta)
    exact = single_type_threshold(3) == Fraction(27, 16) and not check_single_type(3, Fraction(27, 16))
    ok = not bad and exact
    report(capsys, 4, ok, f"mismatches at delta {bad or 'none'}; delta=3 boundary 27/16: {exact}")
    assert ok


@pytest.mark.slow
def test_criterion_05_searched_certificates(capsys):
    t0 = time.perf_counter()
    M2 = generate_matrix(4, True)
    N = generate_matrix(4, False)
    c_m2 = search_certificate(M2, Fraction("2.1625"), SEARCH_CFG)
    c_n = search_certificate(N, Fraction(18801, 10000), SEARCH_CFG)
    dt = time.perf_counter() - t0
    found = []
    for name, M, cert in (("M2 at 2.1625", M2, c_m2), ("N at 1.8801", N, c_n)):
        if cert is not None:
            v = check_dms(M, cert)
            if v.passed:
                ACCEPTED[name] = (M, cert, v)
                found.append(name)
    # stretch targets: re-check the shipped certificates for the larger pruned matrices
    stretch = []
    for k, target, name in ((6, 2.3335, "m3_2.30.cert"), (8, 2.3882, "m4_2.25.cert")):
        path = data_path(name)
        if path.exists():
            M = generate_matrix(k, True)
            cert = read_certificate(path)
            v = check_dms(M, cert)
            if v.passed:
                ACCEPTED[f"{M.t}-type at {float(cert.lambda_star)}"] = (M, cert, v)
            stretch.append(f"{M.t} types: {float(cert.lambda_star)} certified={v.passed} "
                           f"(target {target}, gap {target - float(cert.lambda_star):.4f})")
    ok = c_m2 is not None and c_n is not None and len(found) == 2 and dt < 1800
    report(capsys, 5, ok, f"required: {found}, {dt:.0f}s, budget {SEARCH_CFG.budget} steps; "
                          f"stretch (reported only): {'; '.join(stretch) or 'none'}")
    assert ok


def test_criterion_06_saw_exactness(capsys):
    rng = random.Random(20240601)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        n = rng.randint(1, 12)
        p = rng.uniform(0.1, 0.35)
        edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
        order = [[] for _ in range(n)]
        for a, b in edges:
            order[a].append(b)
            order[b].append(a)
        for o in order:
            rng.shuffle(o)
        g = GenericGraph.from_edges(n, edges, order)
        v = rng.randrange(n)
        pins = {}
        for u in range(n):
            r = rng.random()
            if u == v or r > 0.4:
                continue
            if r < 0.2 and not any(pins.get(w) is Pin.OCCUPIED for w in g.neighbors(u)):
                pins[u] = Pin.OCCUPIED
            else:
                pins[u] = Pin.UNOCCUPIED
        lam = rng.choice([Fraction(1, 2), Fraction(1), Fraction(2)])
        if saw_marginal(g, v, lam, PinSet(pins)) != brute_force_marginal(g, v, lam, PinSet(pins)):
            mismatches += 1
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 120
    report(capsys, 6, ok, f"{mismatches} mismatches over 200 random pinned graphs, {dt:.1f}s")
    assert ok


def test_criterion_07_counting(capsys):
    t0 = time.perf_counter()
    lines, ok = [], True
    for k in (3, 4):
        G = square(k)
        Z = brute_force_partition(G, 1)
        est = weitz_partition_estimate(G, 1, 1e-6)
        inside = est.log_lower - 1e-12 <= math.log(Z) <= est.log_upper + 1e-12
        ok &= inside and est.log_width <= 1e-6
        lines.append(f"{k}x{k}: Z={Z}, bracket width {est.log_width:.1e}, contains: {inside}")
    dt = time.perf_counter() - t0
    ok &= dt < 60
    report(capsys, 7, ok, "; ".join(lines) + f", {dt:.2f}s")
    assert ok


@pytest.mark.slow
def test_criterion_08_ssm_decay(capsys):
    t0 = time.perf_counter()
    gaps = [g for _, g in ssm_probe(8, Fraction(9, 5))]
    dt = time.perf_counter() - t0
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    ratio = gaps[7] / gaps[3]
    ok = decreasing and ratio < Fraction(1, 4) and dt < 300
    shown = ", ".join(f"{float(g):.4f}" for g in gaps)
    report(capsys, 8, ok, f"gaps [{shown}], strictly decreasing: {decreasing}, "
                          f"gap8/gap4 = {float(ratio):.4f} (needs < 0.25), {dt:.0f}s")
    assert ok


def test_criterion_09_glauber(capsys):
    t0 = time.perf_counter()
    G = square(4)
    res = glauber_run(G, 1, steps=10**7, seed=2024, burnin=10**4)
    dt = time.perf_counter() - t0
    exact = exact_occupation(G, 1)
    z = (res.frequencies - exact) / res.standard_errors
    ok = bool(np.all(np.abs(z) < 3)) and res.violations == 0 and dt < 60
    report(capsys, 9, ok, f"max |z| = {np.max(np.abs(z)):.2f} over 16 sites, "
                          f"{res.violations} invariant violations, {dt:.1f}s")
    assert ok


def test_criterion_10_ising(capsys):
    t0 = time.perf_counter()
    M3 = BranchingMatrix([[3]])
    third = Fraction(1, 3)
    edge_ok = (check_ising(M3, IsingCertificate(third - Fraction(1, 1000), [1])).passed
               and not check_ising(M3, IsingCertificate(third + Fraction(1, 1000), [1])).passed)
    atanh = float(check_ising(M3, IsingCertificate(third, [1])).beta_star.mid)
    results = {}
    for pruned in (True, False):
        M = generate_matrix(8, pruned)
        rho, c = perron_certificate(M)
        tb = (1 / rho) * (1 - Fraction(1, 10**9))
        passed = check_ising(M, IsingCertificate(tb, c)).passed
        results["pruned" if pruned else "unpruned"] = (float(beta_star_from_rho(rho).lo), passed)
    dt = time.perf_counter() - t0
    target = 0.392190
    meets = {k: b >= 0.3921 and ok for k, (b, ok) in results.items()}
    close = {k: abs(b - target) <= 1e-3 for k, (b, _) in results.items()}
    ok = (edge_ok and abs(atanh - 0.34657) < 1e-5 and dt < 120
          and any(meets[k] and close[k] for k in results))
    shown = ", ".join(f"{k}: beta*={b:.5f}" for k, (b, _) in results.items())
    report(capsys, 10, ok, f"[3] boundary ok: {edge_ok} (atanh(1/3)={atanh:.5f}); {shown}; "
                           f">= 0.3921: {meets}; within 1e-3 of {target}: {close}; {dt:.1f}s")
    assert ok


def test_criterion_11_falsification(capsys):
    t0 = time.perf_counter()
    if not ACCEPTED:
        N = generate_matrix(4, False)
        cert = fit_envelopes(N, DmsCertificate(Fraction(18801, 10000), S, C))
        ACCEPTED["published N at 1.8801"] = (N, cert, check_dms(N, cert))
    hits = {name: falsify(M, cert, v, 100_000) for name, (M, cert, v) in ACCEPTED.items()}
    dt = time.perf_counter() - t0
    ok = all(not h for h in hits.values()) and dt < 120
    report(capsys, 11, ok, f"{len(hits)} certificates sampled at 1e5 points: "
                           f"{ {k: len(h) for k, h in hits.items()} } hits, {dt:.1f}s")
    assert ok
