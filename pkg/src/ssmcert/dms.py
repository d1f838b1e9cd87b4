"""Rigorous verification of the DMS contraction condition.

For a type j with Delta_j children and parameters (s, c) the condition needs
an upper bound on

    D_jj = sup_{alpha in [1/(1+lam), 1]} f_j(alpha),
    f_j(alpha) = (1 - alpha) (1 - theta_j psi^(1/Delta_j)) / (s_j - alpha),
    psi = (1 - alpha) / (lam alpha),

and then checks (D M S c)_j < c_j exactly. Upper bounds come either from a
piecewise-linear envelope (valid because f_j is concave for the parameter
ranges enforced below) or, when no envelope is supplied, from a
branch-and-bound over alpha that uses only monotonicity.

Write f = u (1 - p) with u = (1 - alpha)/(s - alpha) and p = theta r,
r = psi^(1/Delta). Then u and r decrease in alpha, f decreases in p and

    f' = (1 - s)/(s - alpha)^2 + p [(s - 1)/(s - alpha)^2 + 1/(Delta alpha (s - alpha))]

increases in p, so enclosures of p give enclosures of f and f'.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .branching import BranchingMatrix
from .rational import DEFAULT_BITS, RationalInterval, format_rational, parse_rational, root_interval

MIN_S = Fraction(51, 50)
MIN_LAMBDA = Fraction(27, 16)


class DimensionError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class EnvelopeError(ValueError):
    pass


class ConcavityError(PreconditionError):
    pass


@dataclass(frozen=True)
class EnvelopeSpec:
    alpha_lo: Fraction
    alpha_hi: Fraction
    B_lo: Fraction
    B_hi: Fraction
    b_lo: Fraction
    b_hi: Fraction

    def __post_init__(self):
        for name in ("alpha_lo", "alpha_hi", "B_lo", "B_hi", "b_lo", "b_hi"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))


@dataclass(frozen=True)
class DmsCertificate:
    lambda_star: Fraction
    s: tuple
    c: tuple
    envelopes: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lambda_star", Fraction(self.lambda_star))
        object.__setattr__(self, "s", tuple(Fraction(x) for x in self.s))
        object.__setattr__(self, "c", tuple(Fraction(x) for x in self.c))
        object.__setattr__(self, "envelopes", dict(sorted(self.envelopes.items())))
        if self.lambda_star <= 0:
            raise ValueError("lambda must be positive")
        if any(x <= 1 for x in self.s):
            raise ValueError("every s_j must exceed 1")
        if any(x <= 0 for x in self.c):
            raise ValueError("every c_j must be positive")

    def scaled(self, k) -> "DmsCertificate":
        return DmsCertificate(self.lambda_star, self.s, tuple(x * Fraction(k) for x in self.c), self.envelopes)


@dataclass
class Verdict:
    passed: bool
    slack: list
    witness: Optional[str] = None
    D_hat: list = field(default_factory=list)
    methods: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


# ------------------------------------------------------------ enclosures


def theta(M: BranchingMatrix, c: Sequence, s: Sequence, j: int, bits: int = DEFAULT_BITS) -> RationalInterval:
    """Enclosure of theta_j = (prod c^M)^(1/Delta) / (sum c s M / Delta)."""
    row = M.entries[j]
    delta = sum(row)
    if delta == 0:
        raise ValueError(f"type {j} has no children; theta is undefined")
    prod = Fraction(1)
    mean = Fraction(0)
    for k, m in enumerate(row):
        if m:
            prod *= Fraction(c[k]) ** m
            mean += Fraction(c[k]) * Fraction(s[k]) * m
    mean /= delta
    return root_interval(prod, delta, bits) / mean


def _psi_root(lam: Fraction, delta: int, alpha: Fraction, bits: int) -> RationalInterval:
    return root_interval((1 - alpha) / (lam * alpha), delta, bits)


def f_enclosure(lam, s, th: RationalInterval, delta: int, alpha, bits: int = DEFAULT_BITS) -> RationalInterval:
    lam, s, alpha = Fraction(lam), Fraction(s), Fraction(alpha)
    u = (1 - alpha) / (s - alpha)
    r = _psi_root(lam, delta, alpha, bits)
    return RationalInterval(u * (1 - th.hi * r.hi), u * (1 - th.lo * r.lo))


def f_prime_enclosure(lam, s, th: RationalInterval, delta: int, alpha, bits: int = DEFAULT_BITS) -> RationalInterval:
    """Enclosure of f_j'(alpha) on the open interval (1/(1+lam), 1)."""
    lam, s, alpha = Fraction(lam), Fraction(s), Fraction(alpha)
    if not (1 / (1 + lam) < alpha < 1):
        raise ValueError("derivative enclosure needs alpha strictly inside (1/(1+lam), 1)")
    r = _psi_root(lam, delta, alpha, bits)
    a = (1 - s) / (s - alpha) ** 2
    b = (s - 1) / (s - alpha) ** 2 + 1 / (delta * alpha * (s - alpha))
    return RationalInterval(a + th.lo * r.lo * b, a + th.hi * r.hi * b)


def f_float(lam: float, s: float, th: float, delta: int, alpha):
    alpha = np.asarray(alpha, dtype=float)
    psi = np.clip((1 - alpha) / (lam * alpha), 0.0, None)
    return (1 - alpha) * (1 - th * psi ** (1.0 / delta)) / (s - alpha)


def f_prime_float(lam: float, s: float, th: float, delta: int, alpha):
    alpha = np.asarray(alpha, dtype=float)
    p = th * np.clip((1 - alpha) / (lam * alpha), 0.0, None) ** (1.0 / delta)
    return (1 - s) / (s - alpha) ** 2 + p * ((s - 1) / (s - alpha) ** 2 + 1 / (delta * alpha * (s - alpha)))


def sampled_max_f(lam, s, th, delta: int, n: int = 100_000) -> float:
    """Falsification oracle: max of f_j over n equally spaced points of the domain."""
    lam = float(lam)
    a = np.linspace(1 / (1 + lam), 1.0, n)
    return float(np.max(f_float(lam, float(s), float(th), delta, a)))


# ------------------------------------------------------------ D bounds


def check_envelope_preconditions(lam, s, th: RationalInterval) -> None:
    if not (th.lo > 0 and th.hi <= 1):
        raise PreconditionError(f"theta enclosure [{float(th.lo)}, {float(th.hi)}] not inside (0, 1]")
    if Fraction(s) <= MIN_S:
        raise PreconditionError(f"s = {Fraction(s)} must exceed 51/50 for envelope verification")
    if Fraction(lam) <= MIN_LAMBDA:
        raise PreconditionError(f"lambda = {Fraction(lam)} must exceed 27/16 for envelope verification")


def concavity_spot_check(lam, s, th: RationalInterval, delta: int, points: int = 1000) -> None:
    lam_f = float(lam)
    a = np.linspace(1 / (1 + lam_f), 1.0, points)
    f = f_float(lam_f, float(s), float(th.mid), delta, a)
    second = f[2:] - 2 * f[1:-1] + f[:-2]
    tol = 1e-9 * max(1.0, float(np.max(np.abs(f))))
    worst = int(np.argmax(second))
    if second[worst] > tol:
        raise ConcavityError(f"second difference {second[worst]:.3e} > 0 near alpha = {a[worst + 1]:.6f}")


def envelope_bound_D(lam, s, th: RationalInterval, delta: int, env: EnvelopeSpec, bits: int = DEFAULT_BITS) -> Fraction:
    """Maximum of the piecewise-linear envelope, after checking it dominates f_j."""
    lam, s = Fraction(lam), Fraction(s)
    check_envelope_preconditions(lam, s, th)
    left = 1 / (1 + lam)
    e = env
    if not (left < e.alpha_lo < e.alpha_hi < 1):
        raise EnvelopeError(f"anchors must satisfy {float(left)} < alpha_lo < alpha_hi < 1")
    if not (e.b_lo > 0 > e.b_hi):
        raise EnvelopeError("slopes must satisfy b_lo > 0 > b_hi")
    f_lo = f_enclosure(lam, s, th, delta, e.alpha_lo, bits)
    f_hi = f_enclosure(lam, s, th, delta, e.alpha_hi, bits)
    d_lo = f_prime_enclosure(lam, s, th, delta, e.alpha_lo, bits)
    d_hi = f_prime_enclosure(lam, s, th, delta, e.alpha_hi, bits)
    checks = [
        ("B_lo > f(alpha_lo)", e.B_lo > f_lo.hi, e.B_lo, f_lo.hi),
        ("B_hi > f(alpha_hi)", e.B_hi > f_hi.hi, e.B_hi, f_hi.hi),
        ("b_lo > f'(alpha_lo)", e.b_lo > d_lo.hi, e.b_lo, d_lo.hi),
        ("f'(alpha_lo) > 0", d_lo.lo > 0, d_lo.lo, 0),
        ("b_hi < f'(alpha_hi)", e.b_hi < d_hi.lo, e.b_hi, d_hi.lo),
        ("f'(alpha_hi) < 0", d_hi.hi < 0, d_hi.hi, 0),
    ]
    for name, ok, lhs, rhs in checks:
        if not ok:
            raise EnvelopeError(f"envelope check {name} failed: {float(lhs):.12g} vs {float(rhs):.12g}")
    best = max(e.B_lo, e.B_hi)
    x = (e.B_hi - e.B_lo + e.b_lo * e.alpha_lo - e.b_hi * e.alpha_hi) / (e.b_lo - e.b_hi)
    if e.alpha_lo < x < e.alpha_hi:
        best = max(best, e.B_lo + e.b_lo * (x - e.alpha_lo))
    return best


def bisection_bound_D(lam, s, th: RationalInterval, delta: int, target: Fraction,
                      budget: int = 200_000, bits: int = DEFAULT_BITS):
    """Branch and bound for sup f_j without any concavity assumption.

    On [a, b] we have f <= u(a) (1 - theta_lo r(b)) since u and r decrease.
    Returns (bound, None) with bound < target on success, or (None, reason)
    when a point with f >= target is found or the budget runs out.
    """
    lam, s = Fraction(lam), Fraction(s)
    if not (th.lo >= 0 and th.hi <= 1):
        raise PreconditionError("theta enclosure not inside [0, 1]")
    left = 1 / (1 + lam)
    u = lambda a: (1 - a) / (s - a)

    def upper(a, b):
        r = _psi_root(lam, delta, b, bits).lo
        return u(a) * (1 - th.lo * r)

    # a sup attained at a simple rational is found at once by probing near the float argmax
    grid = np.linspace(float(left), 1.0, 4096)
    peak = float(grid[int(np.argmax(f_float(float(lam), float(s), float(th.mid), delta, grid)))])
    for den in (10, 100, 1000, 10**6):
        m = Fraction(peak).limit_denominator(den)
        if left <= m <= 1:
            lower = f_enclosure(lam, s, th, delta, m, bits).lo
            if lower >= target:
                return None, f"f({m}) >= {float(lower):.12g} >= target {float(target):.12g}"

    heap = [(-upper(left, Fraction(1)), left, Fraction(1))]
    for _ in range(budget):
        neg, a, b = heapq.heappop(heap)
        if -neg < target:
            return -neg, None
        m = (a + b) / 2
        lower = f_enclosure(lam, s, th, delta, m, bits).lo
        if lower >= target:
            return None, f"f({float(m):.9f}) >= {float(lower):.12g} >= target {float(target):.12g}"
        heapq.heappush(heap, (-upper(a, m), a, m))
        heapq.heappush(heap, (-upper(m, b), m, b))
    return None, f"bisection budget exhausted with bound {float(-heap[0][0]):.12g} >= target {float(target):.12g}"


# ------------------------------------------------------------ the check


def check_dms(M: BranchingMatrix, cert: DmsCertificate, bits: int = DEFAULT_BITS,
              budget: int = 200_000, concavity_points: int = 1000) -> Verdict:
    t = M.t
    if len(cert.s) != t or len(cert.c) != t:
        raise DimensionError(f"certificate has {len(cert.s)} s and {len(cert.c)} c values for {t} types")
    if any(not 0 <= j < t for j in cert.envelopes):
        raise DimensionError("envelope for a nonexistent type")
    lam, s, c = cert.lambda_star, cert.s, cert.c
    msc = [sum(m * sk * ck for m, sk, ck in zip(row, s, c)) for row in M.entries]
    D_hat: list = []
    methods: list = []
    witness = None
    for j in range(t):
        delta = sum(M.entries[j])
        if delta == 0 or msc[j] == 0:
            D_hat.append(Fraction(0))
            methods.append("leaf")
            continue
        th = theta(M, c, s, j, bits)
        env = cert.envelopes.get(j)
        if env is not None:
            check_envelope_preconditions(lam, s[j], th)
            if concavity_points:
                concavity_spot_check(lam, s[j], th, delta, concavity_points)
            try:
                D_hat.append(envelope_bound_D(lam, s[j], th, delta, env, bits))
            except EnvelopeError as exc:
                D_hat.append(None)
                witness = witness or f"type {j}: {exc}"
            methods.append("envelope")
        else:
            bound, reason = bisection_bound_D(lam, s[j], th, delta, c[j] / msc[j], budget, bits)
            D_hat.append(bound)
            methods.append("bisection")
            if bound is None:
                witness = witness or f"type {j}: {reason}"
    slack = []
    for j in range(t):
        if D_hat[j] is None:
            slack.append(None)
            continue
        lhs = D_hat[j] * msc[j]
        slack.append(c[j] - lhs)
        if lhs >= c[j] and witness is None:
            witness = f"type {j}: (D M S c)_j = {float(lhs):.12g} >= c_j = {float(c[j]):.12g}"
    passed = witness is None and all(x is not None and x > 0 for x in slack)
    return Verdict(passed, slack, witness, D_hat, methods)


def falsify(M: BranchingMatrix, cert: DmsCertificate, verdict: Verdict, samples: int = 100_000,
            lam=None) -> list:
    """Sampled maxima of f_j that exceed D_hat_j (empty when none do).

    ``lam`` lets the sampling run at a smaller activity than the certificate's.
    """
    lam = cert.lambda_star if lam is None else Fraction(lam)
    bad = []
    for j in range(M.t):
        delta = sum(M.entries[j])
        if delta == 0 or verdict.D_hat[j] is None or verdict.methods[j] == "leaf":
            continue
        th = theta(M, cert.c, cert.s, j)
        m = sampled_max_f(lam, cert.s[j], th.mid, delta, samples)
        if m > float(verdict.D_hat[j]):
            bad.append((j, m, verdict.D_hat[j]))
    return bad


def single_type_threshold(delta: int) -> Fraction:
    return Fraction(delta**delta, (delta - 1) ** (delta + 1))


def solve_omega(delta: int, lam, width=Fraction(1, 10**12)) -> RationalInterval:
    """Bracket the unique omega > 0 with omega (1 + omega)^delta = lam."""
    lam = Fraction(lam)
    h = lambda w: w * (1 + w) ** delta
    lo, hi = Fraction(0), max(Fraction(1), lam)
    while hi - lo > width:
        mid = (lo + hi) / 2
        if h(mid) < lam:
            lo = mid
        else:
            hi = mid
    return RationalInterval(lo, hi)


def check_single_type(delta: int, lam) -> bool:
    """Contraction holds for the single-type matrix [delta] iff lam < delta^delta/(delta-1)^(delta+1)."""
    lam = Fraction(lam)
    crit = single_type_threshold(delta)
    closed = lam < crit
    om = solve_omega(delta, lam)
    edge = Fraction(1, delta - 1)
    # delta omega/(1 + omega) < 1  <=>  omega < 1/(delta - 1)
    if om.hi < edge:
        via_omega = True
    elif om.lo >= edge:
        via_omega = False
    else:
        via_omega = edge * (1 + edge) ** delta > lam
    if via_omega != closed:
        raise AssertionError(f"omega bracket disagrees with the closed form at delta={delta}, lambda={lam}")
    return closed


# ------------------------------------------------------------ file format


def write_certificate(cert: DmsCertificate, path) -> None:
    out = [f"cert lambda={format_rational(cert.lambda_star)}\n"]
    out.append("s: " + " ".join(format_rational(x) for x in cert.s) + "\n")
    out.append("c: " + " ".join(format_rational(x) for x in cert.c) + "\n")
    for j, e in cert.envelopes.items():
        out.append(
            f"env {j}: alo={format_rational(e.alpha_lo)} ahi={format_rational(e.alpha_hi)} "
            f"Blo={format_rational(e.B_lo)} Bhi={format_rational(e.B_hi)} "
            f"blo={format_rational(e.b_lo)} bhi={format_rational(e.b_hi)}\n"
        )
    Path(path).write_text("".join(out))


def read_certificate(path) -> DmsCertificate:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines[0].startswith("cert lambda="):
        raise ValueError("certificate must start with 'cert lambda=p/q'")
    lam = parse_rational(lines[0][len("cert lambda=") :])
    s = c = None
    envs = {}
    keys = {"alo": "alpha_lo", "ahi": "alpha_hi", "Blo": "B_lo", "Bhi": "B_hi", "blo": "b_lo", "bhi": "b_hi"}
    for ln in lines[1:]:
        if ln.startswith("s:"):
            s = [parse_rational(x) for x in ln[2:].split()]
        elif ln.startswith("c:"):
            c = [parse_rational(x) for x in ln[2:].split()]
        elif ln.startswith("env"):
            head, body = ln[3:].split(":", 1)
            fields = dict(kv.split("=", 1) for kv in body.split())
            envs[int(head)] = EnvelopeSpec(**{keys[k]: parse_rational(v) for k, v in fields.items()})
        else:
            raise ValueError(f"unexpected certificate line {ln!r}")
    if s is None or c is None:
        raise ValueError("certificate needs s: and c: lines")
    return DmsCertificate(lam, s, c, envs)
