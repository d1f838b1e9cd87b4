"""Floating-point search for DMS certificates, followed by rigorous checking.

The walk runs over log s only. For fixed s the best c is the positive
eigenvector of the homogeneous map c -> D(s, c) M S c. D depends on c only
weakly (through theta), so alternating "sample D, take the Perron vector of
D M S" converges in a few rounds; the objective is then one minus the
eigenvalue, i.e. the smallest relative slack min_j (c_j - (DMSc)_j)/c_j.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .branching import BranchingMatrix
from .dms import (
    MIN_LAMBDA,
    MIN_S,
    DmsCertificate,
    EnvelopeError,
    EnvelopeSpec,
    PreconditionError,
    Verdict,
    check_dms,
    f_enclosure,
    f_float,
    f_prime_enclosure,
    f_prime_float,
    theta,
)

log = logging.getLogger(__name__)

SAMPLES = 4096


@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    budget: int = 2000
    step_initial: float = 0.05
    step_min: float = 1e-3
    rationalize_denominator_cap: int = 10**6
    # stop early once the sampled slack reaches this margin
    target_slack: float = 5e-3
    s_floor: float = 1.021
    s_cap: float = 10.0
    inner_iters: int = 3

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if not (0 < self.step_min <= self.step_initial):
            raise ValueError("step scales must be positive and decreasing")


class SampledContraction:
    """Vectorised sampled estimate of (D M S c) for all types at once."""

    def __init__(self, M: BranchingMatrix, lam: float, samples: int = SAMPLES):
        self.M = M.array()
        self.delta = self.M.sum(axis=1)
        self.leaf = self.delta == 0
        d = np.maximum(self.delta, 1)
        a = np.linspace(1 / (1 + lam), 1.0, samples)[None, :]
        self.a = a
        self.one_minus_a = 1 - a
        self.R = ((1 - a) / (lam * a)) ** (1 / d[:, None])
        self.d = d

    def lhs(self, s: np.ndarray, c: np.ndarray) -> np.ndarray:
        arith = (self.M @ (c * s)) / self.d
        geo = np.exp((self.M @ np.log(c)) / self.d)
        f = self.one_minus_a * (arith[:, None] - geo[:, None] * self.R) / (s[:, None] - self.a)
        out = self.delta * f.max(axis=1)
        out[self.leaf] = 0.0
        return out

    def best_c(self, s: np.ndarray, c: np.ndarray, iters: int):
        """Alternate between sampling D for the current c and taking the
        Perron vector of the linear map D M S; returns (c, sampled slack)."""
        for _ in range(iters):
            msc = self.M @ (c * s)
            D = np.where(msc > 0, self.lhs(s, c) / np.maximum(msc, 1e-300), 0.0)
            w, V = np.linalg.eig(D[:, None] * self.M * s[None, :])
            k = int(np.argmax(w.real))
            v = np.abs(V[:, k].real)
            if not np.isfinite(v).all() or v.max() <= 0:
                break
            c = np.maximum(v / v.max(), 1e-9)
        return c, 1.0 - float(np.max(self.lhs(s, c) / c))


def _argmax_f(lam: float, s: float, th: float, delta: int) -> float:
    lo, hi = 1 / (1 + lam), 1.0
    a = np.linspace(lo, hi, SAMPLES)
    k = int(np.argmax(f_float(lam, s, th, delta, a)))
    lo, hi = a[max(k - 1, 0)], a[min(k + 1, SAMPLES - 1)]
    # the derivative is decreasing on the concave stretch; bisect its sign change
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f_prime_float(lam, s, th, delta, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _strict_up(x: Fraction, den: int) -> Fraction:
    return Fraction((x.numerator * den) // x.denominator + 1, den)


def _strict_down(x: Fraction, den: int) -> Fraction:
    return Fraction(-((-x.numerator * den) // x.denominator) - 1, den)


def fit_envelope(lam, s, th, delta: int, den: int = 10**6, half_width: float = 1e-4) -> EnvelopeSpec:
    """Envelope anchored around the argmax of f_j, with rational data checked to dominate."""
    lam, s = Fraction(lam), Fraction(s)
    left = float(1 / (1 + lam))
    peak = _argmax_f(float(lam), float(s), float(th.mid), delta)
    for h in (half_width, 4 * half_width, 16 * half_width, 64 * half_width):
        a_lo = Fraction(max(peak - h, left + h / 2)).limit_denominator(den)
        a_hi = Fraction(min(peak + h, 1 - h / 2)).limit_denominator(den)
        if not (1 / (1 + lam) < a_lo < a_hi < 1):
            continue
        d_lo = f_prime_enclosure(lam, s, th, delta, a_lo)
        d_hi = f_prime_enclosure(lam, s, th, delta, a_hi)
        if not (d_lo.lo > 0 and d_hi.hi < 0):
            continue
        f_lo = f_enclosure(lam, s, th, delta, a_lo)
        f_hi = f_enclosure(lam, s, th, delta, a_hi)
        return EnvelopeSpec(
            a_lo,
            a_hi,
            _strict_up(f_lo.hi, den),
            _strict_up(f_hi.hi, den),
            _strict_up(d_lo.hi * Fraction(101, 100), den),
            _strict_down(d_hi.lo * Fraction(101, 100), den),
        )
    raise EnvelopeError("could not place anchors on both sides of the maximum")


def fit_envelopes(M: BranchingMatrix, cert: DmsCertificate, den: int = 10**6) -> DmsCertificate:
    """Attach envelopes to every type where the concavity preconditions allow them
    and the maximum of f_j is interior."""
    envs = {}
    lam = cert.lambda_star
    for j in range(M.t):
        delta = sum(M.entries[j])
        if delta == 0 or lam <= MIN_LAMBDA or cert.s[j] <= MIN_S:
            continue
        th = theta(M, cert.c, cert.s, j)
        if not (th.lo > 0 and th.hi <= 1):
            continue
        try:
            envs[j] = fit_envelope(lam, cert.s[j], th, delta, den)
        except EnvelopeError:
            # maximum at an end of the domain; the checker's branch and bound handles it
            continue
    return DmsCertificate(lam, cert.s, cert.c, envs)


def rationalize(M: BranchingMatrix, lam, s: np.ndarray, c: np.ndarray, cfg: SearchConfig) -> DmsCertificate:
    den = cfg.rationalize_denominator_cap
    sq = [max(Fraction(float(x)).limit_denominator(den), MIN_S + Fraction(1, den)) for x in s]
    cq = [Fraction(float(x / c.max())).limit_denominator(10**12) for x in c]
    cq = [x if x > 0 else Fraction(1, 10**12) for x in cq]
    return fit_envelopes(M, DmsCertificate(Fraction(lam), sq, cq), den)


def search_parameters(M: BranchingMatrix, lam, cfg: SearchConfig = SearchConfig(),
                      init: Optional[DmsCertificate] = None):
    """Float phase only: returns (sampled slack, s, c)."""
    rng = np.random.default_rng(cfg.seed)
    t = M.t
    model = SampledContraction(M, float(lam))
    delta = model.delta
    if init is not None:
        s = np.array([float(x) for x in init.s])
        c = np.array([float(x) for x in init.c])
        c = c / c.max()
    else:
        s = np.maximum(1 + 1 / np.maximum(delta, 1), cfg.s_floor)
        c = np.ones(t)
    c, best = model.best_c(s, c, 8)
    scale = cfg.step_initial
    block = max(cfg.budget // 10, 1)
    cool_every = max(block // 4, 1)
    for it in range(cfg.budget):
        if best >= cfg.target_slack:
            break
        if it and it % block == 0:
            # restart the cooling schedule from the best point so far
            scale = cfg.step_initial
        mask = rng.random(t) < 0.3
        mask[rng.integers(t)] = True
        prop = s * np.exp(rng.normal(size=t) * scale * mask)
        prop = np.clip(prop, cfg.s_floor, cfg.s_cap)
        pc, val = model.best_c(prop, c.copy(), cfg.inner_iters)
        if val > best:
            best, s, c = val, prop, pc
        if (it + 1) % cool_every == 0:
            scale = max(scale * 0.7, cfg.step_min)
    log.debug("search at lambda=%s: sampled slack %.3g", lam, best)
    return best, s, c


def search_certificate(M: BranchingMatrix, lam, cfg: SearchConfig = SearchConfig(),
                       init: Optional[DmsCertificate] = None) -> Optional[DmsCertificate]:
    """Random-walk search; returns a certificate only if check_dms passes on it."""
    lam = Fraction(lam)
    best, s, c = search_parameters(M, lam, cfg, init)
    if best <= 0:
        return None
    try:
        cert = rationalize(M, lam, s, c, cfg)
        verdict = check_dms(M, cert)
    except (EnvelopeError, PreconditionError) as exc:
        log.debug("rigorous phase rejected the candidate: %s", exc)
        return None
    return cert if verdict.passed else None


def max_lambda(M: BranchingMatrix, lo, hi, tol, cfg: SearchConfig = SearchConfig()):
    """Largest grid point in [lo, hi] certified by search, by bisection.

    Returns (lambda, certificate), or (None, None) if even lo fails. The
    answer is a certified lower bound; monotonicity of search success in
    lambda is assumed, not proved.
    """
    lo, hi, tol = Fraction(lo), Fraction(hi), Fraction(tol)
    if lo >= hi:
        raise ValueError("need lo < hi")
    top = search_certificate(M, hi, cfg)
    if top is not None:
        return hi, top
    good = search_certificate(M, lo, cfg)
    if good is None:
        return None, None
    while hi - lo > tol:
        mid = (lo + hi) / 2
        cert = search_certificate(M, mid, cfg, init=good)
        if cert is not None:
            lo, good = mid, cert
        else:
            hi = mid
    return lo, good
