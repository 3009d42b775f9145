"""Payoff evaluation and the closed-form optimal values.

All closed forms are written in terms of ``r = G ** -0.5`` with
``G = gamma ** (m - 2)`` computed in log space, so nothing overflows for long
protocols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .best_response import best_response, continue_everywhere
from .chain import absorption
from .errors import KnifeEdge, ShapeError
from .model import THETAS, shape


@dataclass(frozen=True)
class PayoffReport:
    u_receiver: float
    u_sender: float
    end_prob: dict
    prob_H: dict
    mu: dict

    def as_dict(self):
        return {
            "u_receiver": self.u_receiver,
            "u_sender": self.u_sender,
            "end_prob": dict(self.end_prob),
            "prob_H": dict(self.prob_H),
        }


def evaluate(env, proto, sigma=None, analyses=None):
    """Receiver and sender payoffs of the profile ``(proto, sigma)``.

    ``sigma`` defaults to the tie-stops best response. Mass that never ends
    pays zero to both players.
    """
    if sigma is None:
        sigma = best_response(env, proto)
    if analyses is None:
        analyses = {th: absorption(env, proto, sigma, th) for th in THETAS}
    a = proto.action
    prob_H = {th: float(analyses[th].mu @ a) for th in THETAS}
    end = {th: analyses[th].end_prob for th in THETAS}
    p = env.prior
    u_s = p * prob_H["H"] + (1 - p) * prob_H["L"]
    u_r = p * prob_H["H"] + (1 - p) * (end["L"] - prob_H["L"])
    return PayoffReport(u_r, u_s, end, prob_H, {th: analyses[th].mu for th in THETAS})


def log_power(env, m):
    """``log(gamma ** (m - 2))``."""
    return (m - 2) * math.log(env.gamma)


def interior(env, m):
    """True when learning beats acting on the prior; the boundary counts as prior."""
    return log_power(env, m) > math.log(env.kappa)


def _r(env, m):
    return math.exp(-0.5 * log_power(env, m))


@dataclass(frozen=True)
class OptimalValue:
    value: float
    regime: str  # "interior" or "prior"
    attained: bool


def receiver_optimal_value(env, m):
    """Supremum receiver payoff over all protocols with ``m`` states."""
    if m < 2:
        raise ValueError("m must be at least 2")
    p = env.prior
    if interior(env, m):
        r = _r(env, m)
        value = 1.0 - (2.0 * math.sqrt(p * (1 - p)) * r - r * r) / (1.0 - r * r)
        return OptimalValue(value, "interior", attained=m < 4)
    return OptimalValue(max(p, 1 - p), "prior", attained=True)


def sender_limit_value(env, m):
    """Limit sender payoff along any receiver-optimal sequence of parsimonious protocols."""
    if m < 2:
        raise ValueError("m must be at least 2")
    p = env.prior
    if interior(env, m):
        r = _r(env, m)
        return p + (2 * p - 1) * r * r / (1.0 - r * r)
    if p > 0.5:
        return 1.0
    if p < 0.5:
        return 0.0
    raise KnifeEdge("p = 1/2 with gamma^(m-2) <= kappa: any sender payoff in [0, 1] is attainable")


@dataclass(frozen=True)
class RelaxedSolution:
    alpha_star: float
    beta_star: float
    value: float
    binding: bool
    unique: bool

    def constraint_residual(self, env, m):
        G = math.exp(log_power(env, m))
        a, b = self.alpha_star, self.beta_star
        return abs(a * b - G * (1 - a) * (1 - b))


def solve_relaxed(env, m):
    """Closed-form solution of ``max p*alpha + (1-p)*beta`` subject to
    ``alpha*beta <= G*(1-alpha)*(1-beta)`` on the unit square."""
    if m < 2:
        raise ValueError("m must be at least 2")
    p = env.prior
    if interior(env, m):
        r = _r(env, m)
        den = 1.0 - r * r
        alpha = (1.0 - math.sqrt((1 - p) / p) * r) / den
        beta = (1.0 - math.sqrt(p / (1 - p)) * r) / den
        return RelaxedSolution(alpha, beta, p * alpha + (1 - p) * beta, True, True)
    if p >= 0.5:
        return RelaxedSolution(1.0, 0.0, p, True, p != 0.5)
    return RelaxedSolution(0.0, 1.0, 1 - p, True, True)


@dataclass(frozen=True)
class SpreadResult:
    lhs: float
    rhs: float
    ok: bool
    strict: bool | None  # None when strictness is not claimed (m < 4 or a zero mu)


def parsimonious_mu(env, proto, start=None):
    """Absorption probabilities ``{theta: (mu_lo, mu_hi)}`` of a parsimonious protocol
    under the continue-everywhere best response."""
    sh = shape(proto)
    if not sh.is_parsimonious:
        raise ShapeError("protocol is not parsimonious")
    sigma = continue_everywhere(proto)
    out = {}
    for th in THETAS:
        an = absorption(env, proto, sigma, th, start=start)
        out[th] = (an.mu_at(sh.lo_abs), an.mu_at(sh.hi_abs))
    return out


def spread_ratio(env, proto, slack=1e-10):
    """Compare ``mu_hi^H * mu_lo^L`` with ``gamma^(m-2) * mu_lo^H * mu_hi^L``."""
    mu = parsimonious_mu(env, proto)
    lo_H, hi_H = mu["H"]
    lo_L, hi_L = mu["L"]
    lhs = hi_H * lo_L
    G = math.exp(log_power(env, proto.m))
    rhs = G * lo_H * hi_L
    strict = None
    if proto.m >= 4 and min(lo_H, hi_H, lo_L, hi_L) > 0.0:
        strict = lhs < rhs
    return SpreadResult(lhs, rhs, lhs <= rhs + slack, strict)


def prior_payoff(env, a):
    """Receiver payoff when a constant action probability ``a`` is used regardless of play."""
    p = env.prior
    return p * a + (1 - p) * (1 - a)
