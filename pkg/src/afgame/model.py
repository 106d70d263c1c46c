"""Game constants, cost matrices, truncated-Gaussian priors, and quadrature.

All expectations over a player's prior are taken against a truncated
Gaussian on [lo, hi]; expectations over an untruncated standard normal use
Gauss-Hermite nodes.  Both are realized by fixed-node rules so that every
downstream quantity is deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr

__all__ = [
    "GameParams",
    "TruncGaussPrior",
    "QuadratureRule",
    "cost_matrices",
    "trunc_gauss_pdf",
    "score_mu",
    "score_rho",
    "expect_over_prior",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _phi(u):
    return np.exp(-0.5 * np.square(u)) / _SQRT_2PI


@dataclass(frozen=True)
class GameParams:
    """Public model constants of the two-player game.

    qA, qB : tracking-cost weights (> 0)
    rA, rB : control-effort weights (> 0)
    sigmaA, sigmaB : noise intensities (> 0)
    mA, mB : true coupling parameters
    T : horizon (> 0)
    x0 : deterministic initial state (default zero start; the state is
         then purely noise-driven)
    """

    qA: float = 1.0
    qB: float = 1.0
    rA: float = 1.0
    rB: float = 1.0
    sigmaA: float = 0.1
    sigmaB: float = 0.1
    mA: float = 1.0
    mB: float = 1.0
    T: float = 1.0
    x0: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("rA", "rB", "T"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        # zero q / sigma admit the degenerate sanity cases (decoupled
        # tracking, noiseless residuals); negative values never make sense
        for name in ("qA", "qB", "sigmaA", "sigmaB"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if len(self.x0) != 2:
            raise ValueError("x0 must be a 2-vector")

    @property
    def sigma(self) -> np.ndarray:
        """Diffusion matrix diag(sigmaA, sigmaB)."""
        return np.diag([self.sigmaA, self.sigmaB])


@dataclass(frozen=True)
class TruncGaussPrior:
    """Truncated Gaussian N(mu, rho^2) restricted to [lo, hi]."""

    mu: float = 1.0
    rho: float = 0.1
    lo: float = -5.0
    hi: float = 5.0

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError("rho must be strictly positive")
        if not self.lo < self.hi:
            raise ValueError("lo must be strictly below hi")

    @property
    def normalizer(self) -> float:
        """Phi((hi-mu)/rho) - Phi((lo-mu)/rho)."""
        return float(ndtr((self.hi - self.mu) / self.rho) - ndtr((self.lo - self.mu) / self.rho))


@dataclass(frozen=True)
class QuadratureRule:
    """Fixed nodes/weights; kind is 'bounded-interval' or 'unbounded-gaussian'.

    For 'bounded-interval' the weights are plain Gauss-Legendre weights on
    the integration interval (they sum to its length) and the truncated
    density is applied by :func:`expect_over_prior`.  For
    'unbounded-gaussian' the nodes are standard-normal abscissae and the
    weights sum to 1.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.nodes.shape != self.weights.shape or self.nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if self.nodes.size < 2:
            raise ValueError("need at least 2 nodes")
        if self.kind not in ("bounded-interval", "unbounded-gaussian"):
            raise ValueError(f"unknown rule kind {self.kind!r}")

    @classmethod
    def for_prior(cls, prior: TruncGaussPrior, n: int = 64, span: float = 10.0) -> "QuadratureRule":
        """Gauss-Legendre rule on the prior's mass interval.

        The interval is [mu - span*rho, mu + span*rho] clipped to [lo, hi];
        outside it the density is below the double-precision floor for the
        span default, so the rule integrates the truncated density to 1 at
        full accuracy even for very small rho.
        """
        a = max(prior.lo, prior.mu - span * prior.rho)
        b = min(prior.hi, prior.mu + span * prior.rho)
        x, w = leggauss(n)
        return cls(0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w, "bounded-interval")

    @classmethod
    def standard_normal(cls, n: int = 32) -> "QuadratureRule":
        """Gauss-Hermite rule for E[f(Z)], Z ~ N(0,1)."""
        x, w = hermgauss(n)
        return cls(math.sqrt(2.0) * x, w / math.sqrt(math.pi), "unbounded-gaussian")


def cost_matrices(params: GameParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return (QA, QB, RA, RB) for the quadratic running costs.

    QA = qA * [[1, -mA], [-mA, mA^2]], QB = qB * [[mB^2, -mB], [-mB, 1]],
    RA = diag(1/rA, 0), RB = diag(0, 1/rB).
    """
    mA, mB = params.mA, params.mB
    QA = params.qA * np.array([[1.0, -mA], [-mA, mA * mA]])
    QB = params.qB * np.array([[mB * mB, -mB], [-mB, 1.0]])
    RA = np.diag([1.0 / params.rA, 0.0])
    RB = np.diag([0.0, 1.0 / params.rB])
    return QA, QB, RA, RB


def trunc_gauss_pdf(m, prior: TruncGaussPrior):
    """Density of the truncated Gaussian; zero outside [lo, hi]."""
    m = np.asarray(m, dtype=float)
    z = (m - prior.mu) / prior.rho
    dens = _phi(z) / (prior.rho * prior.normalizer)
    out = np.where((m >= prior.lo) & (m <= prior.hi), dens, 0.0)
    return out if out.ndim else float(out)


def _check_support(m, prior: TruncGaussPrior):
    m = np.asarray(m, dtype=float)
    if np.any(m < prior.lo) or np.any(m > prior.hi):
        raise ValueError("m outside the prior support")
    return m


def score_mu(m, prior: TruncGaussPrior):
    """d/d(mu) of the log truncated-Gaussian density at m.

    (m-mu)/rho^2 plus the boundary correction
    (phi(beta)-phi(alpha)) / (rho*(Phi(beta)-Phi(alpha))) with
    alpha=(lo-mu)/rho, beta=(hi-mu)/rho.
    """
    m = _check_support(m, prior)
    al = (prior.lo - prior.mu) / prior.rho
    be = (prior.hi - prior.mu) / prior.rho
    corr = (_phi(be) - _phi(al)) / (prior.rho * prior.normalizer)
    out = (m - prior.mu) / prior.rho**2 + corr
    return out if out.ndim else float(out)


def score_rho(m, prior: TruncGaussPrior):
    """d/d(rho) of the log truncated-Gaussian density at m.

    (m-mu)^2/rho^3 - 1/rho plus the boundary correction
    (beta*phi(beta) - alpha*phi(alpha)) / (rho*(Phi(beta)-Phi(alpha))).
    """
    m = _check_support(m, prior)
    al = (prior.lo - prior.mu) / prior.rho
    be = (prior.hi - prior.mu) / prior.rho
    corr = (be * _phi(be) - al * _phi(al)) / (prior.rho * prior.normalizer)
    out = np.square(m - prior.mu) / prior.rho**3 - 1.0 / prior.rho + corr
    return out if out.ndim else float(out)


def expect_over_prior(f, prior: TruncGaussPrior | None, rule: QuadratureRule):
    """Fixed-node approximation of E[f(M)] under the rule's measure.

    For a 'bounded-interval' rule the integrand is weighted by the
    truncated density of `prior`; for 'unbounded-gaussian' the rule's
    weights already carry the standard-normal measure and `prior` is
    ignored.  `f` may return scalars or arrays (applied entrywise).
    """
    vals = np.asarray([np.asarray(f(float(m)), dtype=float) for m in rule.nodes])
    if rule.kind == "bounded-interval":
        if prior is None:
            raise ValueError("bounded-interval rule needs a prior")
        w = rule.weights * trunc_gauss_pdf(rule.nodes, prior)
    else:
        w = rule.weights
    out = np.tensordot(w, vals, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def prior_weights(prior: TruncGaussPrior, rule: QuadratureRule) -> np.ndarray:
    """Density-weighted quadrature weights for a bounded-interval rule."""
    if rule.kind != "bounded-interval":
        raise ValueError("prior_weights applies to bounded-interval rules")
    return rule.weights * trunc_gauss_pdf(rule.nodes, prior)
