"""Exponential-family models on enumerated countable data spaces.

Every model here represents the joint law of n i.i.d. observations reduced to
its sufficient statistic, written in the form

    log p_n(x | theta) = log h(x) + eta(theta)' T(x) - A(eta(theta)),

with a finite (possibly truncated-and-renormalized) enumeration of the
statistic values.  The per-observation Fisher information is recovered from
the natural-parameter curvature as

    J1(theta) = (1/n) * Deta(theta)' A''(eta(theta)) Deta(theta),

which is what the quantization geometry consumes.

Shipped families: binomial counts with a Beta prior (three interchangeable
parameterizations: mean, logit, arcsin-sqrt), multinomial counts with a
Dirichlet prior, and a tail-truncated Poisson sum with a Gamma prior.  Priors
are always specified on the per-observation mean scale, so marginals are
parameterization independent.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats as sps

from .errors import (
    DomainError,
    InvariantViolation,
    MarginalError,
    UnsupportedDimensionError,
)

__all__ = [
    "DataSpace",
    "PriorSpec",
    "ExponentialFamily",
    "BinomialModel",
    "MultinomialModel",
    "TruncatedPoissonModel",
    "binomial_model",
    "multinomial_model",
    "truncated_poisson_model",
    "MarginalTable",
    "marginal_table",
    "MleResult",
    "mle",
    "mle_from_stat",
    "fisher_info",
    "loglik_hess",
    "FisherMetric",
    "adaptive_gauss_legendre",
    "EPS_CLAMP",
    "EPS_TRUNC",
]

EPS_CLAMP = 1e-6   # interior clamp distance, per-observation mean coordinates
EPS_TRUNC = 1e-10  # admissible truncated tail mass under the prior predictive


# ---------------------------------------------------------------------------
# data space


@dataclass(frozen=True)
class DataSpace:
    """Enumerated sufficient-statistic values with their base measure.

    keys
        Hashable per-point identifiers (an int count, or a tuple of counts).
    stats
        Array of shape (m, d): T(x) for each point.
    log_base
        Array of shape (m,): log h(x) for each point.
    truncation_mass
        Prior-predictive mass excluded by tail truncation (0 for complete
        spaces).
    """

    keys: tuple
    stats: np.ndarray
    log_base: np.ndarray
    truncation_mass: float = 0.0

    def __post_init__(self):
        stats = np.asarray(self.stats, dtype=float)
        if stats.ndim != 2 or stats.shape[0] != len(self.keys):
            raise InvariantViolation("stats must be (m, d) aligned with keys")
        log_base = np.asarray(self.log_base, dtype=float)
        if log_base.shape != (len(self.keys),):
            raise InvariantViolation("log_base must be (m,) aligned with keys")
        if len(set(self.keys)) != len(self.keys):
            raise InvariantViolation("data-space keys must be distinct")
        object.__setattr__(self, "stats", stats)
        object.__setattr__(self, "log_base", log_base)
        object.__setattr__(
            self, "_index", {k: i for i, k in enumerate(self.keys)}
        )

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def dim(self) -> int:
        return self.stats.shape[1]

    def index_of(self, key) -> int:
        try:
            return self._index[key]
        except KeyError:
            raise DomainError(f"data point {key!r} not in enumerated space")


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class PriorSpec:
    """Prior over the per-observation mean coordinates.

    family is one of "beta", "dirichlet", "gamma"; params are the usual
    positive hyperparameters (Gamma uses shape, rate).
    """

    family: str
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(a) for a in self.params))
        if self.family not in ("beta", "dirichlet", "gamma"):
            raise DomainError(f"unknown prior family {self.family!r}")
        if any(not np.isfinite(a) or a <= 0 for a in self.params):
            raise DomainError("prior hyperparameters must be positive finite")
        arity = {"beta": 2, "gamma": 2}.get(self.family)
        if arity is not None and len(self.params) != arity:
            raise DomainError(
                f"{self.family} prior takes {arity} hyperparameters"
            )
        if self.family == "dirichlet" and len(self.params) < 2:
            raise DomainError("dirichlet prior needs >= 2 hyperparameters")

    def log_pdf(self, mean_point: np.ndarray) -> float:
        """Log density at a point in per-observation mean coordinates."""
        m = np.atleast_1d(np.asarray(mean_point, dtype=float))
        if self.family == "beta":
            a, b = self.params
            p = m[0]
            if not 0.0 < p < 1.0:
                return -np.inf
            return float(
                (a - 1) * np.log(p) + (b - 1) * np.log1p(-p)
                - special.betaln(a, b)
            )
        if self.family == "gamma":
            a, b = self.params
            lam = m[0]
            if lam <= 0.0:
                return -np.inf
            return float(
                a * np.log(b) - special.gammaln(a)
                + (a - 1) * np.log(lam) - b * lam
            )
        alpha = np.asarray(self.params)
        p_free = m
        p_last = 1.0 - p_free.sum()
        if np.any(p_free <= 0.0) or p_last <= 0.0:
            return -np.inf
        full = np.concatenate([p_free, [p_last]])
        return float(
            np.dot(alpha - 1.0, np.log(full))
            + special.gammaln(alpha.sum()) - special.gammaln(alpha).sum()
        )


# ---------------------------------------------------------------------------
# families


class ExponentialFamily(ABC):
    """Joint model of n i.i.d. observations in sufficient-statistic form.

    Subclasses fix the maps between three coordinate systems: the exposed
    parameter theta, the natural parameter eta, and the (full-data)
    mean-value parameter mu = E_theta[T].  Per-observation mean coordinates
    (mu / n, the scale priors live on) are exposed separately because they
    stay comparable across sample sizes.
    """

    name: str
    family: str
    param: str
    dim_theta: int
    dim_stat: int
    sample_size: int
    supports_moment_match: bool = True

    # --- coordinate maps -------------------------------------------------

    @abstractmethod
    def natural_map(self, theta: np.ndarray) -> np.ndarray:
        """eta(theta), shape (d,)."""

    @abstractmethod
    def natural_jacobian(self, theta: np.ndarray) -> np.ndarray:
        """Deta(theta), shape (d, p)."""

    def natural_hessian(self, theta: np.ndarray) -> Optional[np.ndarray]:
        """Second derivative tensor of eta, shape (d, p, p), or None."""
        return None

    @abstractmethod
    def theta_from_natural(self, eta: np.ndarray) -> np.ndarray:
        """Inverse of natural_map (full-rank families)."""

    @abstractmethod
    def theta_from_mean(self, mean: np.ndarray) -> np.ndarray:
        """Parameter matching full-data mean mu (closed form or near-inverse)."""

    @abstractmethod
    def obs_mean_from_theta(self, theta: np.ndarray) -> np.ndarray:
        """Per-observation mean coordinates of theta."""

    @abstractmethod
    def theta_from_obs_mean(self, mean: np.ndarray) -> np.ndarray:
        """Inverse of obs_mean_from_theta."""

    # --- log-partition ---------------------------------------------------

    @abstractmethod
    def log_partition(self, eta: np.ndarray) -> float:
        """A(eta)."""

    @abstractmethod
    def log_partition_grad(self, eta: np.ndarray) -> np.ndarray:
        """grad A(eta) = E[T], shape (d,)."""

    @abstractmethod
    def log_partition_hess(self, eta: np.ndarray) -> np.ndarray:
        """hess A(eta) = Cov[T], shape (d, d); symmetric PSD."""

    # --- support ---------------------------------------------------------

    @abstractmethod
    def suff_stat(self, key) -> np.ndarray:
        """T(x) for a point key, shape (d,)."""

    @abstractmethod
    def log_base(self, key) -> float:
        """log h(x) for a point key."""

    @abstractmethod
    def default_space(self) -> DataSpace:
        """The enumerated statistic space this model is defined on."""

    # --- domain ----------------------------------------------------------

    @abstractmethod
    def is_interior(self, theta: np.ndarray) -> bool:
        """True when theta lies strictly inside the parameter region."""

    @abstractmethod
    def clamp_mean(self, mean: np.ndarray, eps: float = EPS_CLAMP):
        """Project mu into the interior of the mean domain.

        Returns (clamped_mean, changed).  eps is measured in per-observation
        mean coordinates.
        """

    # --- derived ---------------------------------------------------------

    def mean_from_theta(self, theta: np.ndarray) -> np.ndarray:
        return self.log_partition_grad(self.natural_map(theta))

    def log_pmf(self, theta: np.ndarray, space: DataSpace) -> np.ndarray:
        """log p_n(x | theta) over the whole space, shape (m,)."""
        eta = self.natural_map(theta)
        a = self.log_partition(eta)
        return space.log_base + space.stats @ eta - a

    def log_pmf_stats(
        self, theta: np.ndarray, stats: np.ndarray, log_base: np.ndarray
    ) -> np.ndarray:
        eta = self.natural_map(theta)
        a = self.log_partition(eta)
        return np.asarray(log_base) + np.asarray(stats) @ eta - a

    def descriptor(self) -> dict:
        """JSON-serializable description sufficient to rebuild the model."""
        return {
            "family": self.family,
            "param": self.param,
            "sample_size": self.sample_size,
        }


def _as1d(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


class BinomialModel(ExponentialFamily):
    """n Bernoulli trials summarized by the success count s in {0..n}.

    param selects the exposed coordinate:
      * "mean":   theta = p, the success probability;
      * "logit":  theta = log(p/(1-p)), the natural parameter itself;
      * "arcsin": theta = arcsin(sqrt(p)), variance-stabilizing coordinates
        with constant Fisher information 4.  This variant deliberately opts
        out of moment matching so the generic stationarity solver gets
        exercised on a nonlinear reparameterization.
    """

    family = "binomial"
    dim_theta = 1
    dim_stat = 1

    def __init__(self, sample_size: int, param: str = "mean"):
        if sample_size < 1:
            raise DomainError("sample_size must be >= 1")
        if param not in ("mean", "logit", "arcsin"):
            raise DomainError(f"unknown binomial parameterization {param!r}")
        self.sample_size = int(sample_size)
        self.param = param
        self.name = f"binomial(n={sample_size}, param={param})"
        self.supports_moment_match = param != "arcsin"

    # coordinate maps

    def _p_of(self, theta: np.ndarray) -> float:
        t = float(_as1d(theta)[0])
        if self.param == "mean":
            return t
        if self.param == "logit":
            return float(special.expit(t))
        return math.sin(t) ** 2

    def natural_map(self, theta):
        t = float(_as1d(theta)[0])
        if self.param == "logit":
            return np.array([t])
        if self.param == "mean":
            return np.array([math.log(t) - math.log1p(-t)])
        # arcsin: eta = 2 log tan(theta)
        return np.array([2.0 * (math.log(math.sin(t)) - math.log(math.cos(t)))])

    def natural_jacobian(self, theta):
        t = float(_as1d(theta)[0])
        if self.param == "logit":
            return np.array([[1.0]])
        if self.param == "mean":
            return np.array([[1.0 / (t * (1.0 - t))]])
        return np.array([[4.0 / math.sin(2.0 * t)]])

    def natural_hessian(self, theta):
        t = float(_as1d(theta)[0])
        if self.param == "logit":
            return np.zeros((1, 1, 1))
        if self.param == "mean":
            v = t * (1.0 - t)
            return np.array([[[(2.0 * t - 1.0) / (v * v)]]])
        s2 = math.sin(2.0 * t)
        return np.array([[[-8.0 * math.cos(2.0 * t) / (s2 * s2)]]])

    def theta_from_natural(self, eta):
        e = float(_as1d(eta)[0])
        p = float(special.expit(e))
        return self.theta_from_obs_mean(np.array([p]))

    def theta_from_mean(self, mean):
        p = float(_as1d(mean)[0]) / self.sample_size
        return self.theta_from_obs_mean(np.array([p]))

    def obs_mean_from_theta(self, theta):
        return np.array([self._p_of(theta)])

    def theta_from_obs_mean(self, mean):
        p = float(_as1d(mean)[0])
        if self.param == "mean":
            return np.array([p])
        if self.param == "logit":
            return np.array([math.log(p) - math.log1p(-p)])
        return np.array([math.asin(math.sqrt(p))])

    # log-partition

    def log_partition(self, eta):
        e = float(_as1d(eta)[0])
        return self.sample_size * float(np.logaddexp(0.0, e))

    def log_partition_grad(self, eta):
        e = float(_as1d(eta)[0])
        return np.array([self.sample_size * float(special.expit(e))])

    def log_partition_hess(self, eta):
        e = float(_as1d(eta)[0])
        s = float(special.expit(e))
        return np.array([[self.sample_size * s * (1.0 - s)]])

    # support

    def suff_stat(self, key):
        return np.array([float(key)])

    def log_base(self, key):
        n, s = self.sample_size, int(key)
        return float(
            special.gammaln(n + 1) - special.gammaln(s + 1)
            - special.gammaln(n - s + 1)
        )

    def default_space(self):
        n = self.sample_size
        s = np.arange(n + 1)
        log_base = (
            special.gammaln(n + 1) - special.gammaln(s + 1)
            - special.gammaln(n - s + 1)
        )
        return DataSpace(
            keys=tuple(int(v) for v in s),
            stats=s.astype(float)[:, None],
            log_base=log_base,
        )

    # domain

    def is_interior(self, theta):
        t = float(_as1d(theta)[0])
        if not np.isfinite(t):
            return False
        if self.param == "mean":
            return 0.0 < t < 1.0
        if self.param == "logit":
            return True
        return 0.0 < t < 0.5 * math.pi

    def clamp_mean(self, mean, eps=EPS_CLAMP):
        n = self.sample_size
        p = float(_as1d(mean)[0]) / n
        clipped = min(max(p, eps), 1.0 - eps)
        return np.array([n * clipped]), clipped != p


class MultinomialModel(ExponentialFamily):
    """n draws over K categories; statistic = first K-1 counts.

    theta = (p_1 .. p_{K-1}), the free per-observation cell probabilities;
    the last category is the reference.  eta_i = log(p_i / p_K).
    """

    family = "multinomial"
    param = "mean"

    def __init__(self, num_categories: int, sample_size: int):
        if num_categories < 2:
            raise DomainError("need at least 2 categories")
        if sample_size < 1:
            raise DomainError("sample_size must be >= 1")
        self.num_categories = int(num_categories)
        self.sample_size = int(sample_size)
        self.dim_theta = num_categories - 1
        self.dim_stat = num_categories - 1
        self.name = f"multinomial(K={num_categories}, n={sample_size})"

    def _full_p(self, theta):
        p = _as1d(theta)
        return np.concatenate([p, [1.0 - p.sum()]])

    def natural_map(self, theta):
        full = self._full_p(theta)
        return np.log(full[:-1]) - math.log(full[-1])

    def natural_jacobian(self, theta):
        full = self._full_p(theta)
        return np.diag(1.0 / full[:-1]) + 1.0 / full[-1]

    def natural_hessian(self, theta):
        full = self._full_p(theta)
        d = self.dim_stat
        hess = np.full((d, d, d), 1.0 / full[-1] ** 2)
        for i in range(d):
            hess[i, i, i] -= 1.0 / full[i] ** 2
        return hess

    def theta_from_natural(self, eta):
        e = _as1d(eta)
        z = np.concatenate([e, [0.0]])
        z -= special.logsumexp(z)
        return np.exp(z)[:-1]

    def theta_from_mean(self, mean):
        return _as1d(mean) / self.sample_size

    def obs_mean_from_theta(self, theta):
        return _as1d(theta).copy()

    def theta_from_obs_mean(self, mean):
        return _as1d(mean).copy()

    def log_partition(self, eta):
        z = np.concatenate([[0.0], _as1d(eta)])
        return self.sample_size * float(special.logsumexp(z))

    def log_partition_grad(self, eta):
        e = _as1d(eta)
        z = np.concatenate([[0.0], e])
        w = np.exp(z - special.logsumexp(z))
        return self.sample_size * w[1:]

    def log_partition_hess(self, eta):
        e = _as1d(eta)
        z = np.concatenate([[0.0], e])
        w = np.exp(z - special.logsumexp(z))[1:]
        return self.sample_size * (np.diag(w) - np.outer(w, w))

    def suff_stat(self, key):
        return np.asarray(key[:-1], dtype=float)

    def log_base(self, key):
        counts = np.asarray(key)
        return float(
            special.gammaln(self.sample_size + 1)
            - special.gammaln(counts + 1).sum()
        )

    def default_space(self):
        keys = []

        def build(prefix, remaining, slots):
            if slots == 1:
                keys.append(tuple(prefix + [remaining]))
                return
            for c in range(remaining + 1):
                build(prefix + [c], remaining - c, slots - 1)

        build([], self.sample_size, self.num_categories)
        stats = np.array([k[:-1] for k in keys], dtype=float)
        log_base = np.array([self.log_base(k) for k in keys])
        return DataSpace(keys=tuple(keys), stats=stats, log_base=log_base)

    def is_interior(self, theta):
        p = _as1d(theta)
        if not np.all(np.isfinite(p)):
            return False
        return bool(np.all(p > 0.0) and p.sum() < 1.0)

    def clamp_mean(self, mean, eps=EPS_CLAMP):
        n = self.sample_size
        p_free = _as1d(mean) / n
        full = np.concatenate([p_free, [1.0 - p_free.sum()]])
        if np.all(full >= eps):
            return np.asarray(mean, dtype=float).copy(), False
        full = np.maximum(full, eps)
        full = full / full.sum()
        return n * full[:-1], True

    def descriptor(self):
        d = super().descriptor()
        d["num_categories"] = self.num_categories
        return d


class TruncatedPoissonModel(ExponentialFamily):
    """Sum of n i.i.d. Poisson counts, tail-truncated under the prior.

    The statistic s = sum x_i follows Poisson(n*lambda).  The support is cut
    at the smallest M whose prior-predictive (negative binomial) tail mass is
    below eps_trunc, and the log-partition is summed over that finite support
    so the model normalizes exactly on its declared space.  theta = lambda.
    """

    family = "poisson"
    param = "mean"
    dim_theta = 1
    dim_stat = 1

    def __init__(
        self,
        sample_size: int,
        prior: PriorSpec,
        eps_trunc: float = EPS_TRUNC,
    ):
        if sample_size < 1:
            raise DomainError("sample_size must be >= 1")
        if prior.family != "gamma":
            raise DomainError("truncated Poisson model requires a gamma prior")
        self.sample_size = int(sample_size)
        self.eps_trunc = float(eps_trunc)
        self.prior = prior
        a, b = prior.params
        # prior predictive of s: NB with a successes, success prob b/(b+n)
        psucc = b / (b + sample_size)
        cut = int(sps.nbinom.isf(eps_trunc, a, psucc))
        while sps.nbinom.sf(cut, a, psucc) > eps_trunc:
            cut += 1
        self.s_max = cut
        s = np.arange(cut + 1)
        self._log_base_arr = s * math.log(sample_size) - special.gammaln(s + 1)
        self._stats_arr = s.astype(float)
        self._space = DataSpace(
            keys=tuple(int(v) for v in s),
            stats=self._stats_arr[:, None],
            log_base=self._log_base_arr,
            truncation_mass=float(sps.nbinom.sf(cut, a, psucc)),
        )
        self.name = f"truncated_poisson(n={sample_size}, s_max={cut})"

    def natural_map(self, theta):
        lam = float(_as1d(theta)[0])
        return np.array([math.log(lam)])

    def natural_jacobian(self, theta):
        lam = float(_as1d(theta)[0])
        return np.array([[1.0 / lam]])

    def natural_hessian(self, theta):
        lam = float(_as1d(theta)[0])
        return np.array([[[-1.0 / (lam * lam)]]])

    def theta_from_natural(self, eta):
        return np.array([math.exp(float(_as1d(eta)[0]))])

    def theta_from_mean(self, mean):
        # untruncated inverse; off by O(eps_trunc), fine for starts and MLEs
        return np.array([float(_as1d(mean)[0]) / self.sample_size])

    def obs_mean_from_theta(self, theta):
        return np.array([float(_as1d(theta)[0])])

    def theta_from_obs_mean(self, mean):
        return np.array([float(_as1d(mean)[0])])

    def _log_terms(self, eta):
        return self._log_base_arr + self._stats_arr * float(_as1d(eta)[0])

    def log_partition(self, eta):
        return float(special.logsumexp(self._log_terms(eta)))

    def log_partition_grad(self, eta):
        t = self._log_terms(eta)
        w = np.exp(t - special.logsumexp(t))
        return np.array([float(w @ self._stats_arr)])

    def log_partition_hess(self, eta):
        t = self._log_terms(eta)
        w = np.exp(t - special.logsumexp(t))
        m1 = float(w @ self._stats_arr)
        m2 = float(w @ self._stats_arr**2)
        return np.array([[m2 - m1 * m1]])

    def suff_stat(self, key):
        return np.array([float(key)])

    def log_base(self, key):
        s = int(key)
        return float(s * math.log(self.sample_size) - special.gammaln(s + 1))

    def default_space(self):
        return self._space

    def is_interior(self, theta):
        lam = float(_as1d(theta)[0])
        return np.isfinite(lam) and lam > 0.0

    def clamp_mean(self, mean, eps=EPS_CLAMP):
        n = self.sample_size
        lo = n * eps
        hi = self.s_max - n * eps
        mu = float(_as1d(mean)[0])
        clipped = min(max(mu, lo), hi)
        return np.array([clipped]), clipped != mu

    def descriptor(self):
        d = super().descriptor()
        d["eps_trunc"] = self.eps_trunc
        return d


def binomial_model(sample_size: int, param: str = "mean") -> BinomialModel:
    return BinomialModel(sample_size, param=param)


def multinomial_model(num_categories: int, sample_size: int) -> MultinomialModel:
    return MultinomialModel(num_categories, sample_size)


def truncated_poisson_model(
    sample_size: int, prior: PriorSpec, eps_trunc: float = EPS_TRUNC
) -> TruncatedPoissonModel:
    return TruncatedPoissonModel(sample_size, prior, eps_trunc=eps_trunc)


# ---------------------------------------------------------------------------
# marginals


@dataclass(frozen=True)
class MarginalTable:
    """Prior-predictive marginal r(x) over an enumerated space.

    log_r is renormalized so sum_x r(x) = 1 on the (possibly truncated)
    space; raw_mass records the pre-normalization total as a diagnostic.
    """

    space: DataSpace
    log_r: np.ndarray
    raw_mass: float

    def __post_init__(self):
        log_r = np.asarray(self.log_r, dtype=float)
        if log_r.shape != (len(self.space),):
            raise InvariantViolation("log_r must align with the space")
        if not np.all(np.isfinite(log_r)):
            raise InvariantViolation("marginal has zero or non-finite entries")
        object.__setattr__(self, "log_r", log_r)
        object.__setattr__(self, "_r", np.exp(log_r))

    @property
    def r(self) -> np.ndarray:
        return self._r

    @property
    def total_mass(self) -> float:
        return float(self._r.sum())


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def adaptive_gauss_legendre(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    max_depth: int = 48,
) -> float:
    """Gauss-Legendre panels refined by bisection until stable.

    f must accept a node array and return values elementwise.  The refinement
    criterion compares a panel against its two halves relative to the running
    global scale, so negligible-mass tails terminate quickly.
    """

    def panel(lo, hi):
        half = 0.5 * (hi - lo)
        x = half * _GL_NODES + 0.5 * (hi + lo)
        return half * float(np.dot(_GL_WEIGHTS, f(x)))

    root = panel(a, b)
    scale = abs(root) + 1e-300

    def recurse(lo, hi, whole, depth):
        mid = 0.5 * (lo + hi)
        left = panel(lo, mid)
        right = panel(mid, hi)
        if depth >= max_depth or abs(left + right - whole) <= rel_tol * max(
            scale, abs(left + right)
        ):
            return left + right
        return recurse(lo, mid, left, depth + 1) + recurse(
            mid, hi, right, depth + 1
        )

    return recurse(a, b, root, 0)


def _adaptive_gl_vec(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    max_depth: int = 48,
) -> np.ndarray:
    """Vector-valued adaptive_gauss_legendre.

    f maps a node array (k,) to values (k, m).  All m components share one
    panel tree, refined until every component is stable, so per-node work
    can be batched across them.
    """

    def panel(lo, hi):
        half = 0.5 * (hi - lo)
        x = half * _GL_NODES + 0.5 * (hi + lo)
        return half * (_GL_WEIGHTS @ f(x))

    root = panel(a, b)
    scale = np.abs(root) + 1e-300

    def recurse(lo, hi, whole, depth):
        mid = 0.5 * (lo + hi)
        left = panel(lo, mid)
        right = panel(mid, hi)
        total = left + right
        if depth >= max_depth or np.all(
            np.abs(total - whole) <= rel_tol * np.maximum(scale, np.abs(total))
        ):
            return total
        return recurse(lo, mid, left, depth + 1) + recurse(
            mid, hi, right, depth + 1
        )

    return recurse(a, b, root, 0)


def _closed_form_log_marginal(
    model: ExponentialFamily, prior: PriorSpec, space: DataSpace
) -> Optional[np.ndarray]:
    if model.family == "binomial" and prior.family == "beta":
        a, b = prior.params
        n = model.sample_size
        s = space.stats[:, 0]
        return (
            space.log_base
            + special.betaln(s + a, n - s + b)
            - special.betaln(a, b)
        )
    if model.family == "multinomial" and prior.family == "dirichlet":
        alpha = np.asarray(prior.params)
        if len(alpha) != model.num_categories:
            raise DomainError(
                "dirichlet prior arity must equal the category count"
            )
        n = model.sample_size
        counts = np.array([k for k in space.keys], dtype=float)
        return (
            space.log_base
            + special.gammaln(alpha.sum())
            - special.gammaln(alpha).sum()
            + special.gammaln(counts + alpha).sum(axis=1)
            - special.gammaln(alpha.sum() + n)
        )
    if model.family == "poisson" and prior.family == "gamma":
        a, b = prior.params
        n = model.sample_size
        s = space.stats[:, 0]
        return (
            special.gammaln(a + s)
            - special.gammaln(a)
            - special.gammaln(s + 1)
            + a * (math.log(b) - math.log(b + n))
            + s * (math.log(n) - math.log(b + n))
        )
    return None


def _quadrature_log_marginal(
    model: ExponentialFamily, prior: PriorSpec, space: DataSpace
) -> np.ndarray:
    """Integrate likelihood x prior over per-observation mean coordinates."""

    def like(i: int, grid: np.ndarray) -> np.ndarray:
        out = np.empty_like(grid)
        stats = space.stats[i]
        lb = space.log_base[i]
        for j, m in enumerate(grid):
            theta = model.theta_from_obs_mean(np.atleast_1d(m))
            out[j] = math.exp(
                float(model.log_pmf_stats(theta, stats, lb))
                + prior.log_pdf(np.atleast_1d(m))
            )
        return out

    if prior.family == "beta":
        bounds = (0.0, 1.0)
    elif prior.family == "gamma":
        a, b = prior.params
        bounds = (0.0, float(sps.gamma.isf(1e-13, a, scale=1.0 / b)))
    elif prior.family == "dirichlet":
        if model.dim_stat != 2:
            raise UnsupportedDimensionError(
                "quadrature marginal implemented for 2 free coordinates only"
            )
        return _simplex_quadrature_log_marginal(model, prior, space)
    else:  # pragma: no cover - PriorSpec already validates
        raise DomainError(f"no quadrature rule for prior {prior.family!r}")

    log_r = np.empty(len(space))
    for i in range(len(space)):
        val = adaptive_gauss_legendre(
            lambda g, i=i: like(i, g), bounds[0], bounds[1], rel_tol=1e-10
        )
        if not np.isfinite(val) or val <= 0.0:
            raise MarginalError(
                f"quadrature marginal failed at point {space.keys[i]!r}",
                key=space.keys[i],
            )
        log_r[i] = math.log(val)
    return log_r


def _smoothstep(t: float) -> float:
    return t * t * (3.0 - 2.0 * t)


def _simplex_quadrature_log_marginal(model, prior, space) -> np.ndarray:
    """Integrate over the simplex mapped to the unit square.

    Uses p1 = S(t), p2 = (1 - p1) S(s) with the cubic smoothstep S; its
    vanishing endpoint derivative soaks up the algebraic edge singularities
    of Dirichlet densities that otherwise force deep bisection chains.  Each
    node evaluates the whole space at once so the panel tree is shared.
    """
    m = len(space)

    def masses(p1: float, p2: float) -> np.ndarray:
        if 1.0 - p1 - p2 <= 0.0:
            return np.zeros(m)
        mean = np.array([p1, p2])
        theta = model.theta_from_obs_mean(mean)
        return np.exp(model.log_pmf(theta, space) + prior.log_pdf(mean))

    def outer(t_grid: np.ndarray) -> np.ndarray:
        rows = np.zeros((len(t_grid), m))
        for i, t in enumerate(t_grid):
            p1 = _smoothstep(t)
            jac1 = 6.0 * t * (1.0 - t) * (1.0 - p1)
            if jac1 <= 0.0:
                continue

            def inner(s_grid: np.ndarray, p1=p1) -> np.ndarray:
                vals = np.zeros((len(s_grid), m))
                for j, s in enumerate(s_grid):
                    jac2 = 6.0 * s * (1.0 - s)
                    if jac2 <= 0.0:
                        continue
                    p2 = (1.0 - p1) * _smoothstep(s)
                    vals[j] = jac2 * masses(p1, p2)
                return vals

            rows[i] = jac1 * _adaptive_gl_vec(inner, 0.0, 1.0, rel_tol=1e-11)
        return rows

    vals = _adaptive_gl_vec(outer, 0.0, 1.0, rel_tol=1e-10)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0.0):
        bad = int(np.argmin(np.where(np.isfinite(vals), vals, -np.inf)))
        raise MarginalError(
            f"simplex quadrature failed at point {space.keys[bad]!r}",
            key=space.keys[bad],
        )
    return np.log(vals)


def marginal_table(
    model: ExponentialFamily,
    prior: PriorSpec,
    space: Optional[DataSpace] = None,
    method: str = "auto",
) -> MarginalTable:
    """Prior-predictive marginal over the enumerated space.

    method: "auto" prefers the conjugate closed form and falls back to
    adaptive quadrature; "closed_form" and "quadrature" force a route.
    """
    if space is None:
        space = model.default_space()
    log_r = None
    if method in ("auto", "closed_form"):
        log_r = _closed_form_log_marginal(model, prior, space)
        if log_r is None and method == "closed_form":
            raise MarginalError(
                f"no closed form for {model.family} + {prior.family}"
            )
    if log_r is None:
        log_r = _quadrature_log_marginal(model, prior, space)
    raw = float(special.logsumexp(log_r))
    return MarginalTable(space=space, log_r=log_r - raw, raw_mass=math.exp(raw))


# ---------------------------------------------------------------------------
# point estimates and information


@dataclass(frozen=True)
class MleResult:
    theta: np.ndarray
    clamped: bool


def mle_from_stat(
    model: ExponentialFamily, stat: np.ndarray, eps_clamp: float = EPS_CLAMP
) -> MleResult:
    """Maximum-likelihood parameter for an observed statistic value.

    Full-rank families match the mean to T(x); boundary statistics are
    clamped eps_clamp inside the mean domain and flagged.
    """
    mu, clamped = model.clamp_mean(np.asarray(stat, dtype=float), eps_clamp)
    return MleResult(theta=model.theta_from_mean(mu), clamped=bool(clamped))


def mle(
    model: ExponentialFamily, key, eps_clamp: float = EPS_CLAMP
) -> MleResult:
    return mle_from_stat(model, model.suff_stat(key), eps_clamp)


def fisher_info(model: ExponentialFamily, theta: np.ndarray) -> np.ndarray:
    """Per-observation Fisher information J1(theta), shape (p, p)."""
    theta = _as1d(theta)
    if not model.is_interior(theta):
        raise DomainError(f"theta {theta} not interior for {model.name}")
    jac = model.natural_jacobian(theta)
    hess = model.log_partition_hess(model.natural_map(theta))
    return jac.T @ hess @ jac / model.sample_size


def loglik_hess(
    model: ExponentialFamily, stat: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """Hessian of theta -> log p_n(x | theta), shape (p, p).

    Uses the analytic second derivative of the natural map when the model
    provides one, otherwise central differences of the score.
    """
    theta = _as1d(theta)
    t = np.asarray(stat, dtype=float)
    eta = model.natural_map(theta)
    jac = model.natural_jacobian(theta)
    resid = t - model.log_partition_grad(eta)
    curv = -jac.T @ model.log_partition_hess(eta) @ jac
    d2 = model.natural_hessian(theta)
    if d2 is not None:
        return curv + np.tensordot(resid, d2, axes=1)

    def score(th):
        e = model.natural_map(th)
        return model.natural_jacobian(th).T @ (
            t - model.log_partition_grad(e)
        )

    p = model.dim_theta
    out = np.empty((p, p))
    h = 1e-6
    for j in range(p):
        step = np.zeros(p)
        step[j] = h
        out[:, j] = (score(theta + step) - score(theta - step)) / (2 * h)
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class FisherMetric:
    """Per-observation information treated as a Riemannian metric."""

    info: Callable[[np.ndarray], np.ndarray]
    is_interior: Callable[[np.ndarray], bool]
    dim: int

    @classmethod
    def from_model(cls, model: ExponentialFamily) -> "FisherMetric":
        return cls(
            info=lambda th: fisher_info(model, th),
            is_interior=model.is_interior,
            dim=model.dim_theta,
        )
