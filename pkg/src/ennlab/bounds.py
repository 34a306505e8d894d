"""Learning-theory quantities for the network sieve, as plain functions.

Everything that can overflow is kept in log space; the deviation bound
combines its exponents before a single exponentiation.
"""
import math
from dataclasses import dataclass

from .core import SieveSpec, check_tau
from .exceptions import DomainError

__all__ = [
    "BoundInputs", "GrowthSchedule", "n_params_plus_one", "log_covering_bound",
    "log_deviation_bound", "deviation_bound", "growth_condition_ratio",
    "identifiability_threshold", "identifiability_gap", "lipschitz_transfer",
]


@dataclass(frozen=True)
class BoundInputs:
    eps: float
    n: int
    b: float
    sieve: SieveSpec

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.b > 0:
            raise ValueError(f"range bound b must be positive, got {self.b}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")


@dataclass(frozen=True)
class GrowthSchedule:
    """Width as a function of sample size.

    kind "power": r_n = ceil(n**param); "constant": r_n = param;
    "linear": r_n = ceil(param * n).
    """

    kind: str
    param: float
    d: int = 1

    def __post_init__(self):
        if self.kind not in ("power", "constant", "linear"):
            raise ValueError(f"unknown growth rule {self.kind!r}")
        if not self.param > 0:
            raise ValueError("growth parameter must be positive")
        if self.d < 1:
            raise ValueError("d must be positive")

    def r(self, n):
        if self.kind == "constant":
            val = self.param
        elif self.kind == "power":
            val = n ** self.param
        else:
            val = self.param * n
        # exact powers like 10000**0.25 must not be bumped up by rounding noise
        return max(1, math.ceil(val * (1 - 1e-12)))


def n_params_plus_one(r, d):
    """r(d + 2) + 1, the parameter count appearing in the covering bound."""
    return r * (d + 2) + 1


def log_covering_bound(eps, sieve):
    """Natural log of the sup-norm covering-number bound for the sieve.

    p * ln(12 e p (V/4)^2 / (eps (V/4 - 1))) with p = r(d+2)+1.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not sieve.v > 4:
        raise DomainError("covering bound undefined for V <= 4")
    p = n_params_plus_one(sieve.r, sieve.d)
    q = sieve.v / 4.0
    log_inner = (math.log(12.0) + 1.0 + math.log(p) + 2.0 * math.log(q)
                 - math.log(eps) - math.log(q - 1.0))
    return p * log_inner


def lipschitz_transfer(m1, m2):
    """Factor 2(M1 + M2) turning an eps-cover of the networks into a cover of the loss class."""
    if m1 < 0 or m2 < 0:
        raise ValueError("m1 and m2 must be nonnegative")
    return 2.0 * (m1 + m2)


def log_deviation_bound(inputs, m1=None, m2=None):
    """Log of 2 N(eps/3) exp(-2 n eps^2 / (9 B^2)) before clamping.

    Without m1/m2 the network-class cover is used directly for the loss
    class. With them, the network cover is taken at radius eps / (2(m1+m2)).
    """
    eps_net = inputs.eps
    if m1 is not None or m2 is not None:
        factor = lipschitz_transfer(m1 or 0.0, m2 or 0.0)
        if factor == 0:
            raise DomainError("Lipschitz transfer factor is zero")
        eps_net = inputs.eps / factor
    log_cover = log_covering_bound(eps_net, inputs.sieve)
    decay = 2.0 * inputs.n * inputs.eps**2 / (9.0 * inputs.b**2)
    return math.log(2.0) + log_cover - decay


def deviation_bound(inputs, m1=None, m2=None):
    """Uniform deviation probability bound, clamped to [0, 1]."""
    log_val = log_deviation_bound(inputs, m1, m2)
    return 1.0 if log_val >= 0 else math.exp(log_val)


def growth_condition_ratio(schedule, n):
    """p ln(p) / n with p = r_n(d+2)+1; tends to zero iff the growth condition holds."""
    if n < 2:
        raise ValueError("n must be at least 2")
    p = n_params_plus_one(schedule.r(n), schedule.d)
    return p * math.log(p) / n


def identifiability_threshold(tau, sigma2):
    """Smallest (exclusive) separation radius: sqrt(sigma2 |1-2tau| / min(tau, 1-tau))."""
    tau = check_tau(tau)
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    if tau == 0.5 or sigma2 == 0:
        return 0.0
    return math.sqrt(sigma2 * abs(1.0 - 2.0 * tau) / min(tau, 1.0 - tau))


def identifiability_gap(tau, sigma2, eps):
    """Lower bound on the excess population risk outside the eps-ball around the truth."""
    tau = check_tau(tau)
    lo, hi = min(tau, 1 - tau), max(tau, 1 - tau)
    return lo * (sigma2 + eps**2) - hi * sigma2
