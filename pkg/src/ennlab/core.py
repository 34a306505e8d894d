"""One-hidden-layer expectile network: evaluation, loss, gradients and the sieve.

The network is

    f(x) = alpha0 + sum_j alpha[j] * sigmoid(gamma[j] @ x + gamma0[j])

and is trained under the asymmetric squared loss

    L_tau(y, f) = tau * (y - f)**2        if y >= f
                  (1 - tau) * (y - f)**2  if y <  f.

The sieve F(r, V, M) bounds |alpha0| + sum|alpha| <= V and, for every hidden
unit j, |gamma0[j]| + sum_i |gamma[j, i]| <= M.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EnnParams", "SieveSpec", "Dataset",
    "check_tau", "sigmoid", "forward", "predict", "hidden", "unpack_vector",
    "risk_and_grad_vector",
    "loss_tau", "loss_grad_f", "loss_split", "empirical_risk", "grad_params",
    "l1_norm", "project_l1_ball", "in_sieve", "project_sieve", "sample_sieve",
]


def _as_float_array(a, ndim, name):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EnnParams:
    """Weights of a width-r network on d inputs.

    alpha0 : output bias.
    alpha  : (r,) output weights.
    gamma  : (r, d) hidden weights, row j feeds hidden unit j.
    gamma0 : (r,) hidden biases.
    """

    alpha0: float
    alpha: np.ndarray
    gamma: np.ndarray
    gamma0: np.ndarray

    def __post_init__(self):
        a0 = float(self.alpha0)
        if not np.isfinite(a0):
            raise ValueError("alpha0 must be finite")
        object.__setattr__(self, "alpha0", a0)
        object.__setattr__(self, "alpha", _as_float_array(self.alpha, 1, "alpha"))
        object.__setattr__(self, "gamma", _as_float_array(self.gamma, 2, "gamma"))
        object.__setattr__(self, "gamma0", _as_float_array(self.gamma0, 1, "gamma0"))
        r = self.alpha.shape[0]
        if self.gamma.shape[0] != r or self.gamma0.shape[0] != r:
            raise ValueError(
                f"inconsistent widths: alpha {r}, gamma {self.gamma.shape[0]}, "
                f"gamma0 {self.gamma0.shape[0]}")

    @property
    def r(self):
        return self.alpha.shape[0]

    @property
    def d(self):
        return self.gamma.shape[1]

    @classmethod
    def zeros(cls, r, d):
        return cls(0.0, np.zeros(r), np.zeros((r, d)), np.zeros(r))

    def to_vector(self):
        """Flatten as (alpha0, alpha, gamma row-major, gamma0)."""
        return np.concatenate([[self.alpha0], self.alpha, self.gamma.ravel(), self.gamma0])

    @classmethod
    def from_vector(cls, vec, r, d):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (1 + r + r * d + r,):
            raise ValueError(f"vector of length {vec.shape} does not match r={r}, d={d}")
        return cls(vec[0], vec[1:1 + r], vec[1 + r:1 + r + r * d].reshape(r, d),
                   vec[1 + r + r * d:])

    def __eq__(self, other):
        if not isinstance(other, EnnParams):
            return NotImplemented
        return (self.alpha0 == other.alpha0
                and np.array_equal(self.alpha, other.alpha)
                and np.array_equal(self.gamma, other.gamma)
                and np.array_equal(self.gamma0, other.gamma0))

    def to_dict(self):
        return {"alpha0": self.alpha0, "alpha": self.alpha.tolist(),
                "gamma": self.gamma.tolist(), "gamma0": self.gamma0.tolist()}

    @classmethod
    def from_dict(cls, d):
        r = len(d["alpha"])
        gamma = np.asarray(d["gamma"], dtype=float).reshape(r, -1)
        return cls(d["alpha0"], d["alpha"], gamma, d["gamma0"])


@dataclass(frozen=True)
class SieveSpec:
    """Constraint class: width r, output budget v, hidden budget m, input dim d."""

    r: int
    v: float
    m: float
    d: int

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"width r must be a positive integer, got {self.r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"input dimension d must be a positive integer, got {self.d}")
        if not self.v >= 4:
            raise ValueError(f"output budget v must be >= 4, got {self.v}")
        if not self.m > 0:
            raise ValueError(f"hidden budget m must be > 0, got {self.m}")
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "m", float(self.m))

    def to_dict(self):
        return {"r": self.r, "v": self.v, "m": self.m, "d": self.d}


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix x (n, d) and responses y (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_float_array(self.x, 2, "x")
        y = _as_float_array(self.y, 1, "y")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has length {y.shape[0]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def d(self):
        return self.x.shape[1]


def check_tau(tau):
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie strictly between 0 and 1, got {tau}")
    return tau


def sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _check_design(params, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"design must be 2-dimensional, got shape {x.shape}")
    if x.shape[1] != params.d:
        raise ValueError(f"input dimension {x.shape[1]} does not match network d={params.d}")
    return x


def hidden(params, x):
    """Hidden activations, shape (n, r)."""
    x = _check_design(params, x)
    return sigmoid(x @ params.gamma.T + params.gamma0)


def predict(params, x):
    """Network output at each row of x."""
    return params.alpha0 + hidden(params, x) @ params.alpha


def forward(params, x):
    """Network output at a single input vector of length d."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"forward expects a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite entries")
    return float(predict(params, x[None, :])[0])


def _weights(tau, resid):
    return np.where(resid >= 0, tau, 1.0 - tau)


def loss_tau(tau, y, f):
    """Asymmetric squared loss; works elementwise on arrays."""
    tau = check_tau(tau)
    resid = np.asarray(y, dtype=float) - np.asarray(f, dtype=float)
    out = _weights(tau, resid) * resid**2
    return float(out) if out.ndim == 0 else out


def loss_grad_f(tau, y, f):
    """Derivative of loss_tau with respect to the fitted value f."""
    tau = check_tau(tau)
    resid = np.asarray(y, dtype=float) - np.asarray(f, dtype=float)
    out = -2.0 * _weights(tau, resid) * resid
    return float(out) if out.ndim == 0 else out


def loss_split(y, f):
    """Return (g1, g2): squared residual on {y >= f} and on {y < f}.

    tau * g1 + (1 - tau) * g2 recovers loss_tau exactly.
    """
    resid = np.asarray(y, dtype=float) - np.asarray(f, dtype=float)
    sq = resid**2
    pos = resid >= 0
    return np.where(pos, sq, 0.0), np.where(pos, 0.0, sq)


def _check_data(params, data):
    if data.n == 0:
        raise ValueError("empty dataset")
    if data.d != params.d:
        raise ValueError(f"data dimension {data.d} does not match network d={params.d}")


def empirical_risk(tau, params, data):
    """Average asymmetric loss of the network over the dataset."""
    tau = check_tau(tau)
    _check_data(params, data)
    return float(np.mean(loss_tau(tau, data.y, predict(params, data.x))))


def unpack_vector(theta, r, d):
    """Views (alpha0, alpha, gamma, gamma0) into a flat parameter vector."""
    return (theta[0], theta[1:1 + r], theta[1 + r:1 + r + r * d].reshape(r, d),
            theta[1 + r + r * d:])


def risk_and_grad_vector(tau, theta, x, y, r, d):
    """Empirical risk and its gradient for the flat vector layout of EnnParams.to_vector."""
    alpha0, alpha, gamma, gamma0 = unpack_vector(theta, r, d)
    n = x.shape[0]
    h = sigmoid(x @ gamma.T + gamma0)
    resid = y - (alpha0 + h @ alpha)
    w = np.where(resid >= 0, tau, 1.0 - tau)
    wr = w * resid
    risk = float(wr @ resid) / n
    c = (-2.0 / n) * wr
    q = h * (1.0 - h)
    g = np.empty(theta.shape)
    g[0] = c.sum()
    g[1:1 + r] = c @ h
    g[1 + r:1 + r + r * d] = (alpha[:, None] * (q.T @ (c[:, None] * x))).ravel()
    g[1 + r + r * d:] = alpha * (c @ q)
    return risk, g


def grad_params(tau, params, data):
    """Exact gradient of empirical_risk, returned as an EnnParams."""
    tau = check_tau(tau)
    _check_data(params, data)
    _, g = risk_and_grad_vector(tau, params.to_vector(), data.x, data.y, params.r, params.d)
    return EnnParams.from_vector(g, params.r, params.d)


def l1_norm(v):
    # every budget check goes through here so projection and membership agree bitwise
    return float(np.sum(np.abs(v)))


def project_l1_ball(v, radius):
    """Euclidean projection of a vector onto {w : ||w||_1 <= radius}.

    Sort-based soft thresholding; vectors already inside the ball come back
    unchanged. The result satisfies l1_norm(w) <= radius exactly in floating
    point.
    """
    v = np.asarray(v, dtype=float)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if l1_norm(v) <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    u = np.sort(np.abs(v))[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    active = np.nonzero(u * k > css - radius)[0]
    # the largest entry is always active; rounding can hide it for tiny radii
    rho = active[-1] if active.size else 0
    theta = (css[rho] - radius) / (rho + 1.0)
    w = np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)
    s = l1_norm(w)
    if s > radius:
        w *= radius / s
    while l1_norm(w) > radius:
        w = np.nextafter(w, 0.0)
    return w


def _alpha_group(params):
    return np.concatenate([[params.alpha0], params.alpha])


def _gamma_group(params, j):
    return np.concatenate([[params.gamma0[j]], params.gamma[j]])


def _check_sieve(params, sieve):
    if params.r != sieve.r or params.d != sieve.d:
        raise ValueError(
            f"network (r={params.r}, d={params.d}) does not match sieve "
            f"(r={sieve.r}, d={sieve.d})")


def in_sieve(params, sieve):
    """True iff both L1 budgets hold (boundary included)."""
    _check_sieve(params, sieve)
    if l1_norm(_alpha_group(params)) > sieve.v:
        return False
    return all(l1_norm(_gamma_group(params, j)) <= sieve.m for j in range(params.r))


def project_sieve(params, sieve):
    """Euclidean projection onto the sieve, group by group."""
    _check_sieve(params, sieve)
    a = project_l1_ball(_alpha_group(params), sieve.v)
    rows = np.stack([project_l1_ball(_gamma_group(params, j), sieve.m)
                     for j in range(params.r)])
    return EnnParams(a[0], a[1:], rows[:, 1:], rows[:, 0])


def _scale_to_fraction(group, budget, frac):
    norm = l1_norm(group)
    if norm == 0.0:
        return group
    return group * (frac * budget / norm)


def sample_sieve(sieve, seed):
    """Random network inside the sieve, deterministic in `seed`.

    Each L1 group is drawn uniform on [-1, 1] per coordinate and then rescaled
    to a uniform random fraction of its budget, so samples fill the interior.
    """
    rng = np.random.default_rng(seed)
    r, d = sieve.r, sieve.d
    a = _scale_to_fraction(rng.uniform(-1, 1, r + 1), sieve.v, rng.uniform())
    rows = rng.uniform(-1, 1, (r, d + 1))
    fracs = rng.uniform(size=r)
    rows = np.stack([_scale_to_fraction(rows[j], sieve.m, fracs[j]) for j in range(r)])
    params = EnnParams(a[0], a[1:], rows[:, 1:], rows[:, 0])
    # guards against a last-ulp overshoot of the budget
    return project_sieve(params, sieve)
