"""Nonlinear scalar profiles and vector maps of the degenerate flux model.

Vectors are plain numpy arrays of shape (n,) with n >= 2 (n = 2 everywhere in
the solver).  All functions here are pure; batch variants operate on arrays of
shape (..., n) or (...,) and are safe to call from concurrent workers.

The model is governed by the parameter quadruple (p, lam, alpha, eps):

* ``h_gamma(xi)``      -- (|xi| - lam)_+^gamma * xi/|xi|
* ``g_profile(t)``     -- integral_0^t w^{(p-1+2a)/2} / (w+lam)^{(1+2a)/2} dw
* ``v_map(xi)``        -- g_profile((|xi|-lam)_+) * xi/|xi|
* ``flux(xi)``         -- h_{p-1}(xi) + eps (1+|xi|^2)^{(p-2)/2} xi, the gradient
  of the convex energy ``energy(xi) = (|xi|-lam)_+^p / p + eps (1+|xi|^2)^{p/2} / p``
* ``flux_jacobian``    -- the symmetric Hessian of that energy
* ``phi_weight(t)``    -- t^{2a}/(t^2+lam^2)^a and its derivative
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidInputError, QuadratureError

__all__ = [
    "DegenParams",
    "QuadratureConfig",
    "DEFAULT_QUAD",
    "default_alpha",
    "h_gamma",
    "g_profile",
    "g_profile_quadrature",
    "g_profile_batch",
    "g_profile_diff_batch",
    "v_map",
    "v_map_batch",
    "energy",
    "flux",
    "flux_batch",
    "flux_jacobian",
    "phi_weight",
]


def default_alpha(p: float, lam: float) -> float:
    """Minimal admissible profile exponent for the pair (p, lam).

    Zero when lam = 0; otherwise (p+1)/(2(p-1)) for p > 2 and 3/2 for p = 2
    (the single formula (p+1)/(2(p-1)) covers both since it equals 3/2 at p = 2).
    """
    if not math.isfinite(p) or p < 2.0:
        raise InvalidInputError(f"growth exponent p must be >= 2, got {p}")
    if lam < 0.0:
        raise InvalidInputError(f"degeneracy threshold must be >= 0, got {lam}")
    if lam == 0.0:
        return 0.0
    return (p + 1.0) / (2.0 * (p - 1.0))


@dataclass(frozen=True)
class DegenParams:
    """Parameter quadruple (p, lam, alpha, eps) governing the nonlinear maps.

    ``alpha=None`` resolves to the minimal admissible value.  Invariants:
    p >= 2, lam >= 0, eps in [0, 1]; alpha = 0 when lam = 0, and
    alpha >= (p+1)/(2(p-1)) (>= 3/2 for p = 2) when lam > 0.
    """

    p: float
    lam: float = 0.0
    alpha: float | None = None
    eps: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.p) or self.p < 2.0:
            raise InvalidInputError(f"p must be a finite number >= 2, got {self.p}")
        if not math.isfinite(self.lam) or self.lam < 0.0:
            raise InvalidInputError(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 <= self.eps <= 1.0:
            raise InvalidInputError(f"eps must lie in [0, 1], got {self.eps}")
        floor = default_alpha(self.p, self.lam)
        if self.alpha is None:
            object.__setattr__(self, "alpha", floor)
        elif self.lam == 0.0:
            if self.alpha != 0.0:
                raise InvalidInputError(
                    f"alpha must be 0 when lambda = 0, got {self.alpha}"
                )
        elif self.alpha < floor - 1e-12:
            raise InvalidInputError(
                f"alpha = {self.alpha} is below the admissible floor {floor} "
                f"for p = {self.p}, lambda = {self.lam}"
            )

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    def with_eps(self, eps: float) -> "DegenParams":
        return DegenParams(self.p, self.lam, self.alpha, eps)


@dataclass(frozen=True)
class QuadratureConfig:
    # absolute tolerance kept non-binding so tiny integrals are still resolved
    # to full relative accuracy
    abs_tol: float = 1e-300
    rel_tol: float = 1e-13
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol <= 0:
            raise InvalidInputError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise InvalidInputError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureConfig()


def _check_finite_vector(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or xi.size < 1:
        raise InvalidInputError("expected a 1-D vector")
    if not np.all(np.isfinite(xi)):
        raise InvalidInputError("vector has non-finite components")
    return xi


def h_gamma(xi, gamma: float, lam: float) -> np.ndarray:
    """(|xi| - lam)_+^gamma * xi/|xi|, with the zero vector at xi = 0."""
    if gamma <= 0.0:
        raise InvalidInputError(f"gamma must be > 0, got {gamma}")
    if lam < 0.0:
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")
    xi = _check_finite_vector(xi)
    r = float(np.linalg.norm(xi))
    if r <= lam or r == 0.0:
        return np.zeros_like(xi)
    return (r - lam) ** gamma * (xi / r)


def h_gamma_batch(xi: np.ndarray, gamma: float, lam: float) -> np.ndarray:
    """Batch form of :func:`h_gamma` on arrays of shape (..., n)."""
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1)
    excess = np.maximum(r - lam, 0.0)
    safe_r = np.where(r > 0.0, r, 1.0)
    return (excess**gamma / safe_r)[..., None] * xi


# --------------------------------------------------------------------------
# the scalar profile g(t) = integral_0^t w^{(p-1+2a)/2} / (w+lam)^{(1+2a)/2} dw
# --------------------------------------------------------------------------


def _g_closed_p2_a32(t: float, lam: float) -> float:
    """Closed form for p = 2, alpha = 3/2: t + lam - lam^2/(t+lam) - 2 lam ln(1+t/lam).

    Evaluated as t(t+2 lam)/(t+lam) - 2 lam log1p(t/lam), with a power series for
    t/lam <= 1/2 where the two terms cancel catastrophically.
    """
    if t == 0.0:
        return 0.0
    x = t / lam
    if x > 0.5:
        return t * (t + 2.0 * lam) / (t + lam) - 2.0 * lam * math.log1p(x)
    # integral_0^t w^2/(w+lam)^2 dw = (t^3/lam^2) * sum_{k>=0} (k+1)(-x)^k/(k+3)
    total = 0.0
    term_pow = 1.0
    for k in range(0, 200):
        term = (k + 1) * term_pow / (k + 3)
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
        term_pow *= -x
    return t**3 / lam**2 * total


def _g_closed_p2_a32_batch(t: np.ndarray, lam: float) -> np.ndarray:
    """Vectorized form of :func:`_g_closed_p2_a32`."""
    t = np.asarray(t, dtype=float)
    x = t / lam
    direct = t * (t + 2.0 * lam) / (t + lam) - 2.0 * lam * np.log1p(x)
    # Horner evaluation of sum_{k=0}^{K} (k+1)(-x)^k/(k+3) on the series branch
    xs = np.where(x <= 0.5, -x, 0.0)
    total = np.zeros_like(xs)
    for k in range(70, -1, -1):
        total = total * xs + (k + 1) / (k + 3)
    series = t**3 / lam**2 * total
    return np.where(x > 0.5, direct, series)


def _g_integrand(p: float, alpha: float, lam: float):
    a = 0.5 * (p - 1.0 + 2.0 * alpha)
    b = 0.5 * (1.0 + 2.0 * alpha)

    def f(w):
        return w**a / (w + lam) ** b

    return f, a, b


def g_profile_quadrature(
    t: float, params: DegenParams, quad_cfg: QuadratureConfig = DEFAULT_QUAD
) -> float:
    """Adaptive-quadrature evaluation of the profile integral (no closed-form shortcuts)."""
    if not math.isfinite(t) or t < 0.0:
        raise InvalidInputError(f"profile argument must be >= 0, got {t}")
    if t == 0.0:
        return 0.0
    f, a, _ = _g_integrand(params.p, params.alpha, params.lam)
    if a < 1.0:
        # guard for an integrable endpoint singularity: substitute w = s^2
        def fs(s):
            return 2.0 * s * f(s * s)

        val, err, *rest = quad(
            fs,
            0.0,
            math.sqrt(t),
            epsabs=quad_cfg.abs_tol,
            epsrel=quad_cfg.rel_tol,
            limit=quad_cfg.max_subdivisions,
            full_output=1,
        )
    else:
        val, err, *rest = quad(
            f,
            0.0,
            t,
            epsabs=quad_cfg.abs_tol,
            epsrel=quad_cfg.rel_tol,
            limit=quad_cfg.max_subdivisions,
            full_output=1,
        )
    if not math.isfinite(val):
        raise QuadratureError(f"profile quadrature returned {val} at t={t}")
    # QUADPACK may flag pure roundoff saturation on long intervals while the
    # achieved error estimate is still tiny; fail on the estimate, not the flag.
    tolerated = max(10.0 * quad_cfg.abs_tol, 1e-9 * abs(val))
    if len(rest) > 1 and err > tolerated:
        raise QuadratureError(
            f"profile quadrature did not converge at t={t}: {rest[-1]}"
        )
    return val


def g_profile(
    t: float, params: DegenParams, quad_cfg: QuadratureConfig = DEFAULT_QUAD
) -> float:
    """Profile integral with closed forms where available, quadrature otherwise.

    Closed forms: (2/p) t^{p/2} for lam = 0 (any alpha), and the p = 2,
    alpha = 3/2 antiderivative.  Monotone non-decreasing in t and bounded by
    (2/p) t^{p/2} (t/(t+lam))^{(1+2 alpha)/2}.
    """
    if not math.isfinite(t) or t < 0.0:
        raise InvalidInputError(f"profile argument must be >= 0, got {t}")
    if t == 0.0:
        return 0.0
    if params.lam == 0.0:
        return (2.0 / params.p) * t ** (params.p / 2.0)
    if params.p == 2.0 and params.alpha == 1.5:
        return _g_closed_p2_a32(t, params.lam)
    return g_profile_quadrature(t, params, quad_cfg)


_GL_NODES_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_NODES_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        # map from [-1, 1] to [0, 1]
        _GL_NODES_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_NODES_CACHE[n]


_BATCH_CHUNK = 65536


def g_profile_batch(t: np.ndarray, params: DegenParams, nodes: int = 48) -> np.ndarray:
    """Vectorized profile integral on arrays of t >= 0.

    Uses the closed forms when available, otherwise fixed-order Gauss-Legendre
    after the substitution w = t s^4 (the integrand then vanishes like
    s^{2p+4 alpha + 1} at 0, so the rule converges to ~1e-10 relative already
    at 32 nodes).  Evaluation is chunked to keep temporaries cache-sized.
    """
    t = np.asarray(t, dtype=float)
    if params.lam == 0.0:
        return (2.0 / params.p) * t ** (params.p / 2.0)
    if params.p == 2.0 and params.alpha == 1.5:
        return _g_closed_p2_a32_batch(t, params.lam)
    a = 0.5 * (params.p - 1.0 + 2.0 * params.alpha)
    b = 0.5 * (1.0 + 2.0 * params.alpha)
    lam = params.lam
    s, w = _gl_nodes(nodes)
    s3 = s * s * s
    s4 = s3 * s
    flat = np.ascontiguousarray(t.reshape(-1))
    out = np.empty_like(flat)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(0, flat.size, _BATCH_CHUNK):
            tt = flat[i : i + _BATCH_CHUNK, None]
            wg = tt * s4
            vals = 4.0 * tt * s3 * np.exp(a * np.log(wg) - b * np.log(wg + lam))
            out[i : i + _BATCH_CHUNK] = vals @ w
    out[flat == 0.0] = 0.0
    return out.reshape(t.shape)


def g_profile_diff_batch(
    t_lo: np.ndarray,
    t_hi: np.ndarray,
    params: DegenParams,
    nodes: int = 48,
    g_lo: np.ndarray | None = None,
    g_hi: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized integral of the profile integrand over [t_lo, t_hi], t_lo <= t_hi.

    Equals g(t_hi) - g(t_lo) but stays relatively accurate when the two
    arguments nearly coincide (the integrand is evaluated on the short interval
    instead of subtracting two large integrals).  Callers that already hold
    g_profile_batch values for the endpoints may pass them as g_lo / g_hi to
    skip the wide-interval recomputation.
    """
    t_lo = np.asarray(t_lo, dtype=float)
    t_hi = np.asarray(t_hi, dtype=float)
    gap = t_hi - t_lo
    if params.lam == 0.0:
        wide = g_profile_batch(t_hi, params) - g_profile_batch(t_lo, params)
        # stable power difference for near-equal arguments
        c = params.p / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_term = np.where(
                t_lo > 0.0,
                (2.0 / params.p)
                * t_lo**c
                * np.expm1(c * np.log(np.where(t_lo > 0.0, t_hi / t_lo, 1.0))),
                wide,
            )
        near = gap <= 0.25 * np.maximum(t_hi, 1e-300)
        return np.where(near, ratio_term, wide)
    a = 0.5 * (params.p - 1.0 + 2.0 * params.alpha)
    b = 0.5 * (1.0 + 2.0 * params.alpha)
    lam = params.lam
    s, w = _gl_nodes(nodes)
    # the direct short-interval rule is needed (and valid) only where the two
    # arguments nearly coincide; elsewhere subtraction of the endpoint values
    # keeps full relative accuracy
    near = (gap <= 0.5 * np.maximum(t_hi, 1e-300)) & (gap > 0.0)
    flat_lo = np.ascontiguousarray(t_lo.reshape(-1)[near.reshape(-1)])
    flat_gap = np.ascontiguousarray(gap.reshape(-1)[near.reshape(-1)])
    direct = np.empty_like(flat_lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(0, flat_lo.size, _BATCH_CHUNK):
            lo = flat_lo[i : i + _BATCH_CHUNK, None]
            gp = flat_gap[i : i + _BATCH_CHUNK, None]
            mid = np.maximum(lo + gp * s, 0.0)
            vals = gp * np.exp(a * np.log(mid) - b * np.log(mid + lam))
            direct[i : i + _BATCH_CHUNK] = vals @ w
    if g_hi is None:
        g_hi = g_profile_batch(t_hi, params)
    if g_lo is None:
        g_lo = g_profile_batch(t_lo, params)
    out = np.asarray(g_hi - g_lo, dtype=float).copy()
    out.reshape(-1)[near.reshape(-1)] = direct
    return np.where(gap == 0.0, 0.0, out)


def v_map(
    xi, params: DegenParams, quad_cfg: QuadratureConfig = DEFAULT_QUAD
) -> np.ndarray:
    """g_profile((|xi| - lam)_+) * xi/|xi| when |xi| > lam, zero vector otherwise."""
    xi = _check_finite_vector(xi)
    r = float(np.linalg.norm(xi))
    if r <= params.lam or r == 0.0:
        return np.zeros_like(xi)
    return g_profile(r - params.lam, params, quad_cfg) * (xi / r)


def v_map_batch(xi: np.ndarray, params: DegenParams) -> np.ndarray:
    """Batch form of :func:`v_map` on arrays of shape (..., n)."""
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1)
    excess = np.maximum(r - params.lam, 0.0)
    g = g_profile_batch(excess, params)
    safe_r = np.where(r > 0.0, r, 1.0)
    return (g / safe_r)[..., None] * xi


# --------------------------------------------------------------------------
# regularized energy, its gradient (the flux) and Hessian
# --------------------------------------------------------------------------


def energy(xi, params: DegenParams) -> float:
    """Convex energy (|xi|-lam)_+^p / p + eps (1+|xi|^2)^{p/2} / p."""
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1)
    p = params.p
    return (
        np.maximum(r - params.lam, 0.0) ** p / p
        + params.eps * (1.0 + r * r) ** (p / 2.0) / p
    )


def flux(xi, params: DegenParams) -> np.ndarray:
    """Gradient of :func:`energy`: h_{p-1}(xi) + eps (1+|xi|^2)^{(p-2)/2} xi."""
    xi = _check_finite_vector(xi)
    p = params.p
    r = float(np.linalg.norm(xi))
    smooth = params.eps * (1.0 + r * r) ** ((p - 2.0) / 2.0) * xi
    if r <= params.lam or r == 0.0:
        return smooth
    return (r - params.lam) ** (p - 1.0) * (xi / r) + smooth


def flux_batch(xi: np.ndarray, params: DegenParams) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    p = params.p
    r = np.linalg.norm(xi, axis=-1)
    excess = np.maximum(r - params.lam, 0.0)
    safe_r = np.where(r > 0.0, r, 1.0)
    coeff = excess ** (p - 1.0) / safe_r + params.eps * (1.0 + r * r) ** (
        (p - 2.0) / 2.0
    )
    return coeff[..., None] * xi


def flux_jacobian(xi, params: DegenParams) -> np.ndarray:
    """Symmetric Hessian of :func:`energy` at xi.

    For xi != 0 with r = |xi|, P = xi xi^T / r^2:

        eps [(1+r^2)^{(p-2)/2} I + (p-2)(1+r^2)^{(p-4)/2} xi xi^T]
        + (p-1)(r-lam)_+^{p-2} P + ((r-lam)_+^{p-1}/r) (I - P).

    At xi = 0 the degenerate part contributes the identity only for
    p = 2, lam = 0 (one-sided limit 0 otherwise).
    """
    xi = _check_finite_vector(xi)
    n = xi.size
    p, lam, eps = params.p, params.lam, params.eps
    r = float(np.linalg.norm(xi))
    eye = np.eye(n)
    if r == 0.0:
        jac = eps * eye.copy()
        if lam == 0.0 and p == 2.0:
            jac += eye
        return jac
    outer = np.outer(xi, xi)
    jac = eps * (
        (1.0 + r * r) ** ((p - 2.0) / 2.0) * eye
        + (p - 2.0) * (1.0 + r * r) ** ((p - 4.0) / 2.0) * outer
    )
    if r > lam:
        par = outer / (r * r)
        perp = eye - par
        jac += (p - 1.0) * (r - lam) ** (p - 2.0) * par
        jac += (r - lam) ** (p - 1.0) / r * perp
    return jac


def flux_jacobian_batch(xi: np.ndarray, params: DegenParams) -> np.ndarray:
    """Batch Hessians, shape (..., n, n)."""
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1]
    p, lam, eps = params.p, params.lam, params.eps
    r = np.linalg.norm(xi, axis=-1)
    eye = np.eye(n)
    outer = xi[..., :, None] * xi[..., None, :]
    jac = eps * (
        ((1.0 + r * r) ** ((p - 2.0) / 2.0))[..., None, None] * eye
        + (p - 2.0) * ((1.0 + r * r) ** ((p - 4.0) / 2.0))[..., None, None] * outer
    )
    excess = np.maximum(r - lam, 0.0)
    safe_r2 = np.where(r > 0.0, r * r, 1.0)
    safe_r = np.where(r > 0.0, r, 1.0)
    par = outer / safe_r2[..., None, None]
    perp = eye - par
    jac += ((p - 1.0) * excess ** (p - 2.0))[..., None, None] * par
    jac += (excess ** (p - 1.0) / safe_r)[..., None, None] * perp
    if lam == 0.0 and p == 2.0:
        at_zero = r == 0.0
        if np.any(at_zero):
            jac = jac + at_zero[..., None, None] * eye
    return jac


def phi_weight(t: float, params: DegenParams) -> tuple[float, float]:
    """Absorption weight t^{2a}/(t^2+lam^2)^a in [0, 1] and its derivative.

    derivative = 2 a lam^2 t^{2a-1} / (t^2+lam^2)^{a+1}; satisfies
    derivative * t <= 2 a * value.  For lam = 0 the weight is the indicator of
    t > 0 with derivative 0.
    """
    if not math.isfinite(t) or t < 0.0:
        raise InvalidInputError(f"weight argument must be >= 0, got {t}")
    a, lam = params.alpha, params.lam
    if lam == 0.0:
        return (1.0 if t > 0.0 else 0.0), 0.0
    if t == 0.0:
        return 0.0, 0.0
    denom = t * t + lam * lam
    value = t ** (2.0 * a) / denom**a
    deriv = 2.0 * a * lam * lam * t ** (2.0 * a - 1.0) / denom ** (a + 1.0)
    return value, deriv
