# numerics.py

"""
Numerics

Special functions, deterministic Gamma and Dirichlet sampling through quantile
transforms, Dirichlet moments, and pathwise derivatives of Dirichlet samples with
respect to the concentration scale beta.

Every sampler here is a pure function of its uniform noise. Noise blocks are
derived from a (seed, stream_id) pair through numpy's counter-based Philox
generator, so the same pair always yields the same block regardless of what
else was drawn before.

Functions:
    - log_gamma: Natural logarithm of the Gamma function.
    - reg_inc_gamma_p: Regularized lower incomplete gamma function P(a, x).
    - gamma_quantile: Inverse of P(a, .) (Gamma(a, 1) quantile).
    - uniform_noise: Builds a UniformNoiseBlock from (seed, stream_id, M, C).
    - stream_id_for: Derives a stream id from stable identifiers.
    - clip_renormalize: Clips probabilities to [epsilon, 1] and renormalizes.
    - dirichlet_sample / dirichlet_sample_batch: Quantile-transform Dirichlet draws.
    - dirichlet_mean: Mean of a Dirichlet distribution.
    - dirichlet_component_variance: Marginal variance of one Dirichlet component.
    - sample_derivative_wrt_beta / sample_derivative_batch: d(sample)/d(beta) under common random numbers.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.special import gammaln, ndtri

from dirichlet_wrapper.errors import DomainError, NumericError, ShapeError
from dirichlet_wrapper.utils import fnv1a_64

ArrayLike = Union[float, Sequence[float], np.ndarray]

EPSILON_CLIP = 1e-6
QUANTILE_FLOOR = 1e-300
QUANTILE_MAX_ITER = 200
QUANTILE_U_TOL = 1e-10
SIMPLEX_ATOL = 1e-9

_EPS = np.finfo(float).eps
_FPMIN = 1e-300
_MAX_TERMS = 100_000
_LOG_FLOOR = math.log(QUANTILE_FLOOR)
_MASK_64 = (1 << 64) - 1


@dataclass(frozen=True)
class UniformNoiseBlock:
    """
    An M x C block of uniforms strictly inside (0, 1).

    The block is fully determined by (seed, stream_id, M, C); build it with
    :func:`uniform_noise` rather than by hand.

    Attributes:
        u (np.ndarray): The uniforms, shape (M, C).
        seed (int): Run seed.
        stream_id (int): Independent stream selector within the run.
    """

    u: np.ndarray
    seed: int
    stream_id: int

    @property
    def shape(self) -> Tuple[int, int]:
        return self.u.shape

    @property
    def samples(self) -> int:
        return self.u.shape[0]


def uniform_noise(seed: int, stream_id: int, m: int, c: int) -> UniformNoiseBlock:
    """
    Generates the uniform noise block for (seed, stream_id).

    The Philox key is ``seed`` (high 64 bits) and ``stream_id`` (low 64 bits);
    entry (m, c) is the (m * C + c)-th raw 64-bit draw of that stream, mapped to
    ``(k + 0.5) / 2**53`` with k its top 53 bits, so it never equals 0 or 1.

    Args:
        seed (int): Run seed (reduced modulo 2**64).
        stream_id (int): Stream selector (reduced modulo 2**64).
        m (int): Number of samples M.
        c (int): Number of classes C.

    Returns:
        UniformNoiseBlock: The noise block.

    Raises:
        DomainError: If m or c is not positive.
    """
    if m < 1 or c < 1:
        raise DomainError(f"noise block needs M >= 1 and C >= 1, got M={m}, C={c}")
    key = ((int(seed) & _MASK_64) << 64) | (int(stream_id) & _MASK_64)
    raw = np.random.Philox(key=key).random_raw(m * c)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return UniformNoiseBlock(u=u.reshape(m, c), seed=int(seed), stream_id=int(stream_id))


def stream_id_for(*parts: object) -> int:
    """
    Derives a 64-bit stream id from stable identifiers, e.g. ``("score", example_id)``.
    """
    return fnv1a_64(":".join(str(part) for part in parts))


def log_gamma(a: ArrayLike) -> Union[float, np.ndarray]:
    """
    Natural logarithm of the Gamma function for positive arguments.

    Args:
        a (ArrayLike): Positive argument(s).

    Returns:
        Union[float, np.ndarray]: ln Gamma(a).

    Raises:
        DomainError: If any argument is not strictly positive.

    Example:
        >>> round(log_gamma(10), 10)
        12.8018274801
    """
    arr = np.asarray(a, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"log_gamma requires a > 0, got {a}")
    out = gammaln(arr)
    return float(out) if out.ndim == 0 else out


def _series_sum(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    # sum_{n>=0} x^n / (a (a+1) ... (a+n))
    ap = a.copy()
    term = 1.0 / a
    total = term.copy()
    pending = np.arange(a.size)
    for _ in range(_MAX_TERMS):
        ap_p = ap[pending] + 1.0
        ap[pending] = ap_p
        term_p = term[pending] * x[pending] / ap_p
        term[pending] = term_p
        total_p = total[pending] + term_p
        total[pending] = total_p
        pending = pending[np.abs(term_p) >= np.abs(total_p) * _EPS]
        if pending.size == 0:
            return total
    raise NumericError(
        "incomplete gamma series did not converge",
        {"a": float(a[pending[0]]), "x": float(x[pending[0]])},
    )


def _continued_fraction(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    # modified Lentz evaluation of the upper incomplete gamma continued fraction
    b = x + 1.0 - a
    c = np.full(a.shape, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    pending = np.arange(a.size)
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a[pending])
        b_p = b[pending] + 2.0
        b[pending] = b_p
        d_p = an * d[pending] + b_p
        d_p = np.where(np.abs(d_p) < _FPMIN, _FPMIN, d_p)
        c_p = b_p + an / c[pending]
        c_p = np.where(np.abs(c_p) < _FPMIN, _FPMIN, c_p)
        d_p = 1.0 / d_p
        delta = d_p * c_p
        d[pending] = d_p
        c[pending] = c_p
        h[pending] *= delta
        pending = pending[np.abs(delta - 1.0) >= _EPS]
        if pending.size == 0:
            return h
    raise NumericError(
        "incomplete gamma continued fraction did not converge",
        {"a": float(a[pending[0]]), "x": float(x[pending[0]])},
    )


def _regularized_p(a: np.ndarray, x: np.ndarray, lga: np.ndarray) -> np.ndarray:
    """P(a, x) on flat arrays that are already validated; ``lga`` is ln Gamma(a)."""
    out = np.empty(a.shape)
    with np.errstate(divide="ignore"):
        log_prefactor = a * np.log(x) - x - lga
    lower = x < a + 1.0
    if np.any(lower):
        idx = np.flatnonzero(lower)
        out[idx] = _series_sum(a[idx], x[idx]) * np.exp(log_prefactor[idx])
    if not np.all(lower):
        idx = np.flatnonzero(~lower)
        out[idx] = 1.0 - np.exp(log_prefactor[idx]) * _continued_fraction(a[idx], x[idx])
    return np.clip(out, 0.0, 1.0)


def reg_inc_gamma_p(a: ArrayLike, x: ArrayLike) -> Union[float, np.ndarray]:
    """
    Regularized lower incomplete gamma function P(a, x).

    Uses the power series for x < a + 1 and a continued fraction for the
    complement otherwise. Broadcasts over array arguments.

    Args:
        a (ArrayLike): Shape parameter(s), a > 0.
        x (ArrayLike): Evaluation point(s), x >= 0.

    Returns:
        Union[float, np.ndarray]: P(a, x) in [0, 1].

    Raises:
        DomainError: If a <= 0 or x < 0 (or either is NaN).
    """
    a_arr, x_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    if not np.all(a_arr > 0):
        raise DomainError(f"reg_inc_gamma_p requires a > 0, got a={a}")
    if not np.all(x_arr >= 0):
        raise DomainError(f"reg_inc_gamma_p requires x >= 0, got x={x}")
    flat_a = a_arr.ravel().astype(float)
    flat_x = x_arr.ravel().astype(float)
    out = _regularized_p(flat_a, flat_x, gammaln(flat_a)).reshape(a_arr.shape)
    return float(out) if out.ndim == 0 else out


def _initial_guess(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    # Wilson-Hilferty cube-root normal approximation; for small shapes or a
    # non-positive cube, fall back to the lower-tail form P ~ x^a / Gamma(a + 1).
    c = 1.0 / (9.0 * a)
    cube = 1.0 - c + ndtri(u) * np.sqrt(c)
    wilson_hilferty = a * cube**3
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        lower_tail = np.exp((np.log(u) + gammaln(a + 1.0)) / a)
    use_wh = (cube > 0) & (a >= 0.5)
    return np.where(use_wh, wilson_hilferty, lower_tail)


def _quantile_flat(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    lga = gammaln(a)
    result = np.full(a.shape, QUANTILE_FLOOR)

    # anything whose quantile sits below the floor is clamped to it
    solve = np.flatnonzero(_regularized_p(a, np.full(a.shape, QUANTILE_FLOOR), lga) < u)
    if solve.size == 0:
        return result
    a_s, u_s, lga_s = a[solve], u[solve], lga[solve]

    # Newton iterations on t = ln x inside a shrinking bracket [lo, hi]
    lo = np.full(a_s.shape, _LOG_FLOOR)
    hi = np.log(a_s + 50.0 * np.sqrt(a_s) + 100.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.log(_initial_guess(a_s, u_s))
    outside = ~np.isfinite(t) | (t <= lo) | (t >= hi)
    t = np.where(outside, 0.5 * (lo + hi), t)

    t_final = np.empty(a_s.shape)
    prev_move = np.full(a_s.shape, np.inf)
    pending = np.arange(a_s.size)
    for _ in range(QUANTILE_MAX_ITER):
        a_p, u_p, t_p, lga_p = a_s[pending], u_s[pending], t[pending], lga_s[pending]
        x_p = np.exp(t_p)
        f = _regularized_p(a_p, x_p, lga_p) - u_p

        below = f < 0
        lo[pending] = np.where(below, t_p, lo[pending])
        hi[pending] = np.where(below, hi[pending], t_p)
        lo_p, hi_p = lo[pending], hi[pending]

        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            slope = np.exp(a_p * t_p - x_p - lga_p)  # dP/dt
            t_new = t_p - f / slope
        bisect = ~np.isfinite(t_new) | (t_new <= lo_p) | (t_new >= hi_p)
        t_new = np.where(bisect, 0.5 * (lo_p + hi_p), t_new)

        move = np.abs(t_new - t_p)
        # rounding floor of the CDF itself: the exponent a*t - x - lnGamma(a) is
        # only known to about eps times its largest term
        u_tol = QUANTILE_U_TOL + 1e-15 * (np.abs(a_p * t_p) + x_p + np.abs(lga_p))
        exact = f == 0
        settled = move <= 1e-14 * np.maximum(1.0, np.abs(t_p))
        stalled = (move >= prev_move[pending]) & (np.abs(f) <= u_tol)
        done = exact | settled | stalled

        t_final[pending] = np.where(exact | stalled, t_p, t_new)
        prev_move[pending] = move
        t[pending] = t_new
        pending = pending[~done]
        if pending.size == 0:
            break
    else:
        x_left = np.exp(t[pending])
        residual = np.abs(_regularized_p(a_s[pending], x_left, lga_s[pending]) - u_s[pending])
        ok = residual <= QUANTILE_U_TOL
        t_final[pending[ok]] = t[pending[ok]]
        failed = pending[~ok]
        if failed.size:
            a_bad, u_bad = float(a_s[failed[0]]), float(u_s[failed[0]])
            logger.error(f"gamma_quantile did not converge for a={a_bad!r}, u={u_bad!r}")
            raise NumericError(
                f"gamma_quantile did not converge after {QUANTILE_MAX_ITER} iterations",
                {"a": a_bad, "u": u_bad},
            )

    result[solve] = np.maximum(np.exp(t_final), QUANTILE_FLOOR)
    return result


def gamma_quantile(a: ArrayLike, u: ArrayLike) -> Union[float, np.ndarray]:
    """
    Quantile function of the unit-scale Gamma(a) distribution.

    Solves P(a, x) = u with a Wilson-Hilferty start and Newton steps on ln x,
    falling back to bisection whenever a Newton step leaves the current bracket.
    Results are clamped to at least 1e-300. Broadcasts over array arguments.

    Args:
        a (ArrayLike): Shape parameter(s), a > 0.
        u (ArrayLike): Probability level(s) strictly inside (0, 1).

    Returns:
        Union[float, np.ndarray]: x with P(a, x) = u.

    Raises:
        DomainError: If a <= 0 or u is outside (0, 1).
        NumericError: If the iteration does not converge; carries (a, u).

    Example:
        >>> round(gamma_quantile(1.0, 0.5), 10)
        0.6931471806
    """
    a_arr, u_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(u, dtype=float))
    if not np.all(a_arr > 0):
        raise DomainError(f"gamma_quantile requires a > 0, got a={a}")
    if not np.all((u_arr > 0) & (u_arr < 1)):
        raise DomainError(f"gamma_quantile requires 0 < u < 1, got u={u}")
    out = _quantile_flat(a_arr.ravel().astype(float), u_arr.ravel().astype(float))
    out = out.reshape(a_arr.shape)
    return float(out) if out.ndim == 0 else out


def check_probability_vector(p: ArrayLike, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    """
    Validates a probability vector and returns it as a float array.

    Raises:
        DomainError: If a component is outside [0, 1] or the sum differs from 1 by more than ``atol``.
    """
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"probability vector must be a non-empty 1-D sequence, got shape {arr.shape}")
    if not np.all((arr >= 0) & (arr <= 1)):
        raise DomainError(f"probability components must lie in [0, 1]: {arr.tolist()}")
    if abs(arr.sum() - 1.0) > atol:
        raise DomainError(f"probability vector sums to {arr.sum()!r}, not 1")
    return arr


def check_concentration(alpha: ArrayLike) -> np.ndarray:
    """
    Validates a Dirichlet concentration vector (all components strictly positive).

    Raises:
        DomainError: If any component is not strictly positive.
    """
    arr = np.asarray(alpha, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"concentration must be a non-empty 1-D sequence, got shape {arr.shape}")
    if not np.all(arr > 0):
        raise DomainError(f"concentration components must be > 0: {arr.tolist()}")
    return arr


def clip_renormalize(y: ArrayLike, epsilon: float = EPSILON_CLIP) -> np.ndarray:
    """
    Clips probabilities to [epsilon, 1] and renormalizes along the last axis.

    Args:
        y (ArrayLike): Probabilities, shape (C,) or (B, C).
        epsilon (float, optional): Lower clip. Defaults to 1e-6.

    Returns:
        np.ndarray: Strictly positive probabilities summing to 1.
    """
    clipped = np.clip(np.asarray(y, dtype=float), epsilon, 1.0)
    return clipped / clipped.sum(axis=-1, keepdims=True)


def _check_noise(alpha_shape: Tuple[int, ...], u: np.ndarray) -> None:
    if u.ndim < 2 or u.shape[-1] != alpha_shape[-1]:
        raise ShapeError(
            f"noise of shape {u.shape} does not match {alpha_shape[-1]} classes"
        )


def dirichlet_sample_batch(alpha: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    Quantile-transform Dirichlet draws for a batch.

    Args:
        alpha (np.ndarray): Concentrations, shape (B, C).
        u (np.ndarray): Uniform noise, shape (B, M, C).

    Returns:
        np.ndarray: Samples, shape (B, M, C); each row lies on the simplex.
    """
    alpha = np.asarray(alpha, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_noise(alpha.shape, u)
    g = gamma_quantile(np.broadcast_to(alpha[..., None, :], u.shape), u)
    return g / g.sum(axis=-1, keepdims=True)


def dirichlet_sample(alpha: ArrayLike, noise: UniformNoiseBlock) -> np.ndarray:
    """
    Draws M Dirichlet(alpha) samples from a noise block.

    Row m is g_m / sum_c g_{m,c} with g_{m,c} = gamma_quantile(alpha_c, u_{m,c}),
    so identical inputs always give bit-identical samples.

    Args:
        alpha (ArrayLike): Concentration vector of length C.
        noise (UniformNoiseBlock): M x C uniforms.

    Returns:
        np.ndarray: Samples, shape (M, C).

    Raises:
        ShapeError: If the noise width differs from C.
        NumericError: Propagated from gamma_quantile.
    """
    alpha_arr = check_concentration(alpha)
    return dirichlet_sample_batch(alpha_arr[None, :], noise.u[None, :, :])[0]


def dirichlet_mean(alpha: ArrayLike) -> np.ndarray:
    """Mean of Dir(alpha): alpha / sum(alpha)."""
    alpha_arr = check_concentration(alpha)
    return alpha_arr / alpha_arr.sum()


def dirichlet_component_variance(alpha: ArrayLike, c: int) -> float:
    """
    Marginal variance of component ``c`` of Dir(alpha).

    Returns:
        float: alpha_c (alpha_0 - alpha_c) / (alpha_0**2 (alpha_0 + 1)).

    Raises:
        DomainError: If ``c`` is not a valid class index.
    """
    alpha_arr = check_concentration(alpha)
    if not 0 <= c < alpha_arr.size:
        raise DomainError(f"class index {c} outside [0, {alpha_arr.size})")
    total = alpha_arr.sum()
    return float(alpha_arr[c] * (total - alpha_arr[c]) / (total**2 * (total + 1.0)))


def shape_step(a: np.ndarray) -> np.ndarray:
    """
    Finite-difference step in the Gamma shape: max(1e-4 a, 1e-6), capped at a / 2
    so that a - h stays positive for tiny shapes.
    """
    return np.minimum(np.maximum(1e-4 * a, 1e-6), 0.5 * a)


def sample_derivative_batch(
    y: np.ndarray, beta: np.ndarray, u: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dirichlet samples and their derivatives with respect to beta for a batch.

    With a = beta * y, g = Q(a, u) and dg/dbeta = y * dQ/da, the shape derivative
    is a central difference that reuses the same uniforms; the quotient rule over
    G = sum_c g then gives d(sample)/d(beta), whose rows sum to zero.

    Args:
        y (np.ndarray): Clipped probabilities, shape (B, C).
        beta (np.ndarray): Concentration scales, shape (B,).
        u (np.ndarray): Uniform noise, shape (B, M, C).

    Returns:
        Tuple[np.ndarray, np.ndarray]: (samples, derivatives), both (B, M, C).
    """
    y = np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_noise(y.shape, u)
    if not np.all(beta > 0):
        raise DomainError(f"beta must be > 0, got {beta}")

    a = np.broadcast_to((beta[:, None] * y)[:, None, :], u.shape)
    h = shape_step(a)
    shapes = np.stack([a, a + h, a - h])
    g_all = gamma_quantile(shapes, np.broadcast_to(u, shapes.shape))
    g, g_plus, g_minus = g_all[0], g_all[1], g_all[2]

    dg = y[:, None, :] * (g_plus - g_minus) / (2.0 * h)
    total = g.sum(axis=-1, keepdims=True)
    samples = g / total
    derivative = (dg - samples * dg.sum(axis=-1, keepdims=True)) / total
    return samples, derivative


def sample_derivative_wrt_beta(
    y: ArrayLike, beta: float, noise: UniformNoiseBlock
) -> np.ndarray:
    """
    Derivative of each Dirichlet(beta * y) sample with respect to beta.

    Args:
        y (ArrayLike): Probability vector with every component >= epsilon clip.
        beta (float): Concentration scale, beta > 0.
        noise (UniformNoiseBlock): M x C uniforms shared by all evaluations.

    Returns:
        np.ndarray: Matrix (M, C) of d(sample)/d(beta); each row sums to 0.

    Raises:
        DomainError: If beta <= 0 or y is not a probability vector.
        NumericError: Propagated from gamma_quantile.
    """
    y_arr = check_probability_vector(y)
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    _, derivative = sample_derivative_batch(
        y_arr[None, :], np.array([float(beta)]), noise.u[None, :, :]
    )
    return derivative[0]
