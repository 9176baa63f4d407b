"""Finite-length scaling laws for spatially coupled chains on the BEC.

Three block-error models are provided:

* ``p_block_critical_phase`` integrates the fluctuation of the number of
  degree-one checks over the whole critical phase of a long chain;
* ``p_block_asymptotic`` is the closed-form large-argument expression that
  grows linearly in the chain length;
* ``p_block_single_point`` is the Gaussian tail used for short chains whose
  critical phase collapses to one point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, FitFailure, InvalidParameters

ASYMPTOTIC_MIN_N_GAP2 = 4.0


def Phi(x):
    """Standard normal c.d.f."""
    return special.ndtr(x)


def Q(x):
    """Standard normal complementary c.d.f., accurate far into the tail."""
    return special.ndtr(-np.asarray(x, dtype=float)) if np.ndim(x) else float(special.ndtr(-x))


@dataclass(frozen=True)
class ScalingParams:
    """Parameters of the scaling laws.

    ``tau_circ`` is the normalized time at which the critical phase starts;
    it depends on the ensemble and defaults to 0, which makes the critical
    phase span the whole decoding time.
    """

    alpha: float
    theta: float = 1.0
    eps_star: float = 0.4881
    tau_circ: float = 0.0
    a: int = 0
    v_unc: int = 2

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidParameters("alpha must be positive")
        if not self.theta > 0:
            raise InvalidParameters("theta must be positive")
        if not 0 < self.eps_star < 1:
            raise InvalidParameters("eps_star must lie in (0, 1)")


def omega(L, eps, a=0, v_unc=2) -> float:
    """Normalized decoding duration ``eps*L + eps*a/v_unc``."""
    return eps * L + eps * a / v_unc


def log_phi_integral(x: float) -> float:
    """``log`` of the integral of ``Phi(z) exp(z^2/2)`` over ``[0, x]``.

    The integrand is rescaled by ``exp(-x^2/2)`` so nothing overflows; the
    mass then sits in a layer of width about ``1/x`` below ``x``, which is
    passed to the quadrature as a breakpoint.
    """
    x = float(x)
    if x < 0:
        raise DomainError("integration limit must be non-negative")
    if x == 0:
        return -math.inf

    def f(z):
        return math.exp(special.log_ndtr(z) + 0.5 * (z - x) * (z + x))

    pts = [max(0.0, x - 1.0 / max(x, 1e-12))] if x > 1 else None
    val, _ = integrate.quad(f, 0.0, x, points=pts, epsabs=0.0, epsrel=1e-12, limit=200)
    return 0.5 * x * x + math.log(val)


def _check_eps(params: ScalingParams, eps: float) -> float:
    gap = params.eps_star - eps
    if gap <= 0:
        raise DomainError(f"eps={eps} is not below eps_star={params.eps_star}")
    return gap


def p_block_critical_phase(params: ScalingParams, L, N, eps) -> float:
    """Block error probability accumulated over the critical phase.

    Parameters
    ----------
    params : ScalingParams
    L, N : int
        Chain length and lifting factor.
    eps : float
        Erasure probability, strictly below ``params.eps_star``.
    """
    gap = _check_eps(params, eps)
    duration = omega(L, eps, params.a, params.v_unc) - params.tau_circ
    if duration <= 0:
        raise DomainError("critical phase has non-positive length (Omega <= tau_circ)")
    x = params.alpha * math.sqrt(N) * gap
    # rate = duration / D with D = sqrt(2 pi)/theta * integral
    log_rate = math.log(duration) + math.log(params.theta) - 0.5 * math.log(2 * math.pi) - log_phi_integral(x)
    return float(-math.expm1(-math.exp(log_rate)))


def p_block_asymptotic(params: ScalingParams, L, N, eps, with_flag: bool = False):
    """Closed-form large ``N(eps_star-eps)^2`` approximation, linear in ``L``.

    The value is clamped to ``[0, 1]``.  With ``with_flag=True`` a pair
    ``(p, valid)`` is returned where ``valid`` is False when
    ``N(eps_star-eps)^2 < 4`` or clamping was needed.
    """
    gap = _check_eps(params, eps)
    a, th = params.alpha, params.theta
    raw = (a * th * eps * L / (math.sqrt(2 * math.pi) * math.sqrt(N) * gap)
           * math.exp(-N * gap * gap / (a * a)))
    p = min(max(raw, 0.0), 1.0)
    if with_flag:
        return p, bool(N * gap * gap >= ASYMPTOTIC_MIN_N_GAP2 and raw <= 1.0)
    return p


def p_block_single_point(params: ScalingParams, N, eps) -> float:
    """Gaussian tail ``Q(sqrt(N)(eps_star-eps)/alpha)``; independent of ``L``."""
    return Q(math.sqrt(N) * (params.eps_star - eps) / params.alpha)


# ---------------------------------------------------------------------------
# fitting


@dataclass
class FitResult:
    params: ScalingParams
    residuals: np.ndarray
    cost: float
    model: str
    extras: dict = field(default_factory=dict)


MODELS = ("single_point", "critical_phase", "asymptotic")


def _predict(model, params, pts):
    out = np.empty(len(pts))
    for i, (N, eps, L) in enumerate(pts):
        if model == "single_point":
            out[i] = p_block_single_point(params, N, eps)
        elif model == "critical_phase":
            out[i] = p_block_critical_phase(params, L, N, eps)
        else:
            gap = params.eps_star - eps
            a, th = params.alpha, params.theta
            # unclamped, in log form to keep the fit smooth
            out[i] = math.exp(math.log(a * th * eps * L / (math.sqrt(2 * math.pi * N) * gap))
                              - N * gap * gap / (a * a))
    return out


def fit_scaling_params(points, model: str = "single_point", eps_star: float = 0.4881,
                       tau_circ: float = 0.0, a: int = 0, v_unc: int = 2,
                       alpha0: float | None = None, theta0: float = 1.0) -> FitResult:
    """Least-squares fit of scaling parameters in the log-probability domain.

    Parameters
    ----------
    points : iterable
        ``(N, eps, bler)`` or ``(N, eps, bler, L)`` tuples.  ``L`` is needed
        by the two long-chain models.  Points with ``bler <= 0`` are ignored.
    model : {"single_point", "critical_phase", "asymptotic"}
        ``single_point`` fits ``alpha`` only; the others fit ``alpha`` and
        ``theta``.
    eps_star : float
        Held fixed during the fit.
    """
    if model not in MODELS:
        raise InvalidParameters(f"unknown model {model!r}; choose from {MODELS}")
    rows = []
    for pt in points:
        N, eps, bler = pt[:3]
        L = pt[3] if len(pt) > 3 else None
        if model != "single_point" and L is None:
            raise InvalidParameters(f"model {model!r} needs L in every point")
        if bler > 0 and eps < eps_star:
            rows.append((float(N), float(eps), float(bler), None if L is None else float(L)))
    if len(rows) < 3 or len({(r[0], r[1], r[3]) for r in rows}) < 2:
        raise FitFailure("need at least 3 usable points spanning distinct (N, eps)")
    pts = [(r[0], r[1], r[3]) for r in rows]
    logy = np.log([r[2] for r in rows])
    two = model != "single_point"

    def make(z):
        return ScalingParams(alpha=math.exp(z[0]), theta=math.exp(z[1]) if two else 1.0,
                             eps_star=eps_star, tau_circ=tau_circ, a=a, v_unc=v_unc)

    def resid(z):
        with np.errstate(divide="ignore"):
            pred = np.log(np.maximum(_predict(model, make(z), pts), 1e-300))
        return pred - logy

    if alpha0 is None:
        grid = np.exp(np.linspace(np.log(0.05), np.log(20), 41))
        costs = [np.sum(resid([np.log(g), np.log(theta0)]) ** 2) for g in grid]
        alpha0 = float(grid[int(np.nanargmin(costs))])
    z0 = [math.log(alpha0), math.log(theta0)] if two else [math.log(alpha0)]
    try:
        sol = optimize.least_squares(resid, z0, method="lm" if len(rows) > len(z0) else "trf",
                                     xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    except (ValueError, DomainError) as exc:
        raise FitFailure(str(exc)) from exc
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitFailure(f"least squares did not converge: {sol.message}")
    return FitResult(make(sol.x), sol.fun, float(2 * sol.cost), model,
                     {"nfev": sol.nfev, "message": sol.message})
