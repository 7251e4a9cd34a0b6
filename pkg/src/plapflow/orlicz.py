"""Energy densities with (p, delta)-structure and the vector operators they induce.

The canonical density used everywhere is the one with derivative

    phi'(t) = (delta + t)^(p-2) * t,        1 < p <= 2,  delta >= 0.

Shifting this density by alpha >= 0 stays inside the family: the shifted
derivative is (delta + alpha + t)^(p-2) * t, i.e. the same density with
delta replaced by delta + alpha.  Every shifted quantity below therefore
has a closed form, which keeps the inequality certifications exact up to
floating point.

Two regularizations of the degenerate weight at zero gradient are supported:
the additive shift (shifted density, weight (delta+eps+t)^(p-2)) and the
quadratic norm (weight (t^2 + eps^2)^((p-2)/2)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ADDITIVE_SHIFT = "additive-shift"
QUADRATIC_NORM = "quadratic-norm"
REGULARIZATION_KINDS = (ADDITIVE_SHIFT, QUADRATIC_NORM)

# Absolute tolerance for inequality checks on unit-scale inputs; scaled by
# max(1, |lhs|, |rhs|).  The inequalities are exact, this covers rounding only.
INEQ_TOL = 1e-10

# ---------------------------------------------------------------------------
# Empirical regression constants, measured with certify_lemmas(samples=10**6,
# seed=42) over p in {1.2, 1.5, 1.8, 2.0}, delta in {0, 0.1}, eps in [1e-6, 1],
# alpha in [0, 5], |a|, |b| in [0, 10]; rounded outward.  The equivalence
# constants are not available in closed form, so they are pinned by sampling
# and re-checked as regressions.
# ---------------------------------------------------------------------------

# sup of |(w(|a|) - w(|b|)) a| / (w(|b|) |a - b|) for the lagged weight
# w(t) = phi_eps'(t)/t; dense sweeps give 0.99947, approaching 1 from below
# as |a|/|b| grows along collinear pairs.
LAGGED_WEIGHT_RATIO_MAX = 1.0 + 1e-6

# sup of |S_eps(a) - S_eps(b)| / (|a-b| (eps^2+|a|^2+|b|^2)^((p-2)/2));
# swept sup 1.48902 at p = 1.2 (small nearly-antipodal b, eps -> 0).
S_EPS_LIPSCHITZ_MAX = 1.5

# Pairwise ratio intervals for the three monotonicity quantities (inner
# product form, shifted-density form, quotient form); swept extremes over
# the grid were [0.405, 4.532], [0.348, 1.742], [0.338, 0.863].
MONOTONE_RATIO_BOUNDS = {
    "inner-over-shifted": (0.38, 4.8),
    "inner-over-quotient": (0.33, 1.8),
    "shifted-over-quotient": (0.32, 0.9),
}

# (phi_eps(t) + eps^p + delta^p) / (t^p + eps^p + delta^p), per p; the ratio
# never exceeds 1 since phi_eps'(t) <= t^(p-1); swept infima 0.6069, 0.5712,
# 0.5351, 0.5000.
EQUI_SANDWICH_BOUNDS = {
    1.2: (0.58, 1.0 + 1e-9),
    1.5: (0.54, 1.0 + 1e-9),
    1.8: (0.51, 1.0 + 1e-9),
    2.0: (0.4999, 1.0 + 1e-9),
}


@dataclass(frozen=True)
class NFunctionPD:
    """Canonical N-function with (p, delta)-structure."""

    p: float
    delta: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.p) or not 1.0 < self.p <= 2.0:
            raise ValueError(f"exponent p must lie in (1, 2], got {self.p}")
        if not np.isfinite(self.delta) or self.delta < 0.0:
            raise ValueError(f"shift delta must be >= 0, got {self.delta}")

    @property
    def kappa0(self):
        return self.p - 1.0

    @property
    def kappa1(self):
        return 1.0

    def phi(self, t):
        """Antiderivative of phi'; phi(0) = 0, equals t^p/p for delta = 0."""
        return _phi_closed(self.p, self.delta, np.asarray(t, dtype=float))

    def phi_prime(self, t):
        t = np.asarray(t, dtype=float)
        return (self.delta + t) ** (self.p - 2.0) * t

    def phi_prime2(self, t):
        """Second derivative, defined for t > 0 (and t = 0 when delta > 0)."""
        t = np.asarray(t, dtype=float)
        return (self.delta + t) ** (self.p - 3.0) * ((self.p - 1.0) * t + self.delta)

    def shifted(self, alpha):
        """Shift by alpha; the family is closed, only delta moves."""
        if alpha < 0.0:
            raise ValueError(f"shift alpha must be >= 0, got {alpha}")
        return NFunctionPD(self.p, self.delta + alpha)


def _phi_closed(p, delta, t):
    # int_0^t (delta+s)^(p-2) s ds, elementwise for array p/delta/t.  Written
    # with expm1/log1p so the difference stays accurate for t << delta:
    # delta^p [expm1(p u)/p - expm1((p-1) u)/(p-1)] with u = log1p(t/delta).
    d = np.asarray(delta, dtype=float)
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    d_b, t_b, p_b = np.broadcast_arrays(d, t, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.log1p(t_b / np.where(d_b > 0.0, d_b, 1.0))
        shifted = d_b**p_b * (np.expm1(p_b * u) / p_b
                              - np.expm1((p_b - 1.0) * u) / (p_b - 1.0))
        plain = t_b**p_b / p_b
    out = np.where(d_b > 0.0, shifted, plain)
    if out.ndim == 0:
        return float(out)
    return out


def _check_scalar(name, value, minimum=None, strict=False):
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if minimum is not None:
        if strict and not value > minimum:
            raise ValueError(f"{name} must be > {minimum}, got {value}")
        if not strict and not value >= minimum:
            raise ValueError(f"{name} must be >= {minimum}, got {value}")


def _ineq_scale(lhs, rhs):
    return INEQ_TOL * np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


def phi_eval(nf, t):
    """Evaluate phi(t) in closed form."""
    _check_scalar("t", t, minimum=0.0)
    return float(nf.phi(t))


def phi_shifted_prime(nf, alpha, t):
    """Derivative of the alpha-shifted density: (delta+alpha+t)^(p-2) t."""
    _check_scalar("alpha", alpha, minimum=0.0)
    _check_scalar("t", t, minimum=0.0)
    if t == 0.0:
        return 0.0
    return float((nf.delta + alpha + t) ** (nf.p - 2.0) * t)


def phi_shifted(nf, alpha, t):
    """The alpha-shifted density itself, in closed form."""
    _check_scalar("alpha", alpha, minimum=0.0)
    _check_scalar("t", t, minimum=0.0)
    return float(nf.shifted(alpha).phi(t))


def _vnorm(a):
    return np.sqrt(np.sum(a * a, axis=-1))


def shift_weight(nf, alpha, r):
    """Weight phi_alpha'(r)/r = (delta+alpha+r)^(p-2); inf where the base is 0."""
    base = nf.delta + alpha + np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return base ** (nf.p - 2.0)


def op_A(nf, alpha, a):
    """Vector operator of the alpha-shifted density, A_alpha(0) = 0."""
    a = np.asarray(a, dtype=float)
    r = _vnorm(a)
    w = shift_weight(nf, alpha, r)
    w = np.where(r > 0.0, w, 0.0)
    return w[..., None] * a


def op_S_eps(p, eps, a):
    """Quadratic-norm operator a * (|a|^2 + eps^2)^((p-2)/2); S(0) = 0 at eps = 0."""
    if not 1.0 < p <= 2.0:
        raise ValueError(f"exponent p must lie in (1, 2], got {p}")
    _check_scalar("eps", eps, minimum=0.0)
    a = np.asarray(a, dtype=float)
    base = np.sum(a * a, axis=-1) + eps * eps
    with np.errstate(divide="ignore"):
        w = base ** ((p - 2.0) / 2.0)
    w = np.where(base > 0.0, w, 0.0)
    return w[..., None] * a


def check_uniform_eps_bound(nf, a, eps):
    """|A_eps(a) - A_0(a)| against (1 - kappa0) phi'(eps)."""
    _check_scalar("eps", eps, minimum=0.0, strict=True)
    a = np.asarray(a, dtype=float)
    lhs = float(_vnorm(op_A(nf, eps, a) - op_A(nf, 0.0, a)))
    rhs = float((1.0 - nf.kappa0) * nf.phi_prime(eps))
    holds = lhs <= rhs + _ineq_scale(lhs, rhs)
    return lhs, rhs, bool(holds)


def check_orlicz_stability(nf, a, b, eps):
    """Weighted convexity-type inequality used for energy decay.

    lhs = (phi_eps'(|a|)/|a|) b.(b-a)
    rhs = phi_eps(|b|) - phi_eps(|a|) + (1/2)(phi_eps'(|a|)/|a|) |b-a|^2
    """
    _check_scalar("eps", eps, minimum=0.0)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ra, rb = float(_vnorm(a)), float(_vnorm(b))
    if nf.delta + eps + ra == 0.0:
        # Degenerate weight at a = 0 with no shift: both sides diverge unless
        # b = 0; the inequality holds in the limit.
        if rb == 0.0:
            return 0.0, 0.0, True
        return np.inf, np.inf, True
    w = float(shift_weight(nf, eps, ra))
    shifted = nf.shifted(eps)
    lhs = w * float(np.dot(b, b - a))
    rhs = float(shifted.phi(rb) - shifted.phi(ra)) + 0.5 * w * float(np.sum((b - a) ** 2))
    holds = lhs >= rhs - _ineq_scale(lhs, rhs)
    return lhs, rhs, bool(holds)


def check_lagged_weight_estimate(nf, a, b, eps):
    """Lagged-weight swap estimate; the bound constant is measured, not given.

    Returns (lhs, bound_unit, ratio) with
    lhs = |(phi_eps'(|a|)/|a| - phi_eps'(|b|)/|b|) a| and
    bound_unit = (phi_eps'(|b|)/|b|) |a-b|.
    """
    _check_scalar("eps", eps, minimum=0.0)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rb = float(_vnorm(b))
    if rb == 0.0:
        raise ValueError("b must be nonzero")
    wb = float(shift_weight(nf, eps, rb))
    # (w_a - w_b) a written as A_eps(a) - w_b a, which is finite even when
    # the weight at |a| = 0 is not.
    lhs = float(_vnorm(op_A(nf, eps, a) - wb * a))
    bound_unit = wb * float(_vnorm(a - b))
    ratio = lhs / bound_unit if bound_unit > 0.0 else 0.0
    return lhs, bound_unit, ratio


def check_monotonicity_equivalence(nf, a, b, alpha):
    """The three mutually equivalent monotonicity quantities for a != b.

    Returns (inner, shifted_phi_val, quotient_form); all are positive and
    their pairwise ratios stay inside MONOTONE_RATIO_BOUNDS.
    """
    _check_scalar("alpha", alpha, minimum=0.0)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a - b
    s = float(_vnorm(diff))
    if s == 0.0:
        raise ValueError("degenerate pair: a must differ from b")
    inner = float(np.sum((op_A(nf, alpha, a) - op_A(nf, alpha, b)) * diff))
    ra, rb = float(_vnorm(a)), float(_vnorm(b))
    shifted_phi_val = float(nf.shifted(alpha + ra).phi(s))
    quotient_form = float(shift_weight(nf, alpha, ra + rb)) * s * s
    return inner, shifted_phi_val, quotient_form


# ---------------------------------------------------------------------------
# Randomized certification
# ---------------------------------------------------------------------------

P_GRID = (1.2, 1.5, 1.8, 2.0)
DELTA_GRID = (0.0, 0.1)


@dataclass
class CheckResult:
    name: str
    samples: int
    violations: int
    stats: dict

    @property
    def passed(self):
        return self.violations == 0


def _sample_vectors(rng, n, radius):
    r = rng.uniform(0.0, radius, size=n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def certify_lemmas(samples=1_000_000, seed=42, p_grid=P_GRID, delta_grid=DELTA_GRID,
                   eps_range=(1e-6, 1.0), radius=10.0, alpha_max=5.0):
    """Sample every certified inequality and report violation counts.

    All checks are vectorized; a violation is an inequality broken beyond the
    floating-point tolerance, or a measured ratio escaping its frozen
    regression interval.
    """
    rng = np.random.default_rng(seed)
    n = int(samples)
    p = rng.choice(np.asarray(p_grid, dtype=float), size=n)
    delta = rng.choice(np.asarray(delta_grid, dtype=float), size=n)
    eps = rng.uniform(eps_range[0], eps_range[1], size=n)
    alpha = rng.uniform(0.0, alpha_max, size=n)
    a = _sample_vectors(rng, n, radius)
    b = _sample_vectors(rng, n, radius)
    ra = _vnorm(a)
    rb = _vnorm(b)
    diff = a - b
    s = _vnorm(diff)
    ok = s > 0.0  # excludes the measure-zero coincidence a == b

    with np.errstate(divide="ignore", invalid="ignore"):
        return _run_checks(n, p, delta, eps, alpha, a, b, ra, rb, diff, s, ok)


def _run_checks(n, p, delta, eps, alpha, a, b, ra, rb, diff, s, ok):

    results = []

    def weight(shift, r):
        return (delta + shift + r) ** (p - 2.0)

    def a_op(shift, vec, r):
        w = np.where(r > 0.0, weight(shift, r), 0.0)
        return w[:, None] * vec

    # --- strict monotonicity of A_alpha ------------------------------------
    inner = np.sum((a_op(alpha, a, ra) - a_op(alpha, b, rb)) * diff, axis=-1)
    viol = int(np.count_nonzero(ok & (inner <= 0.0)))
    results.append(CheckResult("monotonicity", n, viol,
                               {"min_inner": float(np.min(inner[ok]))}))

    # --- uniform eps-bound |A_eps - A_0| <= (1-kappa0) phi'(eps) ------------
    lhs = _vnorm(a_op(eps, a, ra) - a_op(0.0, a, ra))
    rhs = (2.0 - p) * (delta + eps) ** (p - 2.0) * eps
    viol = int(np.count_nonzero(lhs > rhs + _ineq_scale(lhs, rhs)))
    results.append(CheckResult("uniform-eps-bound", n, viol,
                               {"max_excess": float(np.max(lhs - rhs))}))

    # --- Orlicz stability ----------------------------------------------------
    w_a = weight(eps, ra)
    phi_b = _phi_closed(p, delta + eps, rb)
    phi_a = _phi_closed(p, delta + eps, ra)
    lhs = w_a * np.sum(b * (b - a), axis=-1)
    rhs = phi_b - phi_a + 0.5 * w_a * s * s
    viol = int(np.count_nonzero(lhs < rhs - _ineq_scale(lhs, rhs)))
    results.append(CheckResult("orlicz-stability", n, viol,
                               {"min_margin": float(np.min(lhs - rhs))}))

    # --- kappa bracket (exact in closed form, 1e-12 relative) ---------------
    r = np.where(ra > 0.0, ra, 1.0)  # avoid r = 0 (phi'' undefined there)
    pp = (delta + r) ** (p - 2.0) * r
    rpp2 = r * (delta + r) ** (p - 3.0) * ((p - 1.0) * r + delta)
    tol = 1e-12 * np.maximum(1.0, pp)
    viol = int(np.count_nonzero((rpp2 < (p - 1.0) * pp - tol) | (rpp2 > pp + tol)))
    results.append(CheckResult("kappa-bracket", n, viol,
                               {"max_ratio": float(np.max(rpp2 / pp)),
                                "min_ratio": float(np.min(rpp2 / pp))}))

    # --- (C2): phi'(r)/r nonincreasing --------------------------------------
    r1 = np.minimum(ra, rb)
    r2 = np.maximum(ra, rb)
    pair_ok = r2 > r1
    w1 = (delta + r1) ** (p - 2.0)  # may be inf at r1 = delta = 0, still ordered
    w2 = (delta + r2) ** (p - 2.0)
    viol = int(np.count_nonzero(pair_ok & (w1 < w2 - 1e-12 * np.maximum(1.0, w2))))
    results.append(CheckResult("weight-nonincreasing", n, viol, {}))

    # --- lagged weight ratio (regression against the frozen sup) ------------
    has_b = rb > 0.0
    wb = np.where(has_b, weight(eps, rb), 1.0)
    lhs = _vnorm(a_op(eps, a, ra) - wb[:, None] * a)
    denom = wb * s
    good = has_b & (denom > 0.0)
    ratio = np.where(good, lhs / np.where(good, denom, 1.0), 0.0)
    max_ratio = float(np.max(ratio))
    viol = int(np.count_nonzero(ratio > LAGGED_WEIGHT_RATIO_MAX))
    results.append(CheckResult("lagged-weight-ratio", n, viol,
                               {"max_ratio": max_ratio,
                                "frozen_bound": LAGGED_WEIGHT_RATIO_MAX}))

    # --- equivalence ratios of the monotonicity forms ------------------------
    shifted_val = _phi_closed(p, delta + alpha + ra, s)
    quotient = weight(alpha, ra + rb) * s * s
    q1 = np.where(ok, inner / np.where(ok, shifted_val, 1.0), 1.0)
    q2 = np.where(ok, inner / np.where(ok, quotient, 1.0), 1.0)
    q3 = np.where(ok, shifted_val / np.where(ok, quotient, 1.0), 1.0)
    viol = 0
    stats = {}
    for key, q in (("inner-over-shifted", q1), ("inner-over-quotient", q2),
                   ("shifted-over-quotient", q3)):
        lo, hi = MONOTONE_RATIO_BOUNDS[key]
        viol += int(np.count_nonzero((q < lo) | (q > hi)))
        stats[key] = (float(np.min(q[ok])), float(np.max(q[ok])))
    results.append(CheckResult("monotonicity-equivalence", n, viol, stats))

    # --- sandwich for the shifted density ------------------------------------
    t = np.abs(ra)
    num = _phi_closed(p, delta + eps, t) + eps**p + delta**p
    den = t**p + eps**p + delta**p
    q = num / den
    viol = 0
    stats = {}
    for pv in sorted(set(float(x) for x in p)):
        sel = p == pv
        qs = q[sel]
        stats[f"p={pv}"] = (float(np.min(qs)), float(np.max(qs)))
        bounds = EQUI_SANDWICH_BOUNDS.get(pv)
        if bounds is not None:
            viol += int(np.count_nonzero((qs < bounds[0]) | (qs > bounds[1])))
    results.append(CheckResult("shifted-density-sandwich", n, viol, stats))

    # --- quadratic-norm operator difference quotient (regression) ------------
    s_a = (ra * ra + eps * eps) ** ((p - 2.0) / 2.0)
    s_b = (rb * rb + eps * eps) ** ((p - 2.0) / 2.0)
    num = _vnorm(s_a[:, None] * a - s_b[:, None] * b)
    den = s * (eps * eps + ra * ra + rb * rb) ** ((p - 2.0) / 2.0)
    q = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
    max_q = float(np.max(q))
    viol = int(np.count_nonzero(q > S_EPS_LIPSCHITZ_MAX))
    results.append(CheckResult("s-eps-difference-quotient", n, viol,
                               {"max_ratio": max_q,
                                "frozen_bound": S_EPS_LIPSCHITZ_MAX}))

    return results
