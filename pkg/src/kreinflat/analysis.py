"""Capacity analysis: penalty chains, generalization bounds, sparsity.

Scalar recursions evaluate the per-layer and flat regularization penalties of
a trained network (and their positive companions), several Rademacher-type
bounds over the induced kernel ball, a concave growth envelope, a Monte-Carlo
lower estimate of the empirical Rademacher complexity, and the 2/d-power
sparsity profile of the flat weight/metric pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import activations as act
from . import kreinkernel as kk
from . import netcore
from . import pushforward as pf
from .errors import DomainError

VARIANTS = ("krein", "associated")


def _specs(arch, variant):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if variant == "associated":
        return [act.associated(s) for s in arch.activations]
    return list(arch.activations)


def _eval(spec, value, layer):
    try:
        return act.evaluate(spec, value)
    except DomainError as exc:
        raise DomainError(f"layer {layer}: {exc}", layer=layer) from exc


# ---------------------------------------------------------------------------
# penalty chains
# ---------------------------------------------------------------------------

def layer_penalty(arch, weights, q, variant="krein", recorder=None):
    """The flat-space norm contribution of layer q's pushed weight vector.

    Evaluated by the scalar chain: propagate the input dimension through the
    layers below q (width factors strictly below q-1), push each row norm of
    W_q through sigma_q, then propagate the sum through the layers above.
    ``recorder`` (a per-layer list) collects the largest argument handed to
    each activation, which is what interval Lipschitz constants must cover.
    """
    netcore.check_shapes(arch, weights)
    d = arch.depth
    if not 0 <= q < d:
        raise ValueError(f"layer {q} out of range")
    specs = _specs(arch, variant)

    def note(k, value):
        if recorder is not None:
            recorder[k] = max(recorder[k], abs(float(value)))

    base = 1.0
    if q >= 1:
        t = float(arch.input_dim)
        for k in range(q):
            note(k, t)
            t = _eval(specs[k], t, k)
            if k <= q - 2:
                t *= arch.widths[k]
        base = t
    rows = np.asarray(weights[q], dtype=float)
    args = np.sum(rows * rows, axis=1) * base
    s = 0.0
    for a in args:
        note(q, a)
        s += _eval(specs[q], float(a), q)
    for k in range(q + 1, d):
        note(k, s)
        s = _eval(specs[k], s, k)
        if k <= d - 2:
            s *= arch.widths[k]
    return float(s)


def flat_penalty(arch, weights, variant="krein", recorder=None):
    """The flat-space norm of the full network weight vector, <<v, v>>.

    Row norms of the first layer seed the chain; every later layer mixes with
    its squared weights and applies its activation.  The output is a scalar
    because the last width is 1.
    """
    netcore.check_shapes(arch, weights)
    specs = _specs(arch, variant)

    def note(k, values):
        if recorder is not None:
            recorder[k] = max(recorder[k], float(np.max(np.abs(values))))

    w0 = np.asarray(weights[0], dtype=float)
    args = np.sum(w0 * w0, axis=1)
    note(0, args)
    try:
        t = act.evaluate_array(specs[0], args)
    except DomainError as exc:
        raise DomainError(f"layer 0: {exc}", layer=0) from exc
    for k in range(1, arch.depth):
        wk = np.asarray(weights[k], dtype=float)
        args = (wk * wk) @ t
        note(k, args)
        try:
            t = act.evaluate_array(specs[k], args)
        except DomainError as exc:
            raise DomainError(f"layer {k}: {exc}", layer=k) from exc
    return float(t[0])


def chain_intervals(arch, weights, variant="associated"):
    """Per-layer sup of |arguments| over all penalty chains.

    Lipschitz constants taken on [0, m_k] with these m_k are valid for every
    inequality the penalty chains enter.
    """
    recorder = [0.0] * arch.depth
    for q in range(arch.depth):
        layer_penalty(arch, weights, q, variant, recorder=recorder)
    flat_penalty(arch, weights, variant, recorder=recorder)
    return recorder


def weight_ball_radius(arch, weights, reg_scale=None):
    """reg_scale * sum_q ||W_q||_F^2 (reg_scale defaults to 1/depth)."""
    netcore.check_shapes(arch, weights)
    scale = 1.0 / arch.depth if reg_scale is None else float(reg_scale)
    return scale * sum(weights.frobenius_sq())


def svm_ball_radius(radius, lipschitz, depth):
    """(L * radius)^depth: the flat ball that contains the network family."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    return (lipschitz * radius) ** depth


# ---------------------------------------------------------------------------
# Rademacher bounds
# ---------------------------------------------------------------------------

@dataclass
class BoundReport:
    weight_ball_radius: float
    svm_ball_radius: float
    width_gm: float
    lipschitz_gm: float
    kernel_trace_mean: float
    bound_kernel_trace: float
    bound_linear: Optional[float]
    bound_growth: Optional[float]
    empirical_estimate: Optional[float]
    sample_size: int


def rademacher_bound_ball(ball_radius, kernel_trace_mean, n):
    """sqrt(ball_radius * mean Kbar(x, x) / n)."""
    if ball_radius < 0 or kernel_trace_mean < 0:
        raise ValueError("ball radius and kernel trace must be nonnegative")
    if n < 1:
        raise ValueError("n must be positive")
    return math.sqrt(ball_radius * kernel_trace_mean / n)


def _sample_array(arch, sample):
    xs = np.asarray(sample, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != arch.input_dim:
        raise ValueError(f"sample must be (N, {arch.input_dim})")
    if xs.shape[0] == 0:
        raise ValueError("sample is empty")
    return xs


def rademacher_bound_net(arch, weights_or_radius, sample, n=None, empirical_estimate=None):
    """Every bound the architecture supports, as one BoundReport.

    The kernel-trace bound is always computed (global Lipschitz constants are
    required); the closed linear form only for all-linear networks; the
    growth-envelope form only when every activation is odd and concave on the
    nonnegative axis.  Domain violations in the associated kernel are reported
    with the offending sample index.
    """
    xs = _sample_array(arch, sample)
    count = xs.shape[0] if n is None else int(n)
    if isinstance(weights_or_radius, netcore.WeightSet):
        radius = weight_ball_radius(arch, weights_or_radius)
    else:
        radius = float(weights_or_radius)
    width_gm, lip, _ = netcore.geometric_means(arch)  # m = inf
    if lip is None:
        raise ValueError(
            "some activation has no global Lipschitz constant; "
            "the kernel-trace bound is unavailable"
        )
    ball = svm_ball_radius(radius, lip, arch.depth)
    defn = kk.KernelDefinition(arch, "krein")
    trace = 0.0
    for i, x in enumerate(xs):
        try:
            trace += kk.associated_kernel(defn, x, x)
        except DomainError as exc:
            raise DomainError(f"sample {i}: {exc}", layer=exc.layer, location=i) from exc
    trace /= xs.shape[0]
    report = BoundReport(
        weight_ball_radius=radius,
        svm_ball_radius=ball,
        width_gm=width_gm,
        lipschitz_gm=lip,
        kernel_trace_mean=trace,
        bound_kernel_trace=rademacher_bound_ball(ball, trace, count),
        bound_linear=None,
        bound_growth=None,
        empirical_estimate=empirical_estimate,
        sample_size=count,
    )
    sq_mean = float(np.mean(np.sum(xs * xs, axis=1)))
    if all(s.kind == "linear" for s in arch.activations):
        report.bound_linear = math.sqrt(
            (width_gm * lip * radius) ** arch.depth * sq_mean / count
        )
    if all(act.is_odd_concave(s) for s in arch.activations):
        report.bound_growth = tight_bound(arch, radius, xs, count).general
    return report


def growth_envelope(arch, xi):
    """The scalar envelope chaining sigma_q(depth * sqrt(width) * . ).

    Requires every activation to be odd and concave on the nonnegative axis
    (so the envelope really dominates the network's norm growth).
    """
    bad = [q for q, s in enumerate(arch.activations) if not act.is_odd_concave(s)]
    if bad:
        raise ValueError(
            f"growth envelope needs odd, concave-on-nonnegatives activations; "
            f"layers {bad} do not qualify"
        )
    d = arch.depth
    t = _eval(arch.activations[0], float(xi), 0)
    for k in range(1, d):
        t = _eval(arch.activations[k], d * math.sqrt(arch.widths[k - 1]) * t, k)
    return float(t)


@dataclass
class TightBound:
    general: float
    lipschitz_form: Optional[float]
    bounded_form: Optional[float]
    bounded_layer: Optional[int]


def _geomean(values):
    if not values:
        return 1.0
    return math.exp(sum(math.log(v) for v in values) / len(values))


def tight_bound(arch, radius, sample, n=None):
    """Growth-envelope Rademacher bounds (three tightness levels).

    general        : max(1, radius^d)/sqrt(n) * sqrt(mean envelope(|x|)^2)
    lipschitz_form : replaces the envelope by its global Lipschitz cap
    bounded_form   : discards everything below the deepest [0,1]-bounded
                     activation (None when there is none)
    """
    xs = _sample_array(arch, sample)
    count = xs.shape[0] if n is None else int(n)
    d = arch.depth
    prefactor = max(1.0, float(radius) ** d) / math.sqrt(count)
    norms = np.sqrt(np.sum(xs * xs, axis=1))
    env = np.array([growth_envelope(arch, v) for v in norms])
    general = prefactor * math.sqrt(float(np.mean(env * env)))

    def try_lips(specs):
        try:
            return [act.lipschitz_on(s, math.inf) for s in specs]
        except ValueError:
            return None  # some layer is only locally Lipschitz

    sq_mean = float(np.mean(np.sum(xs * xs, axis=1)))
    lips = try_lips(arch.activations)
    lipschitz_form = None
    if lips is not None:
        width_gm = _geomean([float(h) for h in arch.widths])
        lipschitz_form = (
            prefactor
            * (d * math.sqrt(width_gm) * _geomean(lips)) ** d
            * math.sqrt(sq_mean)
        )

    bounded = [q for q, s in enumerate(arch.activations) if act.is_bounded_by_one(s)]
    bounded_form = None
    bounded_layer = None
    if bounded:
        q = max(bounded)
        tail_lips = try_lips(arch.activations[q + 1 :])
        if tail_lips is not None:
            bounded_layer = q
            tail_widths = [float(h) for h in arch.widths[q + 1 :]]
            bounded_form = prefactor * (
                d * math.sqrt(_geomean(tail_widths)) * _geomean(tail_lips)
            ) ** (d - q - 1)
    return TightBound(general, lipschitz_form, bounded_form, bounded_layer)


# ---------------------------------------------------------------------------
# empirical Rademacher complexity (Monte-Carlo lower estimate)
# ---------------------------------------------------------------------------

def empirical_rademacher(
    arch, radius, sample, trials=200, hypothesis_draws=200, seed=0
):
    """Monte-Carlo lower estimate of the empirical Rademacher complexity.

    Hypotheses are weight sets drawn from per-layer Gaussians scaled so the
    expected ball radius is half the target, rejection-sampled (at most 10
    attempts each) into the radius ball and the evaluable domain.  One shared
    hypothesis pool serves every sign trial; trials and draws get their own
    derived seeds, so the result only depends on the arguments.

    The true complexity takes a supremum over the whole ball, so this is a
    lower estimate by construction.
    """
    xs = _sample_array(arch, sample)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    n = xs.shape[0]
    root = np.random.SeedSequence(seed)
    pool_seq, eps_seq = root.spawn(2)
    pool_children = pool_seq.spawn(hypothesis_draws)
    eps_children = eps_seq.spawn(trials)

    shapes = arch.layer_shapes()
    rows = []
    for child in pool_children:
        rng = np.random.default_rng(child)
        for _ in range(10):
            mats = [
                rng.normal(0.0, math.sqrt(0.5 * radius / (h * f)) if radius > 0 else 0.0,
                           size=(h, f))
                for h, f in shapes
            ]
            weights = netcore.WeightSet(tuple(mats))
            if weight_ball_radius(arch, weights) > radius:
                continue
            try:
                values = netcore.forward_batch(arch, weights, xs)
            except DomainError:
                continue
            if not np.all(np.isfinite(values)):
                continue
            rows.append(values)
            break
    if not rows:
        raise DomainError(
            "no admissible hypothesis draw found inside the radius ball"
        )
    pool = np.vstack(rows)  # (accepted, N)
    total = 0.0
    for child in eps_children:
        rng = np.random.default_rng(child)
        eps = rng.integers(0, 2, size=n) * 2.0 - 1.0
        total += float(np.max(np.abs(pool @ eps))) / n
    return total / trials


# ---------------------------------------------------------------------------
# sparsity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SparsityConstants:
    width_gm: float
    lipschitz_assoc_gm: float
    input_dim: int
    weight_ball_radius: float


@dataclass
class SparsityProfile:
    bridge_norm: float
    bridge_bound: float
    weight_sup: float
    weight_sup_bound: float
    epsilon_counts: list
    valid_epsilon_max: float


def _values(vec):
    if isinstance(vec, pf.SeriesVector):
        return vec.values
    return np.asarray(vec, dtype=float)


def sparsity_profile(metric, weight, depth, constants, epsilons=()):
    """The 2/depth-power sparsity profile of the flat pair (g, v).

    bridge_norm = sum_i |g_i v_i|^(2/depth), computed in log space so
    products far below the smallest positive float still contribute.
    epsilon_counts holds (epsilon, count above epsilon, ceiling) triples,
    the ceiling being bridge_bound * epsilon^(-2/depth) floored.
    """
    g = _values(metric)
    v = _values(weight)
    if isinstance(metric, pf.SeriesVector) and isinstance(weight, pf.SeriesVector):
        if not metric.aligned_with(weight):
            raise ValueError("metric and weight vectors live on different spaces")
    if g.shape != v.shape:
        raise ValueError("metric and weight vectors must have equal length")
    d = int(depth)
    if d < 1:
        raise ValueError("depth must be positive")
    c = constants
    bridge_bound = (
        (c.width_gm * c.lipschitz_assoc_gm) ** d
        * c.input_dim
        * c.weight_ball_radius
        / c.width_gm**2
    )
    mask = (g != 0.0) & (v != 0.0)
    logs = np.log(np.abs(g[mask])) + np.log(np.abs(v[mask]))
    bridge_norm = float(np.sum(np.exp((2.0 / d) * logs))) if logs.size else 0.0
    weight_sup = float(np.max(np.abs(v))) if v.size else 0.0
    metric_sup = float(np.max(np.abs(g))) if g.size else 0.0
    counts = []
    for eps in epsilons:
        eps = float(eps)
        if eps <= 0:
            raise ValueError("epsilon thresholds must be positive")
        count = int(np.sum(logs > math.log(eps))) if logs.size else 0
        cap = math.floor(bridge_bound * eps ** (-2.0 / d))
        counts.append((eps, count, cap))
    return SparsityProfile(
        bridge_norm=bridge_norm,
        bridge_bound=bridge_bound,
        weight_sup=weight_sup,
        weight_sup_bound=float(c.weight_ball_radius) ** d,
        epsilon_counts=counts,
        valid_epsilon_max=d * c.weight_ball_radius * metric_sup,
    )
