"""Indefinite network kernels and their positive-definite companions.

For a network whose layers all receive the same scalar recursion, the flat
machine's inner product collapses to

    K(x, x')    : s = <x, x'>; s = sigma_q(s), then s *= H_q below the top
    Kbar(x, x') : the same chain with every sigma replaced by its
                  associated function (coefficients |a_i|).

K splits as K = K_plus - K_minus along the sign of the flat metric; the
companion Kbar = K_plus + K_minus is a positive-definite kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import activations as act
from . import pushforward as pf
from .errors import DomainError

VARIANTS = ("krein", "associated")


@dataclass(frozen=True)
class KernelDefinition:
    arch: object
    variant: str = "krein"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


def _chain(arch, value, associated):
    for q in range(arch.depth):
        spec = arch.activations[q]
        if associated:
            spec = act.associated(spec)
        try:
            value = act.evaluate(spec, value)
        except DomainError as exc:
            raise DomainError(f"layer {q}: {exc}", layer=q) from exc
        if q < arch.depth - 1:
            value *= arch.widths[q]
    return value


def _dot(arch, x, xp):
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != (arch.input_dim,) or xp.shape != (arch.input_dim,):
        raise ValueError(
            f"inputs must have shape ({arch.input_dim},), got {x.shape} and {xp.shape}"
        )
    return float(x @ xp)


def kernel(defn, x, xp):
    """The (possibly indefinite) network kernel K(x, x')."""
    if defn.variant != "krein":
        raise ValueError("kernel() is the krein variant; use associated_kernel()")
    return _chain(defn.arch, _dot(defn.arch, x, xp), associated=False)


def associated_kernel(defn, x, xp):
    """The positive-definite companion Kbar(x, x') (any definition variant)."""
    return _chain(defn.arch, _dot(defn.arch, x, xp), associated=True)


def kernel_value(defn, x, xp):
    """K or Kbar according to defn.variant."""
    if defn.variant == "krein":
        return kernel(defn, x, xp)
    return associated_kernel(defn, x, xp)


def kernel_parts(arch, x, xp, truncation, max_entries=pf.DEFAULT_MAX_ENTRIES):
    """(K_plus, K_minus): the metric-sign split of the truncated flat kernel.

    K_plus sums g_i phi_i(x) phi_i(x') over g_i > 0 and K_minus sums -g_i ...
    over g_i < 0, so K ~ K_plus - K_minus and Kbar ~ K_plus + K_minus up to
    the truncation error.
    """
    g = pf.flatten_metric(arch, truncation, max_entries=max_entries)
    fx = pf.flatten_feature_map(arch, x, truncation, max_entries=max_entries)
    fxp = pf.flatten_feature_map(arch, xp, truncation, max_entries=max_entries)
    prod = g.values * fx.values * fxp.values
    k_plus = float(np.sum(prod[g.values > 0]))
    k_minus = float(-np.sum(prod[g.values < 0]))
    return k_plus, k_minus


def gram(defn, points):
    """The Gram matrix over the rows of ``points`` (exactly symmetric).

    Only the upper triangle is evaluated; it is mirrored, so G[i, j] and
    G[j, i] are bit-identical.  Domain violations are re-raised with the
    offending entry attached.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array (one row per sample)")
    n = points.shape[0]
    out = np.empty((n, n), dtype=float)
    for i in range(n):
        for j in range(i, n):
            try:
                out[i, j] = kernel_value(defn, points[i], points[j])
            except DomainError as exc:
                raise DomainError(
                    f"gram entry ({i}, {j}): {exc}",
                    layer=exc.layer,
                    location=(i, j),
                ) from exc
            out[j, i] = out[i, j]
    return out
