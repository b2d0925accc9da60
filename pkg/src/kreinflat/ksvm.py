"""Kernel machines over indefinite Gram matrices.

The stabilized risk is

    J(alpha) = (1/N) sum_i loss(y_i, (G alpha)_i) + lam * alpha' G alpha,

whose regularizer may be negative.  For squared loss its stationary points
solve (G + lam N I) alpha = y; train_squared picks that canonical solution via
a symmetric eigendecomposition, train_gd descends the same risk from alpha=0.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from . import kreinkernel as kk
from . import netcore
from .errors import DivergenceError, NearSingularError

SolveResult = namedtuple("SolveResult", "alpha residual")
GDResult = namedtuple("GDResult", "alpha grad_norm")
ObjectiveParts = namedtuple("ObjectiveParts", "total empirical regularizer")

_NEAR_SINGULAR_RTOL = 1e-12


@dataclass
class TrainedKSVM:
    alpha: np.ndarray
    training_points: np.ndarray
    lam: float
    kernel_def: kk.KernelDefinition


def _check_system(gram, y):
    gram = np.asarray(gram, dtype=float)
    y = np.asarray(y, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("gram must be square")
    if y.shape != (gram.shape[0],):
        raise ValueError("y must match the gram size")
    if not np.allclose(gram, gram.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(gram).max(initial=0.0)))):
        raise ValueError("gram must be symmetric")
    return gram, y


def train_squared(gram, y, lam):
    """Solve (G + lam N I) alpha = y; returns (alpha, residual norm)."""
    gram, y = _check_system(gram, y)
    if lam <= 0:
        raise ValueError("lam must be positive")
    n = gram.shape[0]
    sym = 0.5 * (gram + gram.T)
    w, vecs = np.linalg.eigh(sym)
    shifted = w + lam * n
    scale = max(float(np.max(np.abs(w))), 1.0)
    if np.min(np.abs(shifted)) < _NEAR_SINGULAR_RTOL * scale:
        raise NearSingularError(
            f"G + lam*N*I has an eigenvalue within {_NEAR_SINGULAR_RTOL * scale:g} of zero"
        )
    alpha = vecs @ ((vecs.T @ y) / shifted)
    residual = float(np.linalg.norm((gram + lam * n * np.eye(n)) @ alpha - y))
    return SolveResult(alpha, residual)


def _loss_derivs(loss, y, f):
    if loss == "squared":
        return 2.0 * (f - y)
    if loss == "logistic":
        t = -y * f
        s = np.empty_like(t)
        pos = t >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
        e = np.exp(t[~pos])
        s[~pos] = e / (1.0 + e)
        return -y * s
    raise ValueError(f"unknown loss {loss!r}")


def objective_gradient(alpha, gram, y, lam, loss="squared"):
    """Gradient of the stabilized risk with respect to alpha."""
    gram, y = _check_system(gram, y)
    alpha = np.asarray(alpha, dtype=float)
    n = gram.shape[0]
    f = gram @ alpha
    return gram @ (_loss_derivs(loss, y, f) / n + 2.0 * lam * alpha)


def stabilized_objective(alpha, gram, y, lam, loss="squared"):
    """(total, empirical, regularizer); the regularizer may be negative."""
    gram, y = _check_system(gram, y)
    alpha = np.asarray(alpha, dtype=float)
    with np.errstate(over="ignore"):  # inf is meaningful to divergence checks
        f = gram @ alpha
        if loss == "squared":
            emp = float(np.mean((f - y) ** 2))
        elif loss == "logistic":
            emp = float(np.mean(np.logaddexp(0.0, -y * f)))
        else:
            raise ValueError(f"unknown loss {loss!r}")
        reg = float(lam * alpha @ gram @ alpha)
    return ObjectiveParts(emp + reg, emp, reg)


def train_gd(gram, y, lam, loss="squared", seed=0, steps=500, step_size=0.05):
    """Plain gradient descent on the stabilized risk from alpha = 0.

    Deterministic given its arguments (the seed is reserved for stochastic
    variants).  Returns (alpha, final gradient norm); raises DivergenceError
    when the risk or an iterate stops being finite.
    """
    gram, y = _check_system(gram, y)
    del seed  # descent from alpha = 0 has no randomness
    alpha = np.zeros_like(y)
    for _ in range(steps):
        g = objective_gradient(alpha, gram, y, lam, loss)
        alpha = alpha - step_size * g
        if not np.all(np.isfinite(alpha)):
            raise DivergenceError("alpha became non-finite during descent")
        if not math.isfinite(stabilized_objective(alpha, gram, y, lam, loss).total):
            raise DivergenceError("stabilized risk became non-finite during descent")
    grad_norm = float(np.linalg.norm(objective_gradient(alpha, gram, y, lam, loss)))
    return GDResult(alpha, grad_norm)


def predict(model, x):
    """f*(x) = sum_i alpha_i K(x, x_i) under the model's kernel variant."""
    return float(
        sum(
            a * kk.kernel_value(model.kernel_def, x, xi)
            for a, xi in zip(model.alpha, model.training_points)
        )
    )


# ---------------------------------------------------------------------------
# model files: plain decimal text
# ---------------------------------------------------------------------------

def _spec_tokens(spec):
    if spec.kind == "polynomial":
        return ["polynomial"] + [netcore._DIGITS % c for c in spec.coefficients]
    if spec.kind in ("relu_surrogate", "relu_surrogate_assoc"):
        return [spec.kind, netcore._DIGITS % spec.sharpness]
    return [spec.kind]


def _spec_from_tokens(tokens):
    from . import activations as act

    kind = tokens[0]
    if kind == "polynomial":
        return act.polynomial(tuple(float(t) for t in tokens[1:]))
    if kind in ("relu_surrogate", "relu_surrogate_assoc"):
        return act.ActivationSpec(kind, sharpness=float(tokens[1]))
    return act.ActivationSpec(kind)


def save_model(path, model):
    arch = model.kernel_def.arch
    lines = [
        "lambda " + netcore._DIGITS % model.lam,
        f"variant {model.kernel_def.variant}",
        f"input_dim {arch.input_dim}",
        "widths " + " ".join(str(h) for h in arch.widths),
    ]
    for spec in arch.activations:
        lines.append("activation " + " ".join(_spec_tokens(spec)))
    pts = np.asarray(model.training_points, dtype=float)
    lines.append(f"points {pts.shape[0]}")
    for row in pts:
        lines.append(" ".join(netcore._DIGITS % v for v in row))
    lines.append("alpha " + " ".join(netcore._DIGITS % a for a in model.alpha))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    with open(path) as fh:
        rows = [r for r in fh.read().split("\n") if r.strip()]
    fields = {}
    specs = []
    points = []
    pos = 0
    while pos < len(rows):
        tokens = rows[pos].split()
        head = tokens[0]
        if head == "activation":
            specs.append(_spec_from_tokens(tokens[1:]))
        elif head == "points":
            count = int(tokens[1])
            points = [
                [float(v) for v in rows[pos + 1 + r].split()] for r in range(count)
            ]
            pos += count
        else:
            fields[head] = tokens[1:]
        pos += 1
    arch = netcore.Architecture(
        input_dim=int(fields["input_dim"][0]),
        widths=tuple(int(h) for h in fields["widths"]),
        activations=tuple(specs),
    )
    defn = kk.KernelDefinition(arch, fields["variant"][0])
    return TrainedKSVM(
        alpha=np.array([float(a) for a in fields["alpha"]]),
        training_points=np.array(points, dtype=float),
        lam=float(fields["lambda"][0]),
        kernel_def=defn,
    )
