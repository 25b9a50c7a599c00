"""Local loss functions and the inexact proximal solver.

Two objective kinds are supported:

* ``quadratic``: f(theta) = 0.5 * |A theta - b|^2 for a design matrix A
  of shape (n, d) and real targets b of shape (n,).
* ``logistic``: multinomial softmax cross entropy over C classes. The
  feature matrix X has shape (n, p), labels are class indices, and the
  parameter vector has dimension d = p * C, read as a (p, C) weight
  matrix in row-major order. With C = 2 this covers ordinary binary
  logistic regression (in a mildly overparameterized form).

Losses are plain sums over the local samples, not sample averages.

Every operation here is a pure function of its inputs; objectives carry
only immutable precomputed factors and can be shared freely between
workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, SolverFailureError

# Inner-iteration budget for the gradient-descent prox path.
PROX_MAX_ITERS = 10_000

_POWER_TOL = 1e-8
_POWER_MAX_ITERS = 100_000


def _power_lambda_max(gram: np.ndarray) -> float:
    """Largest eigenvalue of a PSD matrix via seeded power iteration.

    Stops when successive eigenvalue estimates agree to relative
    tolerance 1e-8; returns the last estimate if the cap is hit.
    """
    rng = np.random.default_rng(0)
    v = rng.standard_normal(gram.shape[0])
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return 0.0
    v /= norm
    estimate = 0.0
    for _ in range(_POWER_MAX_ITERS):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= _POWER_TOL * norm:
            return norm
        estimate = norm
    return estimate


class Objective:
    """A client's local loss with gradient and curvature information.

    Use the :meth:`quadratic` or :meth:`logistic` constructors rather
    than ``__init__`` directly.
    """

    def __init__(self, kind, design, targets, n_classes=None):
        design = np.asarray(design, dtype=float)
        if design.ndim != 2:
            raise ContractViolationError("design matrix must be 2-D")
        n, p = design.shape
        if n < 1 or p < 1:
            raise ContractViolationError("need at least one sample and one feature")
        targets = np.asarray(targets)
        if targets.shape != (n,):
            raise ContractViolationError(
                f"design matrix has {n} rows but {targets.shape} targets"
            )
        if kind == "quadratic":
            if n_classes is not None:
                raise ContractViolationError("n_classes only applies to logistic objectives")
            self.targets = targets.astype(float)
            self.n_classes = None
            self.dim = p
            self._moment = design.T @ self.targets
        elif kind == "logistic":
            labels = targets.astype(int)
            if np.any(labels != targets):
                raise ContractViolationError("logistic targets must be integer class indices")
            if labels.min() < 0:
                raise ContractViolationError("class indices must be nonnegative")
            inferred = int(labels.max()) + 1
            self.n_classes = max(inferred, 2) if n_classes is None else int(n_classes)
            if self.n_classes < 2 or inferred > self.n_classes:
                raise ContractViolationError(
                    f"labels span {inferred} classes, declared {self.n_classes}"
                )
            self.targets = labels
            self.dim = p * self.n_classes
            self._moment = None
        else:
            raise ContractViolationError(f"unknown objective kind: {kind!r}")
        self.kind = kind
        self.design = design
        self.n_samples = n
        self.n_features = p
        self._gram = design.T @ design

    @classmethod
    def quadratic(cls, design, targets) -> "Objective":
        """Least-squares loss 0.5 * |A theta - b|^2."""
        return cls("quadratic", design, targets)

    @classmethod
    def logistic(cls, features, labels, n_classes=None) -> "Objective":
        """Softmax cross-entropy loss over ``n_classes`` classes."""
        return cls("logistic", features, labels, n_classes=n_classes)

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ContractViolationError(
                f"parameter has shape {theta.shape}, objective expects ({self.dim},)"
            )
        return theta

    def _softmax_terms(self, theta):
        weights = theta.reshape(self.n_features, self.n_classes)
        logits = self.design @ weights
        shift = logits.max(axis=1, keepdims=True)
        log_norm = shift[:, 0] + np.log(np.exp(logits - shift).sum(axis=1))
        return logits, log_norm

    def loss(self, theta) -> float:
        """Evaluate the local loss at ``theta``."""
        theta = self._check_theta(theta)
        if self.kind == "quadratic":
            residual = self.design @ theta - self.targets
            return 0.5 * float(residual @ residual)
        logits, log_norm = self._softmax_terms(theta)
        hits = logits[np.arange(self.n_samples), self.targets]
        return float(np.sum(log_norm - hits))

    def gradient(self, theta) -> np.ndarray:
        """Exact analytic gradient of :meth:`loss` at ``theta``."""
        theta = self._check_theta(theta)
        if self.kind == "quadratic":
            return self._gram @ theta - self._moment
        logits, log_norm = self._softmax_terms(theta)
        probs = np.exp(logits - log_norm[:, None])
        probs[np.arange(self.n_samples), self.targets] -= 1.0
        return (self.design.T @ probs).reshape(self.dim)

    def smoothness_constant(self) -> float:
        """Upper bound on the Lipschitz constant of the gradient.

        Quadratic: the largest eigenvalue of A^T A. Logistic: the
        conservative softmax-safe bound 0.5 * lambda_max(X^T X).
        """
        top = _power_lambda_max(self._gram)
        if self.kind == "quadratic":
            return top
        return 0.5 * top


@dataclass
class ProxProblem:
    """One proximal subproblem: min_theta f(theta) + (rho/2)|theta - anchor|^2.

    ``tolerance`` is the accepted norm of the stationarity residual
    grad f(theta) + rho (theta - anchor); the solve starts from
    ``warm_start``.
    """

    anchor: np.ndarray
    rho: float
    tolerance: float
    warm_start: np.ndarray

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float)
        self.warm_start = np.asarray(self.warm_start, dtype=float)
        if not self.rho > 0:
            raise ContractViolationError("proximal weight rho must be positive")
        if not self.tolerance > 0:
            raise ContractViolationError("tolerance must be positive")


def prox_residual(obj: Objective, prob: ProxProblem, theta: np.ndarray) -> float:
    """Norm of the stationarity residual of ``theta`` for ``prob``."""
    residual = obj.gradient(theta) + prob.rho * (theta - prob.anchor)
    return float(np.linalg.norm(residual))


def prox_solve(obj: Objective, prob: ProxProblem, method: str = "auto") -> np.ndarray:
    """Solve a :class:`ProxProblem` to its stated tolerance.

    Parameters
    ----------
    obj : Objective
        The local loss f.
    prob : ProxProblem
        Anchor, weight, tolerance and warm start.
    method : {"auto", "closed_form", "gradient_descent"}
        "auto" picks the closed form for quadratic objectives and
        gradient descent (step 1/(r + rho)) otherwise.

    Returns
    -------
    ndarray
        A point whose stationarity residual norm is <= prob.tolerance.

    Raises
    ------
    SolverFailureError
        If the iteration budget (10,000 steps) runs out first.
    """
    if prob.anchor.shape != (obj.dim,) or prob.warm_start.shape != (obj.dim,):
        raise ContractViolationError("anchor and warm start must match the objective dimension")

    if method == "auto":
        method = "closed_form" if obj.kind == "quadratic" else "gradient_descent"

    if method == "closed_form":
        if obj.kind != "quadratic":
            raise ContractViolationError("closed form is only available for quadratic objectives")
        system = obj._gram + prob.rho * np.eye(obj.dim)
        theta = np.linalg.solve(system, obj._moment + prob.rho * prob.anchor)
        # A handful of refinement solves absorbs any rounding on badly
        # conditioned instances; normally the first residual check passes.
        for _ in range(5):
            residual = obj.gradient(theta) + prob.rho * (theta - prob.anchor)
            norm = float(np.linalg.norm(residual))
            if norm <= prob.tolerance:
                return theta
            theta = theta - np.linalg.solve(system, residual)
        raise SolverFailureError("closed-form prox refinement stalled", norm)

    if method == "gradient_descent":
        step = 1.0 / (obj.smoothness_constant() + prob.rho)
        theta = prob.warm_start.copy()
        for _ in range(PROX_MAX_ITERS):
            residual = obj.gradient(theta) + prob.rho * (theta - prob.anchor)
            norm = float(np.linalg.norm(residual))
            if norm <= prob.tolerance:
                return theta
            theta = theta - step * residual
        norm = prox_residual(obj, prob, theta)
        if norm <= prob.tolerance:
            return theta
        raise SolverFailureError("proximal solve exhausted its iteration budget", norm)

    raise ContractViolationError(f"unknown prox method: {method!r}")
