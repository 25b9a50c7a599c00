import numpy as np

from fedback import Objective


def make_quadratic(seed, n=20, d=4):
    rng = np.random.default_rng(seed)
    return Objective.quadratic(rng.standard_normal((n, d)), rng.standard_normal(n))


def make_logistic(seed, n=20, p=3, classes=3):
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n, p))
    labels = rng.integers(0, classes, n)
    return Objective.logistic(features, labels, n_classes=classes)


def central_difference_gradient(obj, theta, h=1e-6):
    """Independent finite-difference oracle for gradient checks."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for j in range(theta.size):
        step = np.zeros_like(theta)
        step[j] = h
        grad[j] = (obj.loss(theta + step) - obj.loss(theta - step)) / (2.0 * h)
    return grad
