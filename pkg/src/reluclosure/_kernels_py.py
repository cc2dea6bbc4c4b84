"""NumPy implementations of the hot kernels (fallback for the compiled module)."""

import numpy as np


def hinge_forward(X, W1, b1, W2, b2):
    """Shallow ReLU response ``b2 + relu(X W1^T + b1) W2`` at the rows of X."""
    if W1.shape[0] == 0:
        return np.full(X.shape[0], float(b2))
    A = X @ W1.T + b1
    return np.maximum(A, 0.0) @ W2 + b2


def lp_loss_grad(X, wts, fx, W1, b1, W2, b2, p):
    """Weighted Lp error and its gradient in (W1, b1, W2, b2).

    The ReLU derivative at zero is taken as 0.
    """
    d = W1.shape[0]
    if d:
        A = X @ W1.T + b1
        R = np.maximum(A, 0.0)
        y = R @ W2 + b2
    else:
        y = np.full(X.shape[0], float(b2))
    r = y - fx
    ar = np.abs(r)
    if p == 2.0:
        err = float(np.dot(wts, r * r))
        dy = 2.0 * wts * r
    else:
        err = float(np.dot(wts, ar ** p))
        dy = wts * p * ar ** (p - 1.0) * np.sign(r)
    gb2 = float(dy.sum())
    if not d:
        return err, np.zeros_like(W1), np.zeros_like(b1), np.zeros_like(W2), gb2
    gW2 = R.T @ dy
    G = (A > 0.0) * (dy[:, None] * W2[None, :])
    gW1 = G.T @ X
    gb1 = G.sum(axis=0)
    return err, gW1, gb1, gW2, gb2
