"""Kernel selection: compiled extension when built, NumPy fallback otherwise.

Set ``RELUCLOSURE_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("RELUCLOSURE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def hinge_forward(X, W1, b1, W2, b2):
    X = _c(np.atleast_2d(X))
    return _impl.hinge_forward(X, _c(W1).reshape(-1, X.shape[1]), _c(b1), _c(W2), float(b2))


def lp_loss_grad(X, wts, fx, W1, b1, W2, b2, p):
    X = _c(np.atleast_2d(X))
    return _impl.lp_loss_grad(X, _c(wts), _c(fx), _c(W1).reshape(-1, X.shape[1]), _c(b1), _c(W2),
                              float(b2), float(p))
