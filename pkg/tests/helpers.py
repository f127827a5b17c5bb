"""Small oracle utilities shared by the tests. Dense assemblies live here,
never in the production paths."""

import numpy as np


def dense(mat):
    return mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat)


def dense_kron(factors):
    """Explicit Kronecker product of a list of factor matrices."""
    out = dense(factors[0])
    for f in factors[1:]:
        out = np.kron(out, dense(f))
    return out


def kernel_gram(kernel, x, y):
    """Dense kernel matrix assembled entry by entry via kernel.eval."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    return np.array([[kernel.eval(xi, yj) for yj in y] for xi in x])
