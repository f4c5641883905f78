"""Column-major vec/unvec and small matrix checks shared across the package."""

import numpy as np


def vec(a):
    """Stack the columns of ``a`` into a 1-D array (column-major)."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec`: reshape a length ``rows*cols`` vector to ``rows x cols``."""
    v = np.asarray(v)
    if v.size != rows * cols:
        raise ValueError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def gram_deviation(x, scale=1.0):
    """Frobenius distance between ``x^H x`` and ``scale * I``."""
    x = np.asarray(x)
    g = x.conj().T @ x
    return float(np.linalg.norm(g - scale * np.eye(g.shape[0])))


def crandn(rng, *shape):
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def haar_unitary(rng, n):
    """Draw an ``n x n`` Haar-distributed unitary matrix.

    QR of a complex Gaussian matrix with the phases of ``diag(R)`` moved into
    ``Q`` (Mezzadri's recipe); without the phase fix the result is not Haar.
    """
    z = crandn(rng, n, n)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))
