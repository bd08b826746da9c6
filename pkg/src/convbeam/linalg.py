"""Stabilized complex linear algebra on real matrix embeddings.

Complex inversion and linear solves are routed through the 2m x 2m real
embedding

    [[A, B],
     [-B, A]]        with  A = Re(phi), B = Im(phi),

whose inverse carries Re(phi^-1) in the top-left block and Im(phi^-1) in
the top-right block.  Elimination is Gaussian with partial pivoting and a
deterministic singularity threshold of ``2m * eps_machine * max|entry|``.

All routines run in double precision (complex128 / float64) regardless of
the input dtype, are pure functions, and accept stacks of matrices via
leading batch dimensions.
"""

import numpy as np

from .errors import DegenerateSignalError, SingularMatrixError
from .validation import as_complex_stack, as_complex_vector, check_finite

_MACHEPS = float(np.finfo(np.float64).eps)


def hermitize(phi):
    """Return (phi + phi^H) / 2, removing accumulated asymmetry.

    Accepts a stack (..., m, m); the result is exactly Hermitian entrywise.
    """
    phi = as_complex_stack(phi)
    return 0.5 * (phi + np.conj(np.swapaxes(phi, -1, -2)))


def diag_load(phi, eps):
    """Add ``eps * trace(phi)`` to the diagonal of each matrix in the stack.

    The trace term keeps the perturbation adaptive to the signal level; for
    Hermitian PSD input the loaded condition number is bounded by
    (1 + eps) / eps.  ``eps = 0`` returns the input unchanged.
    """
    phi = as_complex_stack(phi)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return phi.copy()
    m = phi.shape[-1]
    trace = np.trace(phi, axis1=-2, axis2=-1)
    return phi + (eps * trace)[..., None, None] * np.eye(m)


def real_embed(phi):
    """Map a complex stack (..., m, m) to its real embedding (..., 2m, 2m)."""
    phi = as_complex_stack(phi)
    m = phi.shape[-1]
    a = phi.real
    b = phi.imag
    out = np.empty(phi.shape[:-2] + (2 * m, 2 * m), dtype=np.float64)
    out[..., :m, :m] = a
    out[..., :m, m:] = b
    out[..., m:, :m] = -b
    out[..., m:, m:] = a
    return out


def _pivoted_solve(a, b):
    """Solve stacked real systems a @ x = b by partial-pivoted elimination.

    a: (batch, n, n) float64, b: (batch, n, k) float64.  The singularity
    threshold per batch element is ``n * eps_machine * max|a|``; the first
    offending batch index is attached to the raised error.
    """
    nb, n, _ = a.shape
    k = b.shape[-1]
    aug = np.concatenate([a, b], axis=2).astype(np.float64, copy=True)
    thresh = n * _MACHEPS * np.abs(a).max(axis=(1, 2))
    batch = np.arange(nb)
    for j in range(n):
        rel = np.argmax(np.abs(aug[:, j:, j]), axis=1)
        piv_rows = rel + j
        pivot_vals = aug[batch, piv_rows, :].copy()
        aug[batch, piv_rows, :] = aug[:, j, :]
        aug[:, j, :] = pivot_vals
        pivots = aug[:, j, j]
        bad = np.abs(pivots) <= thresh
        if np.any(bad):
            raise SingularMatrixError(
                "pivot below machine-scaled threshold",
                batch_index=int(np.argmax(bad)))
        if j + 1 < n:
            factors = aug[:, j + 1:, j] / pivots[:, None]
            aug[:, j + 1:, j:] -= factors[:, :, None] * aug[:, None, j, j:]
    x = np.empty((nb, n, k), dtype=np.float64)
    for j in range(n - 1, -1, -1):
        acc = aug[:, j, n:]
        if j + 1 < n:
            acc = acc - np.matmul(aug[:, None, j, j + 1:n],
                                  x[:, j + 1:, :])[:, 0, :]
        x[:, j, :] = acc / aug[:, j, j, None]
    return x


def csolve(phi, rhs):
    """Solve phi @ X = rhs through the real embedding, without inversion.

    phi: (..., m, m) complex; rhs: (..., m, k) or (..., m).  Writing
    X = Xr + i*Xi, the embedded system is solved for [Xr; -Xi] against the
    stacked right-hand side [Re(rhs); -Im(rhs)].
    """
    phi = as_complex_stack(phi)
    rhs = np.asarray(rhs, dtype=np.complex128)
    vector_rhs = rhs.ndim == phi.ndim - 1
    if vector_rhs:
        rhs = rhs[..., None]
    if rhs.shape[:-1] != phi.shape[:-1]:
        raise ValueError(
            f"rhs shape {rhs.shape} does not match phi shape {phi.shape}")
    check_finite(rhs, "rhs")
    m = phi.shape[-1]
    k = rhs.shape[-1]
    batch_shape = phi.shape[:-2]
    emb = real_embed(phi).reshape(-1, 2 * m, 2 * m)
    b = np.concatenate([rhs.real, -rhs.imag], axis=-2).reshape(-1, 2 * m, k)
    y = _pivoted_solve(emb, b)
    x = y[:, :m, :] - 1j * y[:, m:, :]
    x = x.reshape(batch_shape + (m, k))
    return x[..., 0] if vector_rhs else x


def cinv(phi):
    """Invert a complex stack via the inverted real embedding.

    Solves the embedded system against the left block-column of the
    identity, whose top and (negated) bottom blocks carry Re(phi^-1) and
    Im(phi^-1).  Recovering both parts from the same column solves keeps
    the complex residual backward-small; reading Re and Im from two
    independently solved block columns loses several orders of magnitude
    on ill-conditioned input, although the blocks agree exactly in exact
    arithmetic.
    """
    phi = as_complex_stack(phi)
    m = phi.shape[-1]
    batch_shape = phi.shape[:-2]
    emb = real_embed(phi).reshape(-1, 2 * m, 2 * m)
    rhs = np.zeros((emb.shape[0], 2 * m, m))
    rhs[:, :m, :] = np.eye(m)
    z = _pivoted_solve(emb, rhs)
    inv = z[:, :m, :] - 1j * z[:, m:, :]
    return inv.reshape(batch_shape + (m, m))


def power_iter_maxeig(phi, iters, seed_vec):
    """Estimate the eigenvector of the maximum-modulus eigenvalue.

    Runs ``iters`` plain iterations v <- normalize(phi @ v) from
    ``seed_vec``; no Rayleigh refinement.  Deterministic given the seed.
    Raises DegenerateSignalError if an iterate underflows to zero.
    """
    phi = as_complex_stack(phi)
    if phi.ndim != 2:
        raise ValueError("power_iter_maxeig expects a single matrix")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    v = as_complex_vector(seed_vec, "seed_vec")
    if v.shape[0] != phi.shape[0]:
        raise ValueError("seed_vec length must match matrix dimension")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("seed_vec must be nonzero")
    v = v / norm
    for _ in range(iters):
        v = phi @ v
        norm = np.linalg.norm(v)
        if norm < 1e-300:
            raise DegenerateSignalError(
                "power iteration iterate underflowed to zero")
        v = v / norm
    return v


def power_iter_maxeig_stack(phi, iters, seed_vec):
    """Stacked power iteration over (..., m, m) with a shared seed vector.

    Batched variant of :func:`power_iter_maxeig` used by the per-frequency
    steering-vector path; identical per-matrix semantics.
    """
    phi = as_complex_stack(phi)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    seed = as_complex_vector(seed_vec, "seed_vec")
    norm = np.linalg.norm(seed)
    if norm == 0.0:
        raise ValueError("seed_vec must be nonzero")
    v = np.broadcast_to(seed / norm, phi.shape[:-1]).copy()
    for _ in range(iters):
        v = np.einsum("...ij,...j->...i", phi, v)
        norms = np.linalg.norm(v, axis=-1)
        if np.any(norms < 1e-300):
            bad = int(np.argmax(norms < 1e-300))
            raise DegenerateSignalError(
                "power iteration iterate underflowed to zero",
                frequency_bin=bad)
        v = v / norms[..., None]
    return v
