"""
Dense real linear algebra

Pauli and Kronecker construction of transverse-field Ising Hamiltonians
and a cyclic Jacobi eigensolver used both to label data and as the
reference solver.

"""

from functools import reduce

import numpy as np


# largest spin chain we will build densely (4096 x 4096)
MAX_SPINS = 12

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
# beyond this |theta| the rotation is t = 1 / (2 theta)
THETA_LARGE = 1e100
SYMMETRY_TOL = 1e-12

# relative tolerance for deciding ties in the sign convention
SIGN_TIE_TOL = 1e-10

SMALLEST = "smallest"
LARGEST = "largest"
DIRECTIONS = (SMALLEST, LARGEST)


class LinalgError (ValueError):
    pass


class ConvergenceError (LinalgError):
    """The eigensolver did not converge within its sweep cap"""
    def __init__(self, off_norm, sweeps):
        LinalgError.__init__(
            self, "Jacobi did not converge after %d sweeps "
            "(off-diagonal norm %e)" % (sweeps, off_norm))
        self.off_norm = off_norm
        self.sweeps = sweeps

    def __reduce__(self):
        return (ConvergenceError, (self.off_norm, self.sweeps))


class EigenDecomposition (object):
    """Eigenvalues (ascending) and matching unit eigenvector columns"""

    def __init__(self, eigenvalues, eigenvectors):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors

    def __len__(self):
        return len(self.eigenvalues)

    def pair(self, k):
        return self.eigenvalues[k], self.eigenvectors[:, k]


#=============================================================================
# Hamiltonian construction


_PAULI = {
    "identity": ((1.0, 0.0), (0.0, 1.0)),
    "x": ((0.0, 1.0), (1.0, 0.0)),
    "z": ((1.0, 0.0), (0.0, -1.0)),
}


def pauli(kind):
    """
    Returns a 2x2 Pauli matrix: 'x', 'z' or 'identity'

    sigma^y is complex and not supported.
    """
    if kind == "y":
        raise LinalgError("pauli 'y' is complex and not supported")
    try:
        return np.array(_PAULI[kind], dtype=float)
    except KeyError:
        raise LinalgError("unknown pauli matrix '%s'" % kind)


def _check_finite(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise LinalgError("%s must be two dimensional" % name)
    if not np.all(np.isfinite(a)):
        raise LinalgError("%s has non-finite entries" % name)
    return a


def kron(a, b):
    """Kronecker product of two dense matrices"""
    return np.kron(_check_finite(a, "a"), _check_finite(b, "b"))


def _chain(factors):
    return reduce(np.kron, factors)


def site_operator(op, site, n):
    """
    Embed a 2x2 operator at 'site' of an n-spin chain

    Site 0 is the leftmost Kronecker factor.
    """
    op = _check_finite(op, "op")
    if op.shape != (2, 2):
        raise LinalgError("site operator must be 2x2")
    if n < 1:
        raise LinalgError("chain needs at least one spin")
    if not 0 <= site < n:
        raise LinalgError("site %d out of range for %d spins" % (site, n))

    eye = pauli("identity")
    factors = [eye] * n
    factors[site] = op
    return _chain(factors)


def ising_hamiltonian(n, bx, bz):
    """
    Transverse-field Ising Hamiltonian on a ring of n spins

    H = -sum_i z_i z_{i+1} - bx sum_i x_i - bz sum_i z_i,  i+1 taken mod n

    For n = 2 the single bond is counted twice and for n = 1 the
    coupling term is z_0 z_0 = I.
    """
    if int(n) != n or n < 1:
        raise LinalgError("spin count must be a positive integer")
    n = int(n)
    if n > MAX_SPINS:
        raise LinalgError("%d spins exceeds the dense limit of %d" %
                          (n, MAX_SPINS))
    if not (np.isfinite(bx) and np.isfinite(bz)):
        raise LinalgError("field strengths must be finite")

    eye = pauli("identity")
    sx = pauli("x")
    sz = pauli("z")
    dim = 2 ** n
    h = np.zeros((dim, dim))

    for i in range(n):
        j = (i + 1) % n
        # same-site factors multiply, so z_0 z_0 = I for n = 1
        factors = [eye] * n
        factors[i] = factors[i].dot(sz)
        factors[j] = factors[j].dot(sz)
        h -= _chain(factors)

    for i in range(n):
        h -= bx * site_operator(sx, i, n)
        h -= bz * site_operator(sz, i, n)

    return h


#=============================================================================
# eigensolver


def check_symmetric(a, tol=SYMMETRY_TOL):
    """Raise LinalgError unless 'a' is square and symmetric"""
    a = _check_finite(a)
    if a.shape[0] != a.shape[1]:
        raise LinalgError("matrix is not square: %dx%d" % a.shape)
    scale = max(1.0, float(np.abs(a).max())) if a.size else 1.0
    asym = float(np.abs(a - a.T).max()) if a.size else 0.0
    if asym > tol * scale:
        raise LinalgError("matrix is not symmetric (max asymmetry %e)" %
                          asym)
    return a


def _off_norm(a):
    off = a - np.diag(np.diag(a))
    return np.sqrt(float(np.sum(off * off)))


def eig_symmetric(a, max_sweeps=JACOBI_MAX_SWEEPS, tol=JACOBI_TOL):
    """
    Full eigendecomposition of a real symmetric matrix

    Cyclic Jacobi rotations sweep over all (p, q) pairs until the
    off-diagonal Frobenius norm drops below tol * ||A||_F.  Eigenvalues
    are returned ascending with the eigenvectors as columns.
    """
    a = check_symmetric(a).copy()
    d = a.shape[0]
    v = np.eye(d)

    fro = np.sqrt(float(np.sum(a * a)))
    threshold = tol * fro

    sweeps = 0
    off = _off_norm(a)
    while off > threshold:
        if sweeps >= max_sweeps:
            raise ConvergenceError(off, sweeps)
        sweeps += 1

        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue

                # negligible next to both diagonal entries
                g = 100.0 * abs(apq)
                if sweeps > 4 and abs(a[p, p]) + g == abs(a[p, p]) and \
                        abs(a[q, q]) + g == abs(a[q, q]):
                    a[p, q] = a[q, p] = 0.0
                    continue

                diff = a[q, q] - a[p, p]
                if abs(diff) > THETA_LARGE * abs(apq):
                    # theta = diff / (2 apq) would overflow when squared
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    sign = 1.0 if theta >= 0.0 else -1.0
                    t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                # A <- J^T A J with J the (p, q) rotation
                colp = a[:, p].copy()
                colq = a[:, q]
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq

                rowp = a[p, :].copy()
                rowq = a[q, :]
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

        off = _off_norm(a)

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return EigenDecomposition(eigenvalues[order], v[:, order])


def normalize_sign(y):
    """
    Flip a vector so that its largest-magnitude component is positive

    Components within a relative 1e-10 of the largest magnitude count as
    tied, and the lowest index among them decides.
    """
    y = np.array(y, dtype=float)
    mags = np.abs(y)
    top = mags.max()
    if top == 0.0:
        return y
    k = int(np.nonzero(mags >= top * (1.0 - SIGN_TIE_TOL))[0][0])
    if y[k] < 0.0:
        y = -y
    return y


def ground_state(a, direction=SMALLEST):
    """
    Returns (b, y), the extreme eigenpair of a symmetric matrix

    direction -- 'smallest' (ground state) or 'largest'
    """
    if direction not in DIRECTIONS:
        raise LinalgError("unknown spectrum direction '%s'" % direction)
    eig = eig_symmetric(a)
    k = 0 if direction == SMALLEST else len(eig) - 1
    b, y = eig.pair(k)
    y = normalize_sign(y)
    y /= np.linalg.norm(y)
    return float(b), y


def eigen_residual(a, y, b):
    """||A y - b y||_2 of a candidate eigenpair"""
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.linalg.norm(a.dot(y) - b * y))


def cosine_similarity(u, v):
    """<u, v> / (|u| |v|) for two nonzero vectors of equal length"""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if len(u) != len(v):
        raise LinalgError("vector lengths differ: %d != %d" %
                          (len(u), len(v)))
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise LinalgError("cosine similarity of a zero vector")
    return float(np.clip(u.dot(v) / (nu * nv), -1.0, 1.0))


def batch_cosine_similarity(u, v):
    """Row-wise cosine similarity of two (N, d) arrays"""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise LinalgError("shape mismatch: %s != %s" % (u.shape, v.shape))
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    if np.any(nu == 0.0) or np.any(nv == 0.0):
        raise LinalgError("cosine similarity of a zero vector")
    return np.clip(np.sum(u * v, axis=1) / (nu * nv), -1.0, 1.0)
