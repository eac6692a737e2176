"""

Tests for Hamiltonian construction and the Jacobi eigensolver.

"""

import pickle

import numpy as np
import pytest

from isingnet import linalg
from isingnet.linalg import LinalgError

from rasmus.testing import fequal


def random_symmetric(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    return (a + a.T) / 2.0


#=============================================================================
# construction


def test_pauli():
    """
    Pauli matrices and the unsupported sigma^y
    """
    assert np.array_equal(linalg.pauli("identity"), np.eye(2))
    assert np.array_equal(linalg.pauli("x"), [[0, 1], [1, 0]])
    assert np.array_equal(linalg.pauli("z"), [[1, 0], [0, -1]])

    with pytest.raises(LinalgError):
        linalg.pauli("y")
    with pytest.raises(LinalgError):
        linalg.pauli("q")


def test_kron():
    """
    Kronecker products of Pauli matrices
    """
    eye = linalg.pauli("identity")
    assert np.array_equal(linalg.kron(eye, eye), np.eye(4))
    assert np.array_equal(
        linalg.kron(linalg.pauli("x"), linalg.pauli("z")),
        [[0, 0, 1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, -1, 0, 0]])

    with pytest.raises(LinalgError):
        linalg.kron(np.array([[np.nan]]), eye)


def test_site_operator():
    """
    Embedding a 2x2 operator into a spin chain
    """
    sx = linalg.pauli("x")
    sz = linalg.pauli("z")
    assert np.array_equal(linalg.site_operator(sz, 0, 1), sz)
    assert np.array_equal(linalg.site_operator(sx, 1, 2),
                          np.kron(np.eye(2), sx))
    assert linalg.site_operator(sx, 2, 4).shape == (16, 16)

    with pytest.raises(LinalgError):
        linalg.site_operator(sx, 2, 2)
    with pytest.raises(LinalgError):
        linalg.site_operator(sx, -1, 2)


def test_hamiltonian_two_spins():
    """
    The ring of two spins counts its single bond twice
    """
    h = linalg.ising_hamiltonian(2, 0.0, 0.01)
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
    for got, want in zip(np.diag(h), [-2.02, 2.0, 2.0, -1.98]):
        fequal(got, want, eabs=1e-14)


def test_hamiltonian_one_spin():
    """
    For one spin the coupling term is the identity
    """
    bx, bz = 0.3, 0.2
    h = linalg.ising_hamiltonian(1, bx, bz)
    want = -np.eye(2) - bx * linalg.pauli("x") - bz * linalg.pauli("z")
    assert np.allclose(h, want, rtol=0, atol=1e-15)


def test_hamiltonian_properties():
    """
    Hamiltonians are symmetric and traceless for two or more spins
    """
    for n in range(2, 7):
        h = linalg.ising_hamiltonian(n, 1.0, 0.01)
        assert h.shape == (2 ** n, 2 ** n)
        assert np.array_equal(h, h.T)
        assert abs(np.trace(h)) < 1e-10, (n, np.trace(h))


def test_hamiltonian_aligned():
    """
    Without fields the ground energy is -n (all spins aligned)
    """
    for n in (3, 4, 5):
        b, y = linalg.ground_state(linalg.ising_hamiltonian(n, 0.0, 0.0))
        fequal(b, -n)


def test_hamiltonian_errors():
    """
    Bad spin counts and fields are rejected
    """
    with pytest.raises(LinalgError):
        linalg.ising_hamiltonian(0, 1.0, 0.0)
    with pytest.raises(LinalgError):
        linalg.ising_hamiltonian(linalg.MAX_SPINS + 1, 1.0, 0.0)
    with pytest.raises(LinalgError):
        linalg.ising_hamiltonian(2, np.inf, 0.0)


#=============================================================================
# eigensolver


def test_eig_small():
    """
    Eigendecompositions of small matrices with known spectra
    """
    eig = linalg.eig_symmetric(np.diag([3.0, 1.0, 2.0]))
    assert list(eig.eigenvalues) == [1.0, 2.0, 3.0]
    assert np.array_equal(np.abs(eig.eigenvectors),
                          [[0, 0, 1], [1, 0, 0], [0, 1, 0]])

    eig = linalg.eig_symmetric(linalg.pauli("x"))
    fequal(eig.eigenvalues[0], -1.0)
    fequal(eig.eigenvalues[1], 1.0)

    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    eig = linalg.eig_symmetric(a)
    disc = np.sqrt(5.0)
    fequal(eig.eigenvalues[0], (5.0 - disc) / 2.0)
    fequal(eig.eigenvalues[1], (5.0 + disc) / 2.0)


def test_eig_random():
    """
    Residual, orthonormality and reconstruction on random matrices
    """
    for seed in range(200):
        a = random_symmetric(16, seed)
        eig = linalg.eig_symmetric(a)
        lam = eig.eigenvalues
        q = eig.eigenvectors

        assert np.all(np.diff(lam) >= 0)
        assert np.abs(a.dot(q) - q * lam).max() <= 1e-10
        assert np.abs(q.T.dot(q) - np.eye(16)).max() <= 1e-10
        assert np.abs(q.dot(np.diag(lam)).dot(q.T) - a).max() <= 1e-10


def test_eig_trace_identities():
    """
    Eigenvalues sum to the trace and their squares to |A|_F^2
    """
    for d in (1, 2, 5, 13, 32):
        a = random_symmetric(d, 100 + d)
        lam = linalg.eig_symmetric(a).eigenvalues
        assert abs(lam.sum() - np.trace(a)) < 1e-8
        assert abs((lam ** 2).sum() - (a ** 2).sum()) < 1e-8


def test_eig_matches_numpy():
    """
    Eigenvalues agree with numpy's symmetric solver
    """
    a = linalg.ising_hamiltonian(4, 0.7, 0.01)
    lam = linalg.eig_symmetric(a).eigenvalues
    assert np.allclose(lam, np.linalg.eigvalsh(a), rtol=0, atol=1e-10)


def test_eig_matches_scipy():
    """
    Ground states agree with scipy's LAPACK solver up to sign
    """
    scipy_linalg = pytest.importorskip("scipy.linalg")
    for bx in (0.0, 0.5, 1.0, 2.0):
        a = linalg.ising_hamiltonian(4, bx, 0.01)
        lam, vecs = scipy_linalg.eigh(a)
        b, y = linalg.ground_state(a)
        assert abs(b - lam[0]) <= 1e-10
        assert abs(abs(np.dot(y, vecs[:, 0])) - 1.0) <= 1e-10


def test_eig_deterministic():
    """
    The solver gives identical output on identical input
    """
    a = random_symmetric(8, 7)
    eig1 = linalg.eig_symmetric(a)
    eig2 = linalg.eig_symmetric(a.copy())
    assert np.array_equal(eig1.eigenvalues, eig2.eigenvalues)
    assert np.array_equal(eig1.eigenvectors, eig2.eigenvectors)


def test_eig_errors():
    """
    Non-square and asymmetric input, and the sweep cap
    """
    with pytest.raises(LinalgError):
        linalg.eig_symmetric(np.zeros((2, 3)))
    with pytest.raises(LinalgError):
        linalg.eig_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))

    with pytest.raises(linalg.ConvergenceError) as info:
        linalg.eig_symmetric(random_symmetric(4, 0), max_sweeps=0)
    assert info.value.sweeps == 0
    assert info.value.off_norm > 0

    # the error survives a trip through a worker process
    error = pickle.loads(pickle.dumps(info.value))
    assert isinstance(error, linalg.ConvergenceError)
    assert (error.off_norm, error.sweeps) == \
        (info.value.off_norm, info.value.sweeps)
    assert str(error) == str(info.value)


def test_eig_ising_grid():
    """
    The solver converges on every Hamiltonian of a dense field grid
    """
    for n in (2, 3, 4):
        for bx in np.linspace(0.0, 2.0, 201):
            h = linalg.ising_hamiltonian(n, bx, 0.01)
            eig = linalg.eig_symmetric(h)
            q = eig.eigenvectors
            assert np.abs(h.dot(q) - q * eig.eigenvalues).max() <= 1e-10
            assert np.abs(q.T.dot(q) - np.eye(2 ** n)).max() <= 1e-10


def test_eig_tiny_offdiagonal():
    """
    Off-diagonal entries far below the diagonal spread converge cleanly
    """
    for apq in (1e-300, 1e-160, 1e-20):
        a = np.array([[1.0, apq, 0.0], [apq, 2.0, 0.5], [0.0, 0.5, 3.0]])
        with np.errstate(over="raise", divide="raise", invalid="raise"):
            eig = linalg.eig_symmetric(a)
        q = eig.eigenvectors
        assert np.abs(a.dot(q) - q * eig.eigenvalues).max() <= 1e-12
        assert np.abs(q.T.dot(q) - np.eye(3)).max() <= 1e-12


#=============================================================================
# ground states and similarity


def test_ground_state_examples():
    """
    Extreme eigenpairs with the sign convention applied
    """
    b, y = linalg.ground_state(linalg.ising_hamiltonian(2, 0.0, 0.01))
    fequal(b, -2.02)
    assert np.array_equal(y, [1.0, 0.0, 0.0, 0.0])

    b, y = linalg.ground_state(linalg.pauli("x"), linalg.SMALLEST)
    fequal(b, -1.0)
    assert np.allclose(y, [1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-12)

    b, y = linalg.ground_state(np.diag([1.0, 2.0]), linalg.LARGEST)
    assert b == 2.0
    assert np.array_equal(y, [0.0, 1.0])

    with pytest.raises(LinalgError):
        linalg.ground_state(np.eye(2), "middle")


def test_ground_state_ising():
    """
    Ground states of Ising chains are unit eigenvectors
    """
    for bx in (0.0, 0.25, 1.0, 1.9):
        h = linalg.ising_hamiltonian(4, bx, 0.01)
        b, y = linalg.ground_state(h)
        assert abs(np.linalg.norm(y) - 1.0) <= 1e-12
        assert np.abs(h.dot(y) - b * y).max() <= 1e-8
        assert linalg.eigen_residual(h, y, b) <= 1e-8
        k = int(np.argmax(np.abs(y)))
        assert y[k] > 0
        fequal(b, np.linalg.eigvalsh(h)[0])


def test_normalize_sign():
    """
    The largest component is made positive; ties go to the lowest index
    """
    assert list(linalg.normalize_sign([0.1, -0.9])) == [-0.1, 0.9]
    assert list(linalg.normalize_sign([-0.5, 0.5])) == [0.5, -0.5]
    assert list(linalg.normalize_sign([0.5, -0.5])) == [0.5, -0.5]
    assert list(linalg.normalize_sign([0.0, 0.0])) == [0.0, 0.0]


def test_cosine_similarity():
    """
    Cosine similarity of simple vectors
    """
    fequal(linalg.cosine_similarity([1, 2, 3], [1, 2, 3]), 1.0)
    assert linalg.cosine_similarity([1, 0], [0, 1]) == 0.0
    fequal(linalg.cosine_similarity([1, 1], [1, 0]), 1 / np.sqrt(2))
    fequal(linalg.cosine_similarity([1, 1], [-2, -2]), -1.0)

    with pytest.raises(LinalgError):
        linalg.cosine_similarity([0, 0], [1, 0])
    with pytest.raises(LinalgError):
        linalg.cosine_similarity([1, 0], [1, 0, 0])

    cos = linalg.batch_cosine_similarity([[1, 0], [1, 1]],
                                         [[1, 0], [1, 0]])
    fequal(cos[0], 1.0)
    fequal(cos[1], 1 / np.sqrt(2))
