import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonmarkov.operator_core import (
    DensityMatrix,
    NonHermitianError,
    Superoperator,
    choi_of,
    compose,
    invert,
    max_entangled,
    min_choi_eigenvalue,
    partial_trace,
    partial_transpose,
    trace_norm,
    unvec,
    vec,
)
from nonmarkov.lindblad import LindbladGenerator, generator_matrix
from scipy.linalg import expm

from oracles import choi_by_definition, jacobi_eigenvalues, random_kraus

SWAP2 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def random_hermitian(n, rng):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (g + g.conj().T)


def transpose_map(d=2):
    return Superoperator.from_function(lambda r: r.T, d)


def test_vectorization_round_trip_and_convention():
    rng = np.random.default_rng(0)
    a, b, rho = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.array_equal(unvec(vec(rho)), rho)
    np.testing.assert_allclose(np.kron(b.T, a) @ vec(rho), vec(a @ rho @ b), atol=1e-12)
    # column stacking: first column comes first
    assert np.array_equal(vec(rho)[:3], rho[:, 0])


def test_trace_norm_trivial_cases():
    assert trace_norm(np.diag([1.0, -1.0])) == pytest.approx(2.0, abs=1e-15)
    for d in (2, 3, 4):
        assert trace_norm(max_entangled(d).projector) == pytest.approx(1.0, abs=1e-12)


def test_trace_norm_matches_jacobi_oracle():
    rng = np.random.default_rng(1)
    a = random_hermitian(6, rng)
    expected = np.sum(np.abs(jacobi_eigenvalues(a)))
    assert trace_norm(a) == pytest.approx(expected, abs=1e-10)


def test_trace_norm_rejects_non_hermitian():
    with pytest.raises(NonHermitianError, match="max"):
        trace_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_trace_norm_symmetrizes_float_drift():
    a = np.diag([1.0, -1.0]).astype(complex)
    a[0, 1] = 1e-14
    assert trace_norm(a) == pytest.approx(2.0, abs=1e-12)


def test_max_entangled_d2_entries():
    p = max_entangled(2).projector
    expected = np.zeros((4, 4))
    expected[np.ix_([0, 3], [0, 3])] = 0.5
    np.testing.assert_allclose(p, expected, atol=1e-15)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_max_entangled_purity_and_marginals(d):
    s = max_entangled(d)
    assert np.trace(s.projector).real == pytest.approx(1.0, abs=1e-14)
    assert np.trace(s.projector @ s.projector).real == pytest.approx(1.0, abs=1e-14)
    assert np.linalg.norm(s.vector) == pytest.approx(1.0, abs=1e-14)
    for keep in (0, 1):
        np.testing.assert_allclose(partial_trace(s.projector, (d, d), keep), np.eye(d) / d, atol=1e-15)


@pytest.mark.parametrize("d", [0, 1, 2.5])
def test_max_entangled_rejects_small_dims(d):
    with pytest.raises(ValueError):
        max_entangled(d)


@pytest.mark.parametrize("d", [2, 3])
def test_choi_reshuffle_matches_definition(d):
    rng = np.random.default_rng(d)
    m = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
    sop = Superoperator(m)
    np.testing.assert_allclose(choi_of(sop), choi_by_definition(sop.apply, d), atol=1e-13)


def test_choi_of_identity_is_phi():
    np.testing.assert_allclose(choi_of(Superoperator.identity(2)), max_entangled(2).projector, atol=1e-15)


def test_choi_of_transposition_is_half_swap():
    c = choi_of(transpose_map())
    np.testing.assert_allclose(c, SWAP2 / 2, atol=1e-15)
    assert trace_norm(c) == pytest.approx(2.0, abs=1e-12)


def test_choi_of_complete_dephasing():
    dephase = Superoperator.from_function(lambda r: np.diag(np.diag(r)), 2)
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.5
    np.testing.assert_allclose(choi_of(dephase), expected, atol=1e-15)


def test_partial_transpose_examples():
    rng = np.random.default_rng(3)
    ra, rb = random_hermitian(2, rng), random_hermitian(3, rng)
    np.testing.assert_allclose(partial_transpose(np.kron(ra, rb), (2, 3), 0), np.kron(ra.T, rb), atol=1e-15)
    np.testing.assert_allclose(partial_transpose(np.kron(ra, rb), (2, 3), 1), np.kron(ra, rb.T), atol=1e-15)
    pt = partial_transpose(max_entangled(2).projector, (2, 2))
    np.testing.assert_allclose(pt, SWAP2 / 2, atol=1e-15)
    np.testing.assert_allclose(np.linalg.eigvalsh(pt), [-0.5, 0.5, 0.5, 0.5], atol=1e-14)


def test_partial_transpose_dimension_mismatch():
    with pytest.raises(ValueError):
        partial_transpose(np.eye(6), (2, 2))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(2, 3), st.integers(0, 1), st.integers(0, 2**32 - 1))
def test_partial_transpose_involutive_trace_and_hermiticity(da, db, sub, seed):
    rho = random_hermitian(da * db, np.random.default_rng(seed))
    pt = partial_transpose(rho, (da, db), sub)
    assert np.array_equal(partial_transpose(pt, (da, db), sub), rho)
    assert np.trace(pt) == np.trace(rho)
    assert np.array_equal(pt, pt.conj().T)


def test_compose_and_invert_trivial():
    rng = np.random.default_rng(4)
    e = Superoperator.from_kraus(random_kraus(2, 3, rng))
    np.testing.assert_array_equal(compose(e, Superoperator.identity(2)).matrix, e.matrix)
    inv = invert(Superoperator.identity(3))
    assert not inv.pseudo
    np.testing.assert_array_equal(inv.map.matrix, np.eye(9))


def test_invert_semigroup_oracle():
    rng = np.random.default_rng(5)
    h = random_hermitian(2, rng)
    gen = LindbladGenerator(2, h, ((0.7, np.array([[0, 1], [0, 0]])), (0.3, np.diag([1.0, -1.0]))))
    lmat = generator_matrix(gen).matrix
    t, s = 0.8, 0.45
    e_t = Superoperator(expm(lmat * t))
    e_ts = Superoperator(expm(lmat * (t + s)))
    got = compose(invert(e_t).map, e_ts).matrix
    np.testing.assert_allclose(got, expm(lmat * s), atol=1e-8)


def test_invert_singular_is_flagged():
    m = np.eye(4)
    m[1, 1] = 0.0
    inv = invert(Superoperator(m))
    assert inv.pseudo
    assert "pseudoinverse" in inv.map.flags
    np.testing.assert_allclose(inv.map.matrix, np.diag([1.0, 0.0, 1.0, 1.0]))


def test_kraus_maps_have_unit_trace_norm_choi():
    rng = np.random.default_rng(6)
    for d in (2, 3):
        for _ in range(20):
            e = Superoperator.from_kraus(random_kraus(d, rng.integers(1, 5), rng))
            assert e.is_trace_preserving()
            assert trace_norm(choi_of(e)) == pytest.approx(1.0, abs=1e-10)


def test_compose_agrees_with_sequential_application():
    rng = np.random.default_rng(7)
    a = Superoperator.from_kraus(random_kraus(3, 2, rng))
    b = Superoperator.from_kraus(random_kraus(3, 3, rng))
    ab = compose(a, b)
    for _ in range(20):
        psi = rng.normal(size=3) + 1j * rng.normal(size=3)
        rho = np.outer(psi, psi.conj())
        np.testing.assert_allclose(ab.apply(rho), a.apply(b.apply(rho)), atol=1e-10)
    np.testing.assert_allclose(choi_of(ab), choi_by_definition(lambda r: a.apply(b.apply(r)), 3), atol=1e-10)


def test_psd_test_agrees_with_trace_norm_test():
    rng = np.random.default_rng(8)
    maps = [Superoperator.from_kraus(random_kraus(2, 2, rng)) for _ in range(10)]
    maps.append(transpose_map())
    # a non-CP trace-preserving affine mix of identity and transposition
    maps.append(Superoperator(0.3 * np.eye(4) + 0.7 * transpose_map().matrix))
    for e in maps:
        c = choi_of(e)
        psd = min_choi_eigenvalue(e) >= -1e-9
        assert psd == (abs(trace_norm(c) - np.trace(c).real) <= 1e-9)


def test_density_matrix_validation():
    rho = DensityMatrix(np.diag([0.25, 0.75]))
    assert rho.dim == 2
    assert np.asarray(rho)[1, 1] == 0.75
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(NonHermitianError):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
