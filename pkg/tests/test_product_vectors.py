import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pptrank.hilbert import BipartiteDims
from pptrank.product_vectors import (
    Expectation,
    ProductVector,
    PvCensus,
    census,
    dedup,
    free_parameters,
    gradient_parts,
    independent_count,
    minimize_batch,
    minimize_once,
    polish,
    predict_count,
    random_product_starts,
)


def _kernel_operator(dims, d, seed):
    """``1 - P`` for a random d-dimensional subspace, and its complement."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((dims.n, dims.n)) + 1j * rng.standard_normal((dims.n, dims.n))
    q, _ = np.linalg.qr(z)
    sub, comp = q[:, :d], q[:, d:]
    return np.eye(dims.n) - sub @ sub.conj().T, sub, comp


def _f(A, phi, chi):
    psi = np.kron(phi, chi)
    return float(np.real(psi.conj() @ A @ psi))


def test_descent_is_monotone_on_100_instances():
    dims_pool = [BipartiteDims(2, 2), BipartiteDims(2, 3), BipartiteDims(3, 3), BipartiteDims(2, 4)]
    for i in range(100):
        dims = dims_pool[i % 4]
        rng = np.random.default_rng(i)
        d = int(rng.integers(1, dims.n))
        A, _, _ = _kernel_operator(dims, d, i)
        phi, chi = random_product_starts(dims, 4, rng)
        trace = []
        minimize_batch(A, dims, phi, chi, max_steps=60, trace=trace)
        t = np.array(trace)
        assert np.all(np.diff(t, axis=0) <= 0), f"instance {i}"
        assert np.all(t >= -1e-12) and np.all(t <= 1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_lambda_identity_and_gradient(seed):
    dims = BipartiteDims(2, 3)
    A, _, _ = _kernel_operator(dims, 3, seed)
    rng = np.random.default_rng(seed)
    phi, chi = random_product_starts(dims, 1, rng)
    lam, x, y, _ = gradient_parts(A, phi, chi, dims)
    assert np.isclose(lam[0], _f(A, phi[0], chi[0]))
    assert abs(np.vdot(phi[0], x[0])) < 1e-12 and abs(np.vdot(chi[0], y[0])) < 1e-12
    # directional derivative along a tangent direction of phi
    delta = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    delta -= np.vdot(phi[0], delta) * phi[0]
    h = 1e-6
    fp = _f(A, (phi[0] + h * delta) / np.linalg.norm(phi[0] + h * delta), chi[0])
    fm = _f(A, (phi[0] - h * delta) / np.linalg.norm(phi[0] - h * delta), chi[0])
    assert np.isclose((fp - fm) / (2 * h), 2 * np.real(np.vdot(delta, x[0])), atol=1e-6)


def test_converged_zero_is_stationary():
    dims = BipartiteDims(2, 2)
    A, sub, comp = _kernel_operator(dims, 3, 0)
    start = ProductVector(np.array([1, 0.3j]) / np.hypot(1, 0.3), np.array([0.2, 1]) / np.hypot(0.2, 1), 0)
    v = minimize_once(A, start, dims)
    assert v.objective < 1e-10
    v2, res = polish(v, [(comp, False)], dims)
    assert res < 1e-13
    _, x, y, _ = gradient_parts(A, v2.phi[None], v2.chi[None], dims)
    assert np.linalg.norm(x) < 1e-7 and np.linalg.norm(y) < 1e-7


@pytest.mark.parametrize("d,dd,kind,count", [
    ((3, 3), 5, "finite", 6), ((3, 4), 7, "finite", 10), ((4, 4), 10, "finite", 20),
    ((2, 4), 4, "finite", 4), ((2, 2), 2, "finite", 2), ((3, 3), 4, "zero", 0),
    ((3, 3), 6, "infinite", 0), ((2, 4), 7, "infinite", 0),
])
def test_predict_count(d, dd, kind, count):
    e = predict_count(BipartiteDims(*d), dd)
    assert e.kind == kind and e.count == count
    assert free_parameters(BipartiteDims(*d), dd) == sum(d) - 2 - d[0] * d[1] + dd
    with pytest.raises(ValueError):
        predict_count(BipartiteDims(*d), -1)


def _rank_one_roots_2x2(sub):
    """Product vectors of a 2-dim subspace of C^2 (x) C^2: det(M1 + t M2) = 0."""
    m1, m2 = sub[:, 0].reshape(2, 2), sub[:, 1].reshape(2, 2)
    # det(m1 + t m2) is quadratic in t
    c2 = np.linalg.det(m2)
    c0 = np.linalg.det(m1)
    c1 = np.linalg.det(m1 + m2) - c0 - c2
    out = []
    for t in np.roots([c2, c1, c0]):
        v = sub[:, 0] + t * sub[:, 1]
        out.append(v / np.linalg.norm(v))
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_census_matches_closed_form_2x2(seed):
    dims = BipartiteDims(2, 2)
    _, sub, _ = _kernel_operator(dims, 2, seed)
    c = census(sub @ sub.conj().T, dims, seed=seed)
    assert c.cell() == "2/2"
    for ref in _rank_one_roots_2x2(sub):
        assert max(abs(np.vdot(v.psi, ref)) for v in c.vectors) > 1 - 1e-8


def test_census_of_span_of_products_finds_exactly_them():
    dims = BipartiteDims(3, 3)
    rng = np.random.default_rng(5)
    phi, chi = random_product_starts(dims, 3, rng)
    psis = [np.kron(p, c) for p, c in zip(phi, chi)]
    q, _ = np.linalg.qr(np.array(psis).T)
    c = census(q @ q.conj().T, dims, seed=1)
    assert c.expected.kind == "zero"
    assert c.cell() == "3/3"
    for p in psis:
        assert max(abs(np.vdot(v.psi, p)) for v in c.vectors) > 1 - 1e-8


def test_census_empty_and_infinite():
    dims = BipartiteDims(3, 3)
    _, sub, _ = _kernel_operator(dims, 2, 9)
    assert census(sub @ sub.conj().T, dims, seed=0).cell() == "0"
    _, sub, _ = _kernel_operator(dims, 7, 9)
    c = census(sub @ sub.conj().T, dims, seed=0)
    assert c.infinite and c.cell() == "inf/7"
    assert census(np.zeros((9, 9)), dims).cell() == "0"


def test_dedup_ignores_phase():
    phi = np.array([1, 0], dtype=complex)
    chi = np.array([0, 1], dtype=complex)
    vs = [ProductVector(phi, chi, 0), ProductVector(1j * phi, chi, 0), ProductVector(chi, phi, 0)]
    assert len(dedup(vs)) == 2
    assert independent_count(vs) == 2
    assert independent_count([]) == 0


def test_census_cell_format():
    e = Expectation("finite", 6)
    assert PvCensus("kernel", 5, e, 6, 5).cell() == "6/5"
    assert PvCensus("kernel", 5, e, "inf", 5).cell() == "inf/5"
    assert PvCensus("kernel", 5, e, 0, 0).cell() == "0"
    assert str(e) == "finite(6)"


def test_zero_operator_is_stationary():
    dims = BipartiteDims(2, 2)
    phi, chi = random_product_starts(dims, 3, 0)
    _, _, f, steps, done = minimize_batch(np.zeros((4, 4)), dims, phi, chi)
    assert np.all(f == 0) and np.all(done) and np.all(steps <= 1)


def test_unique_zero_is_found_from_nearby_start():
    dims = BipartiteDims(3, 3)
    rng = np.random.default_rng(4)
    phi0, chi0 = random_product_starts(dims, 1, rng)
    psi0 = np.kron(phi0[0], chi0[0])
    A = np.eye(9) - np.outer(psi0, psi0.conj())
    start = ProductVector(phi0[0] + 0.1 * rng.standard_normal(3), chi0[0] + 0.1 * rng.standard_normal(3), 0)
    start.phi /= np.linalg.norm(start.phi)
    start.chi /= np.linalg.norm(start.chi)
    v = minimize_once(A, start, dims)
    assert v.objective <= 1e-10
    assert abs(np.vdot(v.psi, psi0)) > 1 - 1e-8


def test_no_zero_in_generic_small_subspace():
    # 3x3 with d = 4: p = -1, so f stays bounded away from zero
    dims = BipartiteDims(3, 3)
    A, _, _ = _kernel_operator(dims, 4, 21)
    phi, chi = random_product_starts(dims, 200, 3)
    _, _, f, _, _ = minimize_batch(A, dims, phi, chi, max_steps=400)
    assert f.min() > 1e-4
