import numpy as np
import pytest

from errors import DimensionError
from hilbert import (
    DensityMatrix,
    LevelScheme,
    ProductBasis,
    PureState,
    basis_index,
    compress,
    dagger,
    ground_indices,
    inner,
    ket,
    kron,
    labels_of,
    mixture,
    pair_projector,
    pair_sum,
    reachable_indices,
    site_operator,
    superpose,
    to_density,
    transition,
)


def _two_atoms():
    return ProductBasis.uniform(2, ("0", "1", "r"))


def _three_atoms():
    return ProductBasis.uniform(3, ("0", "1", "r"))


def test_basis_index_is_lexicographic_leftmost_major():
    two = _two_atoms()
    assert basis_index(two, ("0", "0")) == 0
    assert basis_index(two, ("r", "r")) == 8
    assert basis_index(two, "r0") == 6
    assert basis_index(_three_atoms(), ("1", "1", "1")) == 13
    assert basis_index(_three_atoms(), "1r1") == 9 + 6 + 1


def test_ket_11_sits_at_index_4():
    b = _two_atoms()
    assert ket(b, "11").amplitudes[4] == 1
    assert abs(inner(ket(b, "11"), ket(b, "10"))) == 0


def test_labels_of_inverts_basis_index():
    b = ProductBasis.uniform(2, ("0", "1", "2", "r"))
    for i in range(b.dim):
        assert basis_index(b, labels_of(b, i)) == i
    with pytest.raises(DimensionError):
        labels_of(b, b.dim)


def test_unknown_label_and_wrong_length_raise():
    b = _two_atoms()
    with pytest.raises(DimensionError):
        basis_index(b, "x0")
    with pytest.raises(DimensionError):
        basis_index(b, "000")
    with pytest.raises(DimensionError):
        LevelScheme(("0", "0"))


def test_ket_is_unit_vector():
    b = _three_atoms()
    v = ket(b, "1r0").amplitudes
    assert v.shape == (27,)
    assert np.count_nonzero(v) == 1
    assert v[basis_index(b, "1r0")] == 1


def test_states_reject_bad_input():
    with pytest.raises(DimensionError):
        PureState(np.array([1.0, 1.0]))
    with pytest.raises(DimensionError):
        DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(DimensionError):
        DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(DimensionError):
        DensityMatrix(np.diag([1.2, -0.2]))


def test_site_operator_acts_on_one_site_only():
    b = _three_atoms()
    op = site_operator(b, 1, "r", "1")
    out = op @ ket(b, "010").amplitudes
    assert np.allclose(out, ket(b, "0r0").amplitudes)
    assert np.allclose(op @ ket(b, "100").amplitudes, 0)


def test_site_operators_on_different_sites_commute():
    b = _three_atoms()
    a = site_operator(b, 0, "r", "1")
    c = site_operator(b, 2, "0", "r")
    assert np.allclose(a @ c, c @ a)


def test_first_atom_raising_operator_element():
    b = _two_atoms()
    op = site_operator(b, 0, "r", "1")
    col = basis_index(b, "10")
    assert op[basis_index(b, "r0"), col] == 1
    assert np.count_nonzero(op[:, col]) == 1
    assert np.allclose(dagger(op), site_operator(b, 0, "1", "r"))


def test_same_site_products_compose():
    b = _two_atoms()
    ab = site_operator(b, 1, "r", "1") @ site_operator(b, 1, "1", "0")
    assert np.allclose(ab, site_operator(b, 1, "r", "0"))
    assert np.allclose(site_operator(b, 1, "r", "1") @ site_operator(b, 1, "0", "0"), 0)
    p = site_operator(b, 1, "0", "0")
    assert np.allclose(p @ p, p)


def test_site_operator_matches_explicit_kron():
    b = _two_atoms()
    local = np.zeros((3, 3))
    local[2, 1] = 1
    assert np.allclose(site_operator(b, 0, "r", "1"), np.kron(local, np.eye(3)))
    assert np.allclose(site_operator(b, 1, "r", "1"), np.kron(np.eye(3), local))


def test_site_out_of_range_raises():
    with pytest.raises(DimensionError):
        site_operator(_two_atoms(), 2, "r", "1")


def test_pair_projector_and_pair_sum():
    b = _three_atoms()
    p = pair_projector(b, 0, "r", 2, "r")
    assert np.allclose(p @ p, p)
    assert p[basis_index(b, "r0r"), basis_index(b, "r0r")] == 1
    with pytest.raises(DimensionError):
        pair_projector(b, 1, "r", 1, "r")

    s = pair_sum(b, "r", "r")
    assert s[basis_index(b, "rrr"), basis_index(b, "rrr")] == 3
    assert s[basis_index(b, "rr0"), basis_index(b, "rr0")] == 1
    assert s[basis_index(b, "r00"), basis_index(b, "r00")] == 0


def test_kron_identities_and_cap(monkeypatch):
    a = np.arange(4).reshape(2, 2).astype(complex)
    assert np.allclose(kron(np.eye(1), a), a)
    assert np.allclose(dagger(kron(a, a)), kron(dagger(a), dagger(a)))

    monkeypatch.setenv("URP_MAX_DIM", "8")
    with pytest.raises(DimensionError):
        kron(np.eye(3), np.eye(3))
    with pytest.raises(DimensionError):
        ProductBasis.uniform(2, ("0", "1", "r"))


def test_superpose_mixture_and_density():
    b = _two_atoms()
    phi = superpose(b, {"00": 1, "11": 1})
    assert abs(inner(phi, ket(b, "00")) - 1 / np.sqrt(2)) < 1e-15
    rho = to_density(phi)
    assert abs(np.trace(rho.entries) - 1) < 1e-12

    mix = mixture(b, {"11": 0.2, "00": 0.3, "10": 0.25, "01": 0.25})
    assert np.isclose(mix.entries[basis_index(b, "11"), basis_index(b, "11")], 0.2)
    with pytest.raises(DimensionError):
        mixture(b, {"11": 0.5})


def test_transition_is_composite_outer_product():
    b = _two_atoms()
    op = transition(b, "r0", "10")
    assert np.allclose(op @ ket(b, "10").amplitudes, ket(b, "r0").amplitudes)
    assert np.count_nonzero(op) == 1


def test_reachable_indices_follow_operator_graph():
    b = _two_atoms()
    h = transition(b, "r0", "10") + transition(b, "10", "r0")
    decay = transition(b, "00", "r0")
    found = reachable_indices([h, decay], [basis_index(b, "10")])
    assert found == sorted(basis_index(b, s) for s in ("10", "r0", "00"))
    sub = compress(h, found)
    assert sub.shape == (3, 3)


def test_ground_indices():
    b = _two_atoms()
    assert ground_indices(b, ("0", "1")) == [basis_index(b, s) for s in ("00", "01", "10", "11")]
