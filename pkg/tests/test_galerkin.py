import numpy as np
import pytest

import liegroup_index as li


@pytest.fixture(scope="module")
def t1():
    return li.torus(1)


def random_invariant_table(group, band, rng):
    table = {}
    for lab in li.labels_for_band(group, band):
        d = lab.dim
        table[lab] = (rng.standard_normal((d, d))
                      + 1j * rng.standard_normal((d, d)))
    return table


def test_gram_identity(t1):
    for group, band in ((t1, 6), (li.SU2, 4), (li.torus(2), 2)):
        basis = li.basis_for_band(group, band)
        gram = li.gram_matrix(basis)
        assert np.abs(gram - np.eye(basis.size)).max() <= 1e-8


def test_basis_ordering_deterministic(t1):
    basis = li.basis_for_band(li.SU2, 2)
    weights = [xi.weight for xi, _, _ in basis.entries]
    assert weights == sorted(weights)
    assert basis.size == sum(l.dim ** 2 for l in basis.labels)


def test_assemble_identity(t1):
    basis = li.basis_for_band(t1, 6)
    g = li.assemble(li.identity_symbol(t1), basis, basis)
    assert np.abs(g.matrix - np.eye(basis.size)).max() <= 1e-8


def test_assemble_invariant_blocks(rng):
    # block structure verified entrywise against the symbol matrices
    table = random_invariant_table(li.SU2, 3, rng)
    sym = li.table_symbol(li.SU2, table)
    basis = li.basis_for_band(li.SU2, 3)
    g = li.assemble(sym, basis, basis)
    for lab in basis.labels:
        d = lab.dim
        base = basis.offsets[lab]
        for i in range(d):
            for j in range(d):
                col = base + i * d + j
                expected = np.zeros(basis.size, dtype=complex)
                expected[base + i * d:base + (i + 1) * d] = table[lab][:, j]
                np.testing.assert_allclose(g.matrix[:, col], expected, atol=1e-10)


def test_assemble_fast_path_matches_quadrature(rng):
    table = random_invariant_table(li.SU2, 2, rng)
    sym = li.table_symbol(li.SU2, table)
    slow_sym = li.MatrixSymbol(li.SU2, 0.0, 0, False, {"kind": "slow"},
                               sym._eval, None, max_band=sym.max_band)
    basis = li.basis_for_band(li.SU2, 2)
    fast = li.assemble(sym, basis, basis)
    slow = li.assemble(slow_sym, basis, basis)
    np.testing.assert_allclose(fast.matrix, slow.matrix, atol=1e-10)


def test_assemble_winding_shift_matrix(t1):
    # explicit coefficient-map oracle: e_l -> e_{l+1} for l >= 0, e_l for l < 0
    m = li.index_truncation(li.winding_symbol(t1, 1), 4)
    expected = np.zeros(m.shape)
    for pos, (xi, _, _) in enumerate(m.domain.entries):
        l = xi.label[0]
        target = li.torus_label(t1, [l + 1 if l >= 0 else l])
        expected[m.codomain.index_of(target, 0, 0), pos] = 1.0
    np.testing.assert_allclose(m.matrix, expected, atol=1e-10)


def test_assemble_linearity(t1, rng):
    basis = li.basis_for_band(t1, 4)
    grid = li.haar_quadrature(t1, 11)
    fn1, b1, w1 = li.torus_function(t1, {(1,): 0.7, (-1,): 0.7})
    fn2, b2, w2 = li.torus_function(t1, {(0,): 1.0, (1,): -0.2j})
    s1 = li.pointwise_symbol(t1, fn1, w1, {"k": 1}, b1)
    s2 = li.pointwise_symbol(t1, fn2, w2, {"k": 2}, b2)
    cod = li.basis_for_band(t1, 5)
    g1 = li.assemble(s1, basis, cod, grid)
    g2 = li.assemble(s2, basis, cod, grid)
    gsum = li.assemble(li.symbol_sum([s1, s2], [2.0, -3.0]), basis, cod, grid)
    np.testing.assert_allclose(gsum.matrix, 2.0 * g1.matrix - 3.0 * g2.matrix,
                               atol=1e-10)


def test_assemble_rejects_aliasing(t1):
    basis = li.basis_for_band(t1, 4)
    with pytest.raises(li.AliasingError) as err:
        li.assemble(li.winding_symbol(t1, 1), basis, basis)
    assert err.value.required_band == 5


def test_adjoint_involution_and_blocks(rng):
    table = random_invariant_table(li.SU2, 2, rng)
    sym = li.table_symbol(li.SU2, table)
    basis = li.basis_for_band(li.SU2, 2)
    g = li.assemble(sym, basis, basis)
    gadj = li.adjoint(g)
    np.testing.assert_allclose(li.adjoint(gadj).matrix, g.matrix)
    star = li.table_symbol(li.SU2, {lab: m.conj().T for lab, m in table.items()})
    np.testing.assert_allclose(gadj.matrix,
                               li.assemble(star, basis, basis).matrix, atol=1e-10)


def test_self_adjoint_multiplier_hermitian(t1):
    basis = li.basis_for_band(li.SU2, 3)
    g = li.assemble(li.lambda_multiplier(li.SU2, 2.0), basis, basis)
    assert np.abs(li.adjoint(g).matrix - g.matrix).max() <= 1e-10


def test_adjoint_matches_adjoint_symbol_assembly(t1):
    # alias-free variable-coefficient case on matched bands
    fn, batch, w = li.torus_function(t1, {(1,): 0.5, (-1,): 0.25j})
    sym = li.pointwise_symbol(t1, fn, w, {"k": "c"}, batch)
    fnc, batchc, _ = li.torus_function(t1, {(-1,): 0.5, (1,): -0.25j})
    adj_sym = li.pointwise_symbol(t1, fnc, w, {"k": "cbar"}, batchc)
    dom = li.basis_for_band(t1, 3)
    cod = li.basis_for_band(t1, 4)
    grid = li.haar_quadrature(t1, 11)
    g = li.assemble(sym, dom, cod, grid)
    g2 = li.assemble(adj_sym, cod, dom, grid, check_aliasing=False)
    np.testing.assert_allclose(li.adjoint(g).matrix, g2.matrix, atol=1e-8)


def test_compose_with_identity(t1):
    basis = li.basis_for_band(t1, 5)
    g = li.assemble(li.lambda_multiplier(t1, 1.0), basis, basis)
    ident = li.assemble(li.identity_symbol(t1), basis, basis)
    np.testing.assert_allclose(li.compose(g, ident).matrix, g.matrix, atol=1e-10)
    np.testing.assert_allclose(li.compose(ident, g).matrix, g.matrix, atol=1e-10)


def test_compose_invariant_blocks_multiply(rng):
    ta = random_invariant_table(li.SU2, 2, rng)
    tb = random_invariant_table(li.SU2, 2, rng)
    prod = {lab: ta[lab] @ tb[lab] for lab in ta}
    basis = li.basis_for_band(li.SU2, 2)
    ga = li.assemble(li.table_symbol(li.SU2, ta), basis, basis)
    gb = li.assemble(li.table_symbol(li.SU2, tb), basis, basis)
    gp = li.assemble(li.table_symbol(li.SU2, prod), basis, basis)
    np.testing.assert_allclose(li.compose(ga, gb).matrix, gp.matrix, atol=1e-12)


def test_compose_winding_pair_interior_identity(t1):
    plus = li.winding_symbol(t1, 1)
    minus = li.winding_symbol(t1, -1)
    m_minus = li.index_truncation(minus, 6)
    cod_labels = li.index_codomain_labels(plus, m_minus.codomain)
    m_plus = li.assemble(plus, m_minus.codomain,
                         li.PeterWeylBasis(t1, tuple(cod_labels)))
    comp = li.compose(m_plus, m_minus)
    # winding(+1) o winding(-1) fixes every mode except l = 0
    for pos, (xi, _, _) in enumerate(comp.domain.entries):
        l = xi.label[0]
        col = comp.matrix[:, pos]
        if l == 0:
            target = comp.codomain.index_of(li.torus_label(t1, [-1]), 0, 0)
        else:
            target = comp.codomain.index_of(xi, 0, 0)
        expected = np.zeros(len(col))
        expected[target] = 1.0
        np.testing.assert_allclose(col, expected, atol=1e-10)


def test_compose_requires_matching_bases(t1):
    b1 = li.basis_for_band(t1, 3)
    b2 = li.basis_for_band(t1, 4)
    g1 = li.assemble(li.identity_symbol(t1), b1, b1)
    g2 = li.assemble(li.identity_symbol(t1), b2, b2)
    with pytest.raises(li.GroupMismatchError):
        li.compose(g1, g2)


def test_frozen_product_identity_factor(t1, rng):
    table = random_invariant_table(t1, 4, rng)
    sym = li.table_symbol(t1, table)
    prod = li.frozen_symbol_product(li.identity_symbol(t1), sym)
    x = li.identity(t1)
    for lab in li.labels_for_band(t1, 4):
        np.testing.assert_allclose(prod.evaluate(x, lab), table[lab])


def test_frozen_product_matches_block_composition(rng):
    ta = random_invariant_table(li.SU2, 2, rng)
    tb = random_invariant_table(li.SU2, 2, rng)
    basis = li.basis_for_band(li.SU2, 2)
    ga = li.assemble(li.table_symbol(li.SU2, ta), basis, basis)
    gb = li.assemble(li.table_symbol(li.SU2, tb), basis, basis)
    fz = li.frozen_symbol_product(li.table_symbol(li.SU2, ta),
                                  li.table_symbol(li.SU2, tb))
    np.testing.assert_allclose(li.compose(ga, gb).matrix,
                               li.assemble(fz, basis, basis).matrix, atol=1e-8)
    assert fz.is_invariant


def test_frozen_product_winding_discrepancy(t1):
    # frozen product of the adjoint pair: 1 away from l = 0 but 0 there,
    # while the symbol of A* A is the identity symbol (A is an isometry)
    w = li.winding_symbol(t1, 1)
    wstar = li.winding_adjoint_symbol(t1, 1)
    prod = li.frozen_symbol_product(wstar, w)
    x = li.torus_point(t1, [0.21])
    assert prod.evaluate(x, li.torus_label(t1, [0]))[0, 0] == 0.0
    assert prod.evaluate(x, li.torus_label(t1, [3]))[0, 0] == pytest.approx(1.0)
    assert prod.evaluate(x, li.torus_label(t1, [-2]))[0, 0] == pytest.approx(1.0)

    rule = li.haar_quadrature(t1, 21)
    band = li.labels_for_band(t1, 4)
    trunc = li.index_truncation(w, 8)

    def apply_astar_a(f):
        fhat = li.fourier_forward(f, list(trunc.domain.labels))
        coeffs = np.array([fhat[xi][0, 0] for xi, _, _ in trunc.domain.entries])
        out_coeffs = trunc.matrix.conj().T @ (trunc.matrix @ coeffs)
        vals = np.zeros(f.rule.n_nodes, dtype=complex)
        for pos, (xi, _, _) in enumerate(trunc.domain.entries):
            vals += out_coeffs[pos] * np.exp(
                2j * np.pi * xi.label[0] * f.rule.charts[:, 0])
        return li.SampledFunction(f.rule, vals)

    extracted = li.symbol_of_operator(apply_astar_a, rule, band)
    for lab in band:
        np.testing.assert_allclose(extracted.evaluate_on_rule(rule, lab),
                                   np.ones((rule.n_nodes, 1, 1)), atol=1e-8)


def test_cache_round_trip_and_verify(t1, tmp_path):
    m = li.index_truncation(li.winding_symbol(t1, 2), 5)
    path = li.save_operator(m, str(tmp_path))
    header, matrix = li.read_cache_entry(path)
    np.testing.assert_array_equal(matrix, m.matrix)
    assert header["shape"] == list(m.matrix.shape)

    blob = bytearray(open(path, "rb").read())
    blob[-5] ^= 0xFF  # flip one payload bit
    open(path, "wb").write(bytes(blob))
    with pytest.raises(ValueError):
        li.read_cache_entry(path)


def test_operator_cache_hit_miss(t1, tmp_path):
    cache = li.OperatorCache(str(tmp_path))
    m1 = li.index_truncation(li.winding_symbol(t1, 1), 4, cache=cache)
    assert cache.hits == 0 and cache.misses > 0
    misses = cache.misses
    m2 = li.index_truncation(li.winding_symbol(t1, 1), 4, cache=cache)
    assert cache.misses == misses and cache.hits > 0
    np.testing.assert_allclose(m1.matrix, m2.matrix)
