from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfmkit import (
    CumulantTensor,
    FidelityMatrix,
    QubitLayout,
    SubsystemSelection,
    ValidationError,
    cluster_product,
    cumulant1,
    cumulant2,
    cumulant3,
    marginalize,
    permute_qubits,
    reconstruct_order2,
    reorder,
    scf,
    scf_by_target_state,
    tensor_product,
)
from mfmkit.cumulant import scf_from_joint

from oracles import (
    bits,
    combos,
    eq4_cumulant,
    kron_loops,
    marginal,
    partition_counts,
    partition_sum,
    pick,
    stochastic,
)


def _fm(qubits, entries, **kw):
    return FidelityMatrix(QubitLayout(qubits), entries, **kw)


def _random_tensors(rng, width, max_order):
    """Arbitrary (not necessarily physical) block cumulants keyed by ascending positions."""
    return {c: rng.normal(size=(2 ** len(c), 2 ** len(c))) for k in range(1, max_order + 1) for c in combos(width, k)}


def _as_tensors(blocks, qubits):
    return {
        k: [CumulantTensor(QubitLayout([qubits[p] for p in c]), v) for c, v in blocks.items() if len(c) == k]
        for k in (1, 2, 3)
    }


def test_cumulant1_is_identity_map(rng):
    K = _fm([4], stochastic(rng, 2))
    np.testing.assert_array_equal(cumulant1(K).values, K.entries)
    with pytest.raises(ValidationError):
        cumulant1(_fm([0, 1], np.eye(4)))


def test_cumulant2_frozen_example():
    K_ab = _fm(
        [0, 1],
        [
            [0.85, 0.05, 0.05, 0.05],
            [0.05, 0.85, 0.05, 0.05],
            [0.05, 0.05, 0.85, 0.05],
            [0.05, 0.05, 0.05, 0.85],
        ],
    )
    K_a = _fm([0], [[0.9, 0.1], [0.1, 0.9]])
    K_b = _fm([1], [[0.9, 0.1], [0.1, 0.9]])
    lam = cumulant2(K_ab, K_a, K_b)
    # diagonal 0.85 - 0.81, one-flip 0.05 - 0.09, two-flip 0.05 - 0.01
    assert lam.values[0, 0] == pytest.approx(0.04)
    assert lam.values[0, 1] == pytest.approx(-0.04)
    assert lam.values[0, 3] == pytest.approx(0.04)
    assert lam.norm == pytest.approx(0.04 * 4)  # sixteen entries of magnitude 0.04


def test_cumulant2_matches_loops(rng):
    E = stochastic(rng, 4)
    Ka, Kb = marginal(E, 2, [0]), marginal(E, 2, [1])
    lam = cumulant2(_fm([3, 5], E), _fm([3], Ka), _fm([5], Kb))
    expected = E - kron_loops(Ka, Kb)
    np.testing.assert_allclose(lam.values, expected, atol=1e-15)


def test_cumulant2_factor_orientation_is_by_qubit(rng):
    E = stochastic(rng, 4)
    Ka, Kb = _fm([3], marginal(E, 2, [0])), _fm([5], marginal(E, 2, [1]))
    K = _fm([3, 5], E)
    np.testing.assert_allclose(cumulant2(K, Kb, Ka).values, cumulant2(K, Ka, Kb).values)


def test_cumulant2_bias_correction():
    E = np.array([[0.9, 0.05, 0.05, 0.0], [0.1, 0.8, 0.0, 0.1], [0.0, 0.0, 1.0, 0.0], [0.05, 0.05, 0.1, 0.8]])
    K = _fm([0, 1], E, shots=8)
    Ka, Kb = _fm([0], marginal(E, 2, [0])), _fm([1], marginal(E, 2, [1]))
    plain = cumulant2(K, Ka, Kb)
    corrected = cumulant2(K, Ka, Kb, bias_correct=True)
    np.testing.assert_allclose(corrected.values, plain.values * 8 / 7)
    assert corrected.bias_corrected
    with pytest.raises(ValidationError, match="shot count"):
        cumulant2(_fm([0, 1], E), Ka, Kb, bias_correct=True)


def test_cumulant3_matches_brute_force(rng):
    E = stochastic(rng, 8)
    K = _fm([0, 1, 2], E)
    m = {p: marginal(E, 3, list(p)) for p in [(0,), (1,), (2,), (0, 1), (1, 2), (0, 2)]}
    singles = [_fm([q], m[(q,)]) for q in range(3)]
    pairs = [_fm(list(p), m[p]) for p in [(0, 1), (1, 2), (0, 2)]]
    lam = cumulant3(K, pairs, singles)
    expected = eq4_cumulant(E, m[(0, 1)], m[(1, 2)], m[(0, 2)], m[(0,)], m[(1,)], m[(2,)])
    np.testing.assert_allclose(lam.values, expected, atol=1e-14)


def test_cumulant3_accepts_pairs_in_any_orientation(rng):
    E = stochastic(rng, 8)
    K = _fm([7, 8, 9], E)
    singles = [marginalize(K, SubsystemSelection(K.layout, [p])) for p in (2, 0, 1)]
    pairs = [marginalize(K, SubsystemSelection(K.layout, p)) for p in ([1, 0], [2, 1], [0, 2])]
    flipped = cumulant3(K, pairs, singles)
    pairs_asc = [marginalize(K, SubsystemSelection(K.layout, p)) for p in ([0, 1], [1, 2], [0, 2])]
    np.testing.assert_allclose(flipped.values, cumulant3(K, pairs_asc, singles).values, atol=1e-15)


def test_cumulant3_vanishes_for_pair_times_single(rng):
    A, B = stochastic(rng, 4), stochastic(rng, 2)
    K = _fm([0, 1, 2], kron_loops(A, B))
    singles = [marginalize(K, SubsystemSelection(K.layout, [p])) for p in range(3)]
    pairs = [marginalize(K, SubsystemSelection(K.layout, p)) for p in ([0, 1], [1, 2], [0, 2])]
    assert np.abs(cumulant3(K, pairs, singles).values).max() < 1e-15


@pytest.mark.parametrize("width,order", [(2, 2), (3, 2), (4, 2), (5, 2), (4, 3), (5, 3)])
def test_reconstruction_matches_partition_oracle(rng, width, order):
    blocks = _random_tensors(rng, width, order)
    qubits = list(range(10, 10 + width))
    t = _as_tensors(blocks, qubits)
    K = reconstruct_order2(t[1], t[2], QubitLayout(qubits), order=order, triples=t[3])
    np.testing.assert_allclose(K.entries, partition_sum(blocks, width, order), atol=1e-12)
    assert K.raw


def test_partition_counts_via_unit_cumulants():
    # with every block cumulant equal to 1, each entry counts the admissible partitions
    frozen = {(1, 2): 1, (2, 2): 2, (3, 2): 4, (4, 2): 10, (5, 2): 26, (6, 2): 76, (4, 3): 14, (5, 3): 46}
    for (n, order), count in frozen.items():
        assert partition_counts(n, order) == count
        blocks = {c: np.ones((2 ** len(c),) * 2) for k in range(1, order + 1) for c in combos(n, k)}
        t = _as_tensors(blocks, list(range(n)))
        K = reconstruct_order2(t[1], t[2], QubitLayout(range(n)), order=order, triples=t[3])
        np.testing.assert_allclose(K.entries, count)


def test_reconstruction_on_permuted_layout(rng):
    blocks = _random_tensors(rng, 3, 2)
    t = _as_tensors(blocks, [0, 1, 2])
    K = reconstruct_order2(t[1], t[2], QubitLayout([0, 1, 2]))
    Kp = reconstruct_order2(t[1], t[2], QubitLayout([2, 0, 1]))
    np.testing.assert_allclose(Kp.entries, reorder(K, QubitLayout([2, 0, 1])).entries, atol=1e-14)


def test_reconstruction_exact_for_pair_times_singles(rng):
    A = stochastic(rng, 4, diag_weight=3)
    B, C = stochastic(rng, 2, 3), stochastic(rng, 2, 3)
    E = kron_loops(kron_loops(A, B), C)
    K = _fm([0, 1, 2, 3], E)
    sub = lambda p: marginalize(K, SubsystemSelection(K.layout, p))
    singles = {q: sub([q]) for q in range(4)}
    pairs = [cumulant2(sub(list(p)), singles[p[0]], singles[p[1]]) for p in combos(4, 2)]
    R = reconstruct_order2([cumulant1(singles[q]) for q in range(4)], pairs, K.layout)
    np.testing.assert_allclose(R.entries, E, atol=1e-14)


def test_reconstruction_rejects_missing_or_duplicate_inputs(rng):
    blocks = _random_tensors(rng, 3, 2)
    t = _as_tensors(blocks, [0, 1, 2])
    with pytest.raises(ValidationError, match="missing"):
        reconstruct_order2(t[1], t[2][:2], QubitLayout([0, 1, 2]))
    with pytest.raises(ValidationError, match="duplicate"):
        reconstruct_order2(t[1] + t[1][:1], t[2], QubitLayout([0, 1, 2]))
    with pytest.raises(ValidationError, match="order"):
        reconstruct_order2(t[1], t[2], QubitLayout([0, 1, 2]), order=4)


def test_cluster_product_interleaved_example(rng):
    A, B = stochastic(rng, 8), stochastic(rng, 8)
    target = QubitLayout([0, 15, 1, 16, 2, 17])
    K = cluster_product(
        [
            (_fm([0, 1, 2], A), SubsystemSelection.of_qubits(target, [0, 1, 2])),
            (_fm([15, 16, 17], B), SubsystemSelection.of_qubits(target, [15, 16, 17])),
        ],
        target,
    )
    assert K.layout == target
    for i in rng.integers(0, 64, 40):
        for j in rng.integers(0, 64, 40):
            si, sj = bits(int(i), 6), bits(int(j), 6)
            a = A[int(pick(si, [0, 2, 4]), 2), int(pick(sj, [0, 2, 4]), 2)]
            b = B[int(pick(si, [1, 3, 5]), 2), int(pick(sj, [1, 3, 5]), 2)]
            assert K.entries[i, j] == pytest.approx(a * b, abs=1e-15)


def test_cluster_product_rejects_overlap(rng):
    target = QubitLayout([0, 1, 2])
    A = _fm([0, 1], stochastic(rng, 4))
    B = _fm([1, 2], stochastic(rng, 4))
    with pytest.raises(ValidationError):
        cluster_product(
            [(A, SubsystemSelection.of_qubits(target, [0, 1])), (B, SubsystemSelection.of_qubits(target, [1, 2]))],
            target,
        )


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.permutations(range(3)))
def test_permute_round_trip(seed, perm):
    rng = np.random.default_rng(seed)
    K = _fm([5, 6, 7], stochastic(rng, 8))
    P = permute_qubits(K, perm)
    assert P.layout.qubits == tuple(5 + p for p in perm)
    back = reorder(P, K.layout)
    np.testing.assert_array_equal(back.entries, K.entries)
    # marginals follow the qubits, not the positions
    for q in (5, 6, 7):
        m1 = marginalize(K, SubsystemSelection.of_qubits(K.layout, [q]))
        m2 = marginalize(P, SubsystemSelection.of_qubits(P.layout, [q]))
        np.testing.assert_allclose(m1.entries, m2.entries, atol=1e-15)


def test_tensor_product_layout_and_flags(rng):
    A = _fm([3], stochastic(rng, 2), shots=100)
    B = _fm([1], stochastic(rng, 2), shots=100)
    P = tensor_product([A, B])
    assert P.layout.qubits == (3, 1) and P.shots == 100
    with pytest.raises(ValidationError):
        tensor_product([A, A])


def test_scf_zero_for_products(rng):
    A, B = _fm([0], stochastic(rng, 2)), _fm([1, 2], stochastic(rng, 4))
    lam, norm = scf(tensor_product([A, B]), A, B)
    assert norm < 1e-15
    assert lam.order == 3


def test_scf_requires_a_then_b_layout(rng):
    A, B = _fm([0], stochastic(rng, 2)), _fm([1], stochastic(rng, 2))
    with pytest.raises(ValidationError, match="followed by"):
        scf(tensor_product([B, A]), A, B)


def test_scf_from_joint_and_per_state_identity(rng):
    E = stochastic(rng, 8)
    K = _fm([0, 1, 2], E, shots=1000)
    lam, norm = scf_from_joint(K, 1)
    expected = E - kron_loops(marginal(E, 3, [0]), marginal(E, 3, [1, 2]))
    np.testing.assert_allclose(lam.values, expected, atol=1e-15)
    per_state = scf_by_target_state(lam)
    assert [str(k) for k in per_state] == [bits(i, 3) for i in range(8)]
    assert sum(v * v for v in per_state.values()) == pytest.approx(norm**2, rel=1e-12)
    lam_bc, norm_bc = scf_from_joint(K, 1, bias_correct=True)
    assert norm_bc == pytest.approx(norm * 1000 / 999)
