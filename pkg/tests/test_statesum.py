from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhi.decor import Charge, DecoratedTriangulation
from qhi.dilog import basic_L, basic_L_inverse, epsilon, face_matrices
from qhi.harness import Targets, alpha_log_sum, alpha_log_sum_prediction, prepare, root_deviation
from qhi.moves import bubble, c_move, circuit_charge_parity, circuit_move, prepare_circuit
from qhi.statesum import (
    NetworkError,
    StateSumValue,
    TensorNetwork,
    alpha_closed_formula,
    ambiguity_order,
    build_network,
    c_factor,
    canonical_phase,
    contract,
    naive_contract,
    normalization,
    same_class,
    state_sum,
    symmetrization_alpha,
    symmetrization_alpha_exponential,
)
from qhi.triangulation import load


@pytest.fixture(scope="module")
def sister():
    return prepare("m003")


@pytest.fixture(scope="module")
def figure_eight():
    return prepare("m004")


def einsum_contract(net: TensorNetwork) -> complex:
    """Independent oracle: one ``einsum`` call over all slots."""
    letters: dict = {}
    for labs in net.labels:
        for lab in labs:
            letters.setdefault(lab, chr(ord("a") + len(letters)))
    spec = ",".join("".join(letters[l] for l in labs) for labs in net.labels) + "->"
    return complex(np.einsum(spec, *net.tensors, optimize="greedy"))


# -- contraction ---------------------------------------------------------------------------


@pytest.mark.parametrize("N", [3, 5])
def test_greedy_matches_brute_force(sister, N):
    net = build_network(sister.decorated, N)
    greedy = contract(net).value
    assert abs(greedy - naive_contract(net)) < 1e-10 * abs(greedy)


@pytest.mark.parametrize("N", [3, 5, 7])
def test_greedy_matches_einsum(sister, N):
    net = build_network(sister.decorated, N)
    greedy = contract(net).value
    assert abs(greedy - einsum_contract(net)) < 1e-10 * abs(greedy)


def test_sister_network_shape(sister):
    dt = sister.decorated
    net = build_network(dt, 3)
    assert len(net.tensors) == dt.tri.num_tets + len(dt.wb.dual_edges)
    fm = face_matrices(3)
    colored = {name: arr for name, arr in zip(net.names, net.tensors) if name.startswith("Q^") and not name.startswith("Q^0")}
    # the two colored faces carry Q^2 and Q, as powers of the edge operator
    assert sorted(k.split("[")[0] for k in colored) == ["Q^1", "Q^2"]
    for name, arr in colored.items():
        r = int(name[2])
        assert np.allclose(arr, fm.Q_power(-r).T)


@pytest.mark.parametrize("N", [3, 5])
def test_tensor_against_inverse_traces_to_n_squared(N):
    u = 0.4 + 0.3j
    v = cmath.exp(cmath.log(1 - u**N) / N)
    A, B = basic_L(N, u, v), basic_L_inverse(N, u, v)
    net = TensorNetwork([A, B], [("i", "j", "k", "l"), ("i", "j", "k", "l")])
    assert abs(contract(net).value - N * N) < 1e-9


def test_contraction_order_is_deterministic(sister):
    net = build_network(sister.decorated, 5)
    a, b = contract(net), contract(net)
    assert a.order == b.order
    assert a.value == b.value


def test_miswired_network():
    with pytest.raises(NetworkError, match="exactly once"):
        contract(TensorNetwork([np.eye(2)], [("a", "b")]))
    with pytest.raises(NetworkError, match="arity"):
        contract(TensorNetwork([np.eye(2), np.eye(2)], [("a", "b", "c"), ("a", "b")]))


# -- normalization ---------------------------------------------------------------------------


@pytest.mark.parametrize("N", [3, 5, 7, 9, 11])
def test_genuine_branching_normalization(N):
    tri, wb, _ = load("m004")
    assert wb.is_genuine()
    assert c_factor(tri, wb, N) == 1
    assert normalization(tri, wb, N) == 1


@pytest.mark.parametrize("N", [5, 9, 13])
def test_c_factor_trivial_when_n_is_one_mod_four(N):
    tri, wb, _ = load("m003")
    assert c_factor(tri, wb, N) == 1


@pytest.mark.parametrize("N", [3, 5, 7, 9])
def test_sister_normalization(N):
    tri, wb, _ = load("m003")
    # one color-2 edge, v = 0
    assert normalization(tri, wb, N) == pytest.approx(face_matrices(N).phi ** -1 * c_factor(tri, wb, N))


@pytest.mark.parametrize("N", [3, 5, 7])
@pytest.mark.parametrize("site", range(4))
def test_bubble_divides_normalization_by_n(sister, N, site):
    dt = sister.decorated
    moved, _ = bubble(dt, site, 1)
    before = normalization(dt.tri, dt.wb, N)
    after = normalization(moved.tri, moved.wb, N)
    assert after == pytest.approx(before / N, abs=1e-14)


@pytest.mark.parametrize("name", ["m003", "m004"])
@pytest.mark.parametrize("N", [3, 7])
def test_c_factor_independent_of_auxiliary_orientation(name, N):
    tri, wb, _ = load(name)
    rng = np.random.default_rng(7)
    base = c_factor(tri, wb, N)
    for _ in range(10):
        reference = []
        for e in tri.edge_classes:
            t, (a, b) = e.incidences[int(rng.integers(len(e.incidences)))]
            reference.append((t, (a, b) if rng.integers(2) else (b, a)))
        assert c_factor(tri, wb, N, reference) == base


# -- symmetrization factor ----------------------------------------------------------------------


def test_trivial_charges_give_alpha_one(sister):
    dt = sister.decorated
    flat = DecoratedTriangulation(dt.tri, dt.wb, dt.point, dt.f, Charge(((0, 0, 1),) * dt.tri.num_tets))
    for N in (3, 5, 7):
        assert symmetrization_alpha(flat, N) == 1


@pytest.mark.parametrize("kc", [(0, 0), (1, 0), (1, 2), (-1, 2)])
@pytest.mark.parametrize("N", [3, 5, 7, 9])
def test_alpha_product_equals_exponential(kc, N):
    dt = prepare("m003", Targets(k_c=kc)).decorated
    assert abs(symmetrization_alpha(dt, N) - symmetrization_alpha_exponential(dt, N)) < 1e-12


@pytest.mark.parametrize("N", [3, 5, 7, 9])
def test_alpha_at_complete_sister_point(sister, N):
    # frozen from the exponential form: the charge-independent term alone gives exp(i pi (N-1) / (3N))
    alpha = symmetrization_alpha(sister.decorated, N)
    assert abs(alpha - cmath.exp(1j * math.pi * (N - 1) / (3 * N))) < 1e-12


def test_closed_formula_with_zero_charge_weight(sister):
    for N in (3, 5, 7):
        assert alpha_closed_formula(sister.weights, N) == pytest.approx(1)


@pytest.mark.parametrize("kc", [(0, 0), (1, 0), (0, 2), (3, 0), (1, -2)])
@pytest.mark.parametrize("shift", [(0, 0), (1, 0)])
def test_alpha_log_sum_identity(kc, shift):
    prep = prepare("m003", Targets(kf_shift=shift, k_c=kc, complete=False, guess=(0.55 + 0.75j, 0.5 + 0.85j)))
    gap = (alpha_log_sum(prep.decorated) - alpha_log_sum_prediction(prep.decorated, prep.weights)) / (1j * math.pi)
    assert abs(gap - round(gap.real)) < 1e-9


@pytest.mark.parametrize("N", [3, 5, 7, 9])
def test_reduced_times_alpha(sister, N):
    res = state_sum(sister.decorated, N)
    assert res.alpha * res.reduced == pytest.approx(res.value, rel=1e-14)


# -- phases --------------------------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(
    re=st.floats(-5, 5), im=st.floats(-5, 5), N=st.sampled_from([3, 5, 7, 9]), n=st.integers(0, 40),
)
def test_canonical_phase_is_class_invariant(re, im, N, n):
    v = complex(re, im)
    if abs(v) < 1e-6:
        return
    a = canonical_phase(v, N)
    b = canonical_phase(v * cmath.exp(2j * math.pi * n / N), N)
    assert a[0] == pytest.approx(b[0])
    period = 2 * math.pi / N
    d = abs(a[1] - b[1]) % period
    assert min(d, period - d) < 1e-9


@settings(max_examples=60, deadline=None)
@given(phase=st.floats(0, 2 * math.pi), N=st.sampled_from([3, 5, 7]), n=st.integers(0, 30), flip=st.booleans())
def test_two_n_class_is_n_class_up_to_sign(phase, N, n, flip):
    a = 1.7 * cmath.exp(1j * phase)
    b = a * cmath.exp(2j * math.pi * n / N) * (-1 if flip else 1)
    assert same_class(a, b, 2 * N)
    assert same_class(a, b, N) or same_class(a, -b, N)
    assert same_class(a, b, N) == (not flip)


def test_zero_value_has_undefined_phase():
    mod, ph = canonical_phase(0j, 5)
    assert mod == 0 and math.isnan(ph)


def test_state_sum_value_power():
    v = StateSumValue(cmath.exp(0.3j), 6)
    assert v.power() == pytest.approx(cmath.exp(1.8j))
    assert v.canonical()[1] == pytest.approx(0.3)


def test_ambiguity_orders():
    assert [ambiguity_order(N) for N in (3, 5, 7, 9)] == [6, 5, 14, 9]


# -- invariance ------------------------------------------------------------------------------------


def test_pipeline_is_reproducible(sister):
    a = state_sum(sister.decorated, 3)
    b = state_sum(prepare("m003").decorated, 3)
    assert a.value == b.value
    assert a.ambiguity == 6


@pytest.mark.parametrize("N", [3, 5, 7])
def test_flattening_shift_by_n_is_bit_identical(sister, N):
    dt = sister.decorated
    base = state_sum(dt, N)
    for t in range(dt.tri.num_tets):
        for k in range(3):
            shifted = DecoratedTriangulation(dt.tri, dt.wb, dt.point, dt.f.shifted(t, k, N), dt.c)
            res = state_sum(shifted, N)
            assert res.raw == base.raw
            assert res.order == base.order


@pytest.mark.parametrize("kc", [(1, 0), (-1, 0)])
@pytest.mark.parametrize("circuit", [[0, 2], [1, 3]])
@pytest.mark.parametrize("N", [5, 7, 9, 11])
def test_circuit_move_sign_is_epsilon_to_hc(kc, circuit, N):
    dt = prepare("m003", Targets(k_c=kc)).decorated
    _, moves = prepare_circuit(dt.tri, dt.wb, circuit)
    for t, beta in moves:
        dt = c_move(dt, t, beta)
    hc = circuit_charge_parity(dt.wb, circuit, dt.c.values)
    assert hc == 1
    before = state_sum(dt, N).value
    after = state_sum(circuit_move(dt, circuit), N).value
    assert root_deviation(after, epsilon(N) ** hc * before, N) < 1e-8


def test_classical_limit_needs_genuine_branching(sister):
    with pytest.raises(ValueError, match="genuine"):
        state_sum(sister.decorated, 1)


def test_classical_limit_ignores_charges(figure_eight):
    dt = figure_eight.decorated
    other = DecoratedTriangulation(dt.tri, dt.wb, dt.point, dt.f, Charge(((0, 0, 1),) * dt.tri.num_tets))
    assert state_sum(dt, 1).value == state_sum(other, 1).value
