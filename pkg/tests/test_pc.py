"""Polynomial chaos (intrusive and coupled) — Test Suite.

Proves:
 Group 1 — Basis construction
   1.  term count C(n_active + order, n_active); constant term first
   2.  quadrature Gram matrix is the identity to 1e-12
   3.  input coordinates reconstructed exactly from input_expansions
   4.  degenerate dimensions stay at degree 0 and don't inflate the basis

 Group 2 — Triple products and multiplication
   5.  triple tensor matches a brute-force oracle quadrature to 1e-12
   6.  tensor is symmetric under all index permutations, bit-exactly
   7.  fast (nodal) multiply == tensor contraction == brute triple sum
   8.  linear_operator row action matches the tensor definition
   9.  moments_from_pc: mean = c0, std = rms of the tail

 Group 3 — Propagation
  10.  case-1 Galerkin std within 0.5% of the quadrature oracle
  11.  coupled PC equals fully intrusive Galerkin for case 1 (linear micro)
  12.  rho = 0 collapses to the deterministic trajectory
  13.  coefficient blow-up raises PCDivergenceError with the step index
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from musc_up.coupling import run_coupled
from musc_up.models.case1 import Case1Config, Case1Model, case1_config, case1_distribution
from musc_up.pc import (
    PCDivergenceError,
    build_basis,
    coupled_pc_run,
    galerkin_multiply,
    galerkin_run_1d,
    moments_from_pc,
)
from musc_up.sampling import InputDistribution

from oracles import brute_galerkin_multiply, brute_triple_tensor, case1_oracle_moments

DIST = InputDistribution(np.array([2.0, 5.0]), np.array([0.1, 0.3]))


# ── Group 1 — Basis construction ─────────────────────────────────────────────


def test_term_count_and_ordering():
    for order in (0, 1, 2, 3, 5):
        basis = build_basis(DIST, order)
        assert basis.n_terms == math.comb(2 + order, 2)
        np.testing.assert_array_equal(basis.multi_indices[0], [0, 0])
        # graded ordering: total degree is non-decreasing
        degs = basis.multi_indices.sum(axis=1)
        assert np.all(np.diff(degs) >= 0)


def test_gram_is_identity():
    basis = build_basis(DIST, 4)
    np.testing.assert_allclose(basis.gram(), np.eye(basis.n_terms), atol=1e-12)


def test_input_expansion_reconstruction():
    basis = build_basis(DIST, 3)
    exp = basis.input_expansions()
    rebuilt = basis.psi @ exp.T  # (n_nodes, n_dims)
    np.testing.assert_allclose(rebuilt, basis.nodes, rtol=1e-13)


def test_degenerate_dimension_collapses():
    half = InputDistribution(np.array([2.0, 5.0]), np.array([0.1, 0.0]))
    basis = build_basis(half, 3)
    assert basis.n_terms == 4  # univariate cubic
    assert np.all(basis.multi_indices[:, 1] == 0)
    np.testing.assert_array_equal(basis.nodes[:, 1], 5.0)
    both = InputDistribution(np.array([2.0, 5.0]), np.array([0.0, 0.0]))
    assert build_basis(both, 3).n_terms == 1


# ── Group 2 — Triple products and multiplication ─────────────────────────────


def test_triple_tensor_matches_brute_oracle():
    basis = build_basis(DIST, 3)
    signed_half = DIST.means * DIST.rel_half_widths
    oracle = brute_triple_tensor(
        basis.multi_indices, DIST.means, signed_half, level=basis.level + 8
    )
    assert np.max(np.abs(basis.triple - oracle)) < 1e-12


def test_triple_tensor_symmetry():
    t = build_basis(DIST, 4).triple
    for perm in ((0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        np.testing.assert_array_equal(t, np.transpose(t, perm))


def test_multiply_paths_agree():
    basis = build_basis(DIST, 3)
    rng = np.random.default_rng(0)
    a = rng.standard_normal((basis.n_terms, 4, 3))
    b = rng.standard_normal((basis.n_terms, 4, 3))
    via_tensor = galerkin_multiply(a, b, basis.triple)
    via_nodal = basis.multiply(a, b)
    via_brute = brute_galerkin_multiply(a, b, basis.triple)
    np.testing.assert_allclose(via_nodal, via_tensor, atol=1e-12)
    np.testing.assert_allclose(via_tensor, via_brute, atol=1e-12)


def test_linear_operator_definition():
    basis = build_basis(DIST, 2)
    rng = np.random.default_rng(1)
    coeff = rng.standard_normal(basis.n_terms)
    u = rng.standard_normal(basis.n_terms)
    m = basis.linear_operator(coeff)
    np.testing.assert_allclose(
        m @ u, galerkin_multiply(coeff, u, basis.triple), rtol=1e-12, atol=1e-14
    )


def test_moments_formula():
    coeffs = np.array([[3.0], [0.4], [-0.3]])
    mean, std = moments_from_pc(coeffs)
    assert mean[0] == 3.0
    assert std[0] == pytest.approx(math.hypot(0.4, 0.3), rel=1e-15)


# ── Group 3 — Propagation ────────────────────────────────────────────────────


def test_case1_galerkin_vs_oracle():
    dist = case1_distribution()
    cfg = case1_config(dist=dist)
    res = galerkin_run_1d(cfg, dist, order=4, store="final")
    est = res.moments.final
    scales = cfg.time_scales()
    x = cfg.grid.points()
    om, os = case1_oracle_moments(
        x, scales.n_steps * scales.dt_macro,
        (dist.lower[0], dist.upper[0]), (dist.lower[1], dist.upper[1]),
    )
    assert np.mean(np.abs(est.std - os) / os) < 5e-3
    assert np.mean(np.abs(est.mean - om) / np.abs(om)) < 5e-3


def test_coupled_equals_intrusive_for_linear_micro():
    dist = case1_distribution()
    cfg = case1_config(dist=dist)
    gal = galerkin_run_1d(cfg, dist, order=3, store="final")
    coup = coupled_pc_run(Case1Model(cfg), dist, order=3, store="final")
    np.testing.assert_allclose(coup.coeffs, gal.coeffs, rtol=1e-11, atol=1e-11)


def test_rho_zero_collapse():
    dist0 = case1_distribution(rel_half_width=0.0)
    cfg = case1_config(dist=dist0)
    model = Case1Model(cfg)
    det = run_coupled(
        model.macro_step, model.micro_step, model.params_from_xi(dist0.means),
        cfg.time_scales(), model.initial_state(), store="final",
    ).final.values
    res = galerkin_run_1d(cfg, dist0, order=4, store="final")
    est = res.moments.final
    assert res.basis.n_terms == 1
    np.testing.assert_allclose(est.mean, det, rtol=1e-10)
    assert np.max(est.std) < 1e-12


def test_divergence_aborts_with_step_index():
    """k*dt_micro = 0.9 is per-substep stable but compounds ~1.9x per substep;
    coefficients cross the magnitude guard long before t_end."""
    dist = case1_distribution()
    k_up = dist.upper[1]
    dt_micro = 0.9 / k_up
    cfg = Case1Config(dx=1e-2, n_micro=2, dt_macro=2 * dt_micro, t_end=40 * dt_micro)
    with pytest.raises(PCDivergenceError) as err:
        galerkin_run_1d(cfg, dist, order=2, store="final")
    assert 1 <= err.value.step <= 20
    assert "diverged" in str(err.value)
