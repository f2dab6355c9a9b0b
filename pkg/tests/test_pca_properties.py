"""Invariants of the discrete engine, checked over random configurations."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toomlab.pca import (
    FLIP,
    PI_TOOM,
    TOOM,
    NoiseModel,
    SpinConfig,
    apply_rule,
    negate,
    pca_step,
    run_pca,
    shifted_cells,
)
from toomlab.streams import derive_stream


@st.composite
def spin_configs(draw, max_side=8):
    w = draw(st.integers(2, max_side))
    h = draw(st.integers(2, max_side))
    bits = draw(
        st.lists(st.integers(0, 1), min_size=w * h, max_size=w * h)
    )
    cells = (2 * np.array(bits, dtype=np.int8) - 1).reshape(h, w)
    return SpinConfig(cells)


def site_loop_apply(config, rule, order):
    """Double-buffered per-site update in an arbitrary site order."""
    src = config.cells
    out = np.empty_like(src)
    planes = [shifted_cells(config, dx, dy) for dx, dy in rule.neighborhood]
    for y, x in order:
        values = tuple(int(p[y, x]) for p in planes)
        out[y, x] = rule.output(values)
    return SpinConfig(out, config.boundary, config.fixed_value)


@settings(max_examples=40, deadline=None)
@given(spin_configs(), st.randoms(use_true_random=False))
def test_update_order_is_unobservable(config, pyrandom):
    sites = list(itertools.product(range(config.height), range(config.width)))
    pyrandom.shuffle(sites)
    for rule in (TOOM, PI_TOOM):
        assert apply_rule(config, rule).same_cells(site_loop_apply(config, rule, sites))


@settings(max_examples=60, deadline=None)
@given(spin_configs())
def test_ising_covariance_of_toom_rules(config):
    for rule in (TOOM, PI_TOOM):
        assert apply_rule(negate(config), rule).same_cells(
            negate(apply_rule(config, rule))
        )


@settings(max_examples=60, deadline=None)
@given(spin_configs())
def test_pi_toom_is_flip_after_toom(config):
    composed = apply_rule(apply_rule(config, TOOM), FLIP)
    assert apply_rule(config, PI_TOOM).same_cells(composed)


@settings(max_examples=20, deadline=None)
@given(spin_configs(max_side=6), st.integers(0, 2**32 - 1))
def test_noiseless_run_is_deterministic(config, seed):
    a = run_pca(config, PI_TOOM, NoiseModel(), 5, derive_stream(seed))
    b = run_pca(config, PI_TOOM, NoiseModel(), 5, derive_stream(seed + 1))
    for ca, cb in zip(a.configs, b.configs):
        assert ca.same_cells(cb)


def enumerate_kernel_rows(width, height, noise):
    """Exact single-step Markov matrix of the Toom PCA on a tiny lattice."""
    n = width * height
    stay = 1.0 - noise.eps_plus - noise.eps_minus
    rows = np.empty((2**n, 2**n))
    for src in range(2**n):
        bits = [(src >> (n - 1 - i)) & 1 for i in range(n)]
        cells = (2 * np.array(bits, dtype=np.int8) - 1).reshape(height, width)
        out = apply_rule(SpinConfig(cells), TOOM).cells.reshape(-1)
        p_plus = np.where(out > 0, noise.eps_plus + stay, noise.eps_plus)
        for dst in range(2**n):
            p = 1.0
            for i in range(n):
                want_plus = (dst >> (n - 1 - i)) & 1
                p *= p_plus[i] if want_plus else 1.0 - p_plus[i]
            rows[src, dst] = p
    return rows


@pytest.mark.parametrize("dims", [(2, 2), (3, 3)])
def test_markov_rows_normalize(dims):
    rows = enumerate_kernel_rows(*dims, NoiseModel(0.07, 0.21))
    assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-12)


def test_conditional_error_rate_is_history_independent():
    """P(error | past error pattern) equals eps for the product noise model."""
    eps_plus, eps_minus = 0.04, 0.04
    noise = NoiseModel(eps_plus, eps_minus)
    rng = derive_stream(17)
    c = SpinConfig.uniform(8, 8)
    steps = 4000
    errors = np.empty((steps, 8, 8), dtype=bool)
    prev = c
    for t in range(steps):
        nxt = pca_step(prev, PI_TOOM, noise, rng)
        errors[t] = nxt.cells != apply_rule(prev, PI_TOOM).cells
        prev = nxt
    # condition on whether the same site erred in the previous step
    now, before = errors[1:].reshape(-1), errors[:-1].reshape(-1)
    overall = errors.mean()
    for condition in (before, ~before):
        sel = now[condition]
        rate = sel.mean()
        sigma = np.sqrt(0.04 * 0.96 / sel.size)
        assert abs(rate - 0.04) < 3 * sigma
    sigma_all = np.sqrt(0.04 * 0.96 / errors.size)
    assert abs(overall - 0.04) < 3 * sigma_all
