import numpy as np
import pytest
from scipy import stats

from bedsense import (BatchPolicy, ConfigurationError, ContractError, ControlGrid, EigTable,
                      ParticleCloud, eig_table, predicted_probability, sample_batch,
                      select_optimal, throughput_bench)
from bedsense.eig import batch_distribution, eig_from_likelihoods
from bedsense.models import NuclearSpinModel


class TableModel:
    """Stub model whose Pr(1) is a fixed (control x particle) table."""

    def __init__(self, pr1):
        self.pr1 = np.asarray(pr1, float)

    def likelihood_grid(self, locations, taus, dtype=np.float32):
        idx = np.asarray(taus, int) - 1
        p1 = self.pr1[idx]
        return (1.0 - p1).astype(dtype), p1.astype(dtype)

    def likelihood(self, locations, tau, outcome):
        p1 = self.pr1[int(tau) - 1]
        return p1 if outcome else 1.0 - p1


def cloud(w):
    w = np.asarray(w, float)
    return ParticleCloud(np.arange(w.size, dtype=float)[:, None], w)


def binary_entropy(p):
    return -p * np.log(p) - (1 - p) * np.log(1 - p)


def test_grid_arange_and_lookup():
    g = ControlGrid.arange(1.0, 10.0, 0.01)
    assert len(g) == 901
    assert g.step == pytest.approx(0.01)
    assert g.index_of(5.0) == 400
    with pytest.raises(ContractError):
        g.index_of(5.005)
    assert len(ControlGrid.arange(0.51, 7.0, 0.01)) == 650


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        ControlGrid([])
    with pytest.raises(ConfigurationError):
        ControlGrid([1.0, 1.0])


def test_predicted_probability_examples():
    m = TableModel([[0.3, 0.3]])
    assert predicted_probability(cloud([0.5, 0.5]), m, 1) == pytest.approx(0.3)
    m = TableModel([[0.2, 0.8]])
    assert predicted_probability(cloud([0.5, 0.5]), m, 1) == pytest.approx(0.5)
    m = TableModel([[0.1, 0.6]])
    assert predicted_probability(cloud([0.8, 0.2]), m, 1) == pytest.approx(0.2)


def test_eig_examples():
    e = eig_from_likelihoods(np.array([[0.8, 0.2]]), np.array([[0.2, 0.8]]), [0.5, 0.5])
    assert e[0] == pytest.approx(-0.5 * (np.log(0.2) + np.log(0.8)), abs=1e-12)
    assert e[0] == pytest.approx(0.9163, abs=1e-4)
    for p in (0.1, 0.37, 0.5, 0.93):
        e = eig_from_likelihoods(np.array([[p]]), np.array([[1 - p]]), [1.0])
        assert e[0] == pytest.approx(binary_entropy(p), abs=1e-12)


def test_eig_deterministic_outcome_is_near_zero():
    eps = 1e-9
    e = eig_from_likelihoods(np.full((1, 3), 1 - eps), np.full((1, 3), eps), np.ones(3) / 3)
    assert e[0] < 1e-7


def test_mutual_information_variant():
    p0 = np.array([[0.8, 0.2], [0.5, 0.5]])
    mi = eig_from_likelihoods(p0, 1 - p0, [0.5, 0.5], "mutual_information")
    assert mi[0] == pytest.approx(np.log(2) - binary_entropy(0.8), abs=1e-12)
    assert mi[1] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigurationError):
        eig_from_likelihoods(p0, 1 - p0, [0.5, 0.5], "bogus")


def test_eig_table_uses_full_grid(nuclear_model, nuclear_grid):
    loc = nuclear_model.sample_prior(100, seed=0)
    c = ParticleCloud(loc, np.full(100, 0.01))
    t = eig_table(c, nuclear_model, nuclear_grid)
    assert t.values.shape == (901,)
    assert t.argmax_index == int(np.argmax(t.values))
    assert np.all(np.isfinite(t.values))
    d = eig_table(c, nuclear_model, nuclear_grid, precision="double")
    np.testing.assert_allclose(t.values, d.values, atol=1e-5)
    with pytest.raises(ConfigurationError):
        eig_table(c, nuclear_model, nuclear_grid, precision="half")


def test_eig_table_equals_scalar_loop(nuclear_model):
    grid = ControlGrid.arange(1.0, 3.0, 0.25)
    loc = nuclear_model.sample_prior(64, seed=3)
    w = np.random.default_rng(0).dirichlet(np.ones(64))
    c = ParticleCloud(loc, w)
    table = eig_table(c, nuclear_model, grid, precision="double").values
    loop = []
    for tau in grid.taus:
        p0 = nuclear_model.likelihood(loc, tau, 0)
        pbar = w @ p0
        loop.append(-(1 - pbar) * (w @ np.log(1 - p0)) - pbar * (w @ np.log(p0)))
    np.testing.assert_allclose(table, loop, rtol=1e-9, atol=1e-12)


def test_select_optimal_examples():
    g = ControlGrid([1.0, 2.0, 3.0])
    assert select_optimal(EigTable(np.array([0.0, 1.0, 0.0]), 1), g) == 2.0
    assert select_optimal(EigTable(np.array([0.5, 0.5, 0.5]), 0), g) == 1.0
    with pytest.raises(ContractError):
        select_optimal(EigTable(np.array([]), 0), g)


def test_sample_batch_uniform_and_point_mass():
    g = ControlGrid.arange(1.0, 10.0, 1.0)
    flat = sample_batch(EigTable(np.ones(10), 0), g, BatchPolicy(n_batch=20000), seed=0)
    counts = np.array([np.sum(flat == t) for t in g.taus])
    assert stats.chisquare(counts).pvalue > 0.01
    spike = np.zeros(10)
    spike[6] = 0.7
    draws = sample_batch(EigTable(spike, 6), g, BatchPolicy(n_batch=15), seed=1)
    np.testing.assert_array_equal(draws, np.full(15, 7.0))


def test_sample_batch_power_ratio():
    g = ControlGrid([1.0, 2.0])
    draws = sample_batch(EigTable(np.array([1.0, 2.0]), 1), g,
                         BatchPolicy(n_batch=100_000, p_exponent=6), seed=2)
    n2 = int(np.sum(draws == 2.0))
    n1 = draws.size - n2
    expected = draws.size * np.array([1 / 65, 64 / 65])
    assert stats.chisquare([n1, n2], expected).pvalue > 0.01


def test_floor_option_subtracts_minimum():
    probs = batch_distribution([1.0, 2.0, 3.0], BatchPolicy(p_exponent=1, floor=True))
    np.testing.assert_allclose(probs, [0.0, 1 / 3, 2 / 3])
    probs = batch_distribution([1.0, 2.0, 3.0], BatchPolicy(p_exponent=1))
    np.testing.assert_allclose(probs, [1 / 6, 2 / 6, 3 / 6])


def test_p_zero_is_uniform_over_positive():
    probs = batch_distribution([0.0, 0.4, 2.0, 0.0, 1e-3], BatchPolicy(p_exponent=0))
    np.testing.assert_allclose(probs, [0, 1 / 3, 1 / 3, 0, 1 / 3])
    probs = batch_distribution([0.2, 0.4, 2.0], BatchPolicy(p_exponent=0, floor=True))
    np.testing.assert_allclose(probs, [0, 0.5, 0.5])


def test_all_zero_falls_back_to_uniform():
    np.testing.assert_allclose(batch_distribution(np.zeros(4), BatchPolicy()), 0.25)
    np.testing.assert_allclose(batch_distribution(np.ones(4), BatchPolicy(floor=True)), 0.25)


def test_batch_policy_validation():
    with pytest.raises(ConfigurationError):
        BatchPolicy(n_batch=0)
    with pytest.raises(ConfigurationError):
        BatchPolicy(p_exponent=-1)


def test_throughput_accounting():
    m = NuclearSpinModel()
    r = throughput_bench(m, 3200, ControlGrid.arange(1.0, 10.0, 0.01), duration=0.0, min_calls=1)
    assert r.evaluations_per_call == 2_883_200
    assert r.evaluations_per_measurement == pytest.approx(192_213.33, abs=0.01)
    assert r.total_evaluations == r.n_calls * 2_883_200
    row = r.as_row()
    assert row["n_p"] == 3200 and row["grid"] == 901
    tiny = throughput_bench(m, 1, ControlGrid([2.0]), duration=0.0, min_calls=7)
    assert tiny.n_calls == 7 and tiny.total_evaluations == 7
