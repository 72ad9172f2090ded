import numpy as np
import pytest

from bedsense import (ConfigurationError, ContractError, DegenerateUpdateError, ParticleCloud,
                      ResamplerConfig, bayes_update, effective_sample_size, init_uniform,
                      remap_labels, resample_liu_west, summarize)
from bedsense.models import AcFieldModel, NuclearModelConfig, NuclearSpinModel, NuclearSpinParams
from bedsense.smc import weighted_moments


def cloud_of(locs, w=None, bounds=None):
    locs = np.asarray(locs, float)
    if locs.ndim == 1:
        locs = locs[:, None]
    n = locs.shape[0]
    return ParticleCloud(locs, np.full(n, 1.0 / n) if w is None else w, bounds)


def test_init_uniform_small_box():
    c = init_uniform([[0.0, 1.0]], 4, seed=1)
    assert c.locations.shape == (4, 1)
    assert np.all((c.locations >= 0) & (c.locations <= 1))
    np.testing.assert_array_equal(c.weights, [0.25] * 4)


def test_init_uniform_rejects_bad_bounds():
    with pytest.raises(ConfigurationError):
        init_uniform([[1.0, 1.0]], 4)
    with pytest.raises(ConfigurationError):
        init_uniform([[2.0, 1.0]], 4)
    with pytest.raises(ConfigurationError):
        init_uniform([[0.0, 1.0]], 1)


def test_nuclear_prior_bounds():
    m = NuclearSpinModel()
    khz = m.bounds[:2] / (2 * np.pi) * 1e3
    np.testing.assert_allclose(khz, [[6.0, 265.0], [6.0, 265.0]])
    np.testing.assert_allclose(m.bounds[2:], [[0, np.pi], [0, np.pi]])


def test_ac_prior_bounds():
    m = AcFieldModel()
    c = m.cfg
    np.testing.assert_allclose(np.array(c.omega_bounds) / (2 * np.pi) * 1e3, [79.6, 1350.0])
    np.testing.assert_allclose(c.ratio_bounds, [0.013, 0.177])
    loc = m.sample_prior(5000, seed=3)
    ratio = loc[:, 1] * c.gamma / loc[:, 0]
    assert ratio.min() >= 0.013 and ratio.max() <= 0.177
    assert np.all((loc[:, 0] >= c.omega_bounds[0]) & (loc[:, 0] <= c.omega_bounds[1]))


def test_bayes_update_constant_likelihood_is_noop():
    c = cloud_of([0.0, 1.0])
    out = bayes_update(c, [0.3, 0.3])
    np.testing.assert_allclose(out.weights, [0.5, 0.5], atol=1e-15)


def test_bayes_update_normalization_example():
    out = bayes_update(cloud_of([0.0, 1.0]), [0.8, 0.2])
    np.testing.assert_allclose(out.weights, [0.8, 0.2], atol=1e-15)


def test_sequential_equals_product(rng):
    c = cloud_of(rng.normal(size=50))
    liks = rng.uniform(0.01, 1.0, size=(3, 50))
    seq = c
    for lik in liks:
        seq = bayes_update(seq, lik)
    once = bayes_update(c, liks.prod(axis=0))
    np.testing.assert_allclose(seq.weights, once.weights, rtol=0, atol=1e-12)


def test_bayes_update_errors():
    c = cloud_of([0.0, 1.0])
    with pytest.raises(DegenerateUpdateError):
        bayes_update(c, [0.0, 0.0])
    with pytest.raises(ContractError):
        bayes_update(c, [1.2, 0.5])
    with pytest.raises(ContractError):
        bayes_update(c, [0.5])


def test_bayes_update_keeps_locations():
    c = cloud_of([0.0, 1.0])
    np.testing.assert_array_equal(bayes_update(c, [0.4, 0.6]).locations, c.locations)


def test_ess_examples():
    assert effective_sample_size(cloud_of(np.zeros(100))) == pytest.approx(100)
    w = np.zeros(10)
    w[0] = 1
    assert effective_sample_size(cloud_of(np.arange(10), w)) == pytest.approx(1)
    assert effective_sample_size(cloud_of([0, 1], [0.8, 0.2])) == pytest.approx(1.4706, abs=1e-4)


def test_liu_west_a1_is_multinomial(rng):
    c = cloud_of(rng.normal(size=(40, 2)), rng.dirichlet(np.ones(40)))
    out = resample_liu_west(c, ResamplerConfig(a=1.0, remap=False), seed=4)
    rows = {tuple(r) for r in c.locations}
    assert all(tuple(r) in rows for r in out.locations)
    np.testing.assert_array_equal(out.weights, np.full(40, 1 / 40))


def test_liu_west_point_cloud():
    c = cloud_of(np.tile([1.5, -2.0], (30, 1)))
    out = resample_liu_west(c, ResamplerConfig(), seed=0)
    np.testing.assert_allclose(out.locations, c.locations)
    np.testing.assert_allclose(out.weights, 1 / 30)


def test_liu_west_moment_preservation():
    rng = np.random.default_rng(7)
    loc = rng.multivariate_normal([1.0, -1.0], [[1.0, 0.4], [0.4, 0.5]], size=200)
    c = cloud_of(loc, rng.dirichlet(np.ones(200) * 2))
    mu, cov = weighted_moments(c)
    cfg = ResamplerConfig(a=0.9, remap=False)
    means, covs = [], []
    for s in range(1000):
        m, v = weighted_moments(resample_liu_west(c, cfg, seed=s))
        means.append(m)
        covs.append(v)
    means = np.array(means)
    se = means.std(axis=0, ddof=1) / np.sqrt(len(means))
    assert np.all(np.abs(means.mean(axis=0) - mu) < 3 * se)
    # an n_p-point empirical covariance is biased by (n_p - 1) / n_p
    np.testing.assert_allclose(np.mean(covs, axis=0), cov, rtol=0.05, atol=0.05 * cov.max())


def test_liu_west_rank_deficient_covariance():
    # all particles on a line: the jitter stays on that line
    t = np.linspace(0.0, 1.0, 50)
    c = cloud_of(np.column_stack([t, 2.0 * t]))
    out = resample_liu_west(c, ResamplerConfig(a=0.9, remap=False), seed=1)
    np.testing.assert_allclose(out.locations[:, 1], 2.0 * out.locations[:, 0], atol=1e-9)


def test_liu_west_clamps_into_bounds():
    loc = np.array([[0.0], [1.0]] * 10)
    c = ParticleCloud(loc, np.full(20, 0.05), [[0.0, 1.0]])
    out = resample_liu_west(c, ResamplerConfig(a=0.5, remap=False), seed=2)
    assert out.locations.min() >= 0.0 and out.locations.max() <= 1.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_liu_west_nonfinite_covariance_logs(caplog):
    c = cloud_of(np.array([[1.0, np.inf], [1.0, 0.0]]))
    with caplog.at_level("WARNING"):
        out = resample_liu_west(c, ResamplerConfig(remap=False), seed=0)
    assert out.n_particles == 2
    assert "covariance" in caplog.text


def test_remap_fig1_example():
    m = NuclearSpinModel()
    row = NuclearSpinParams.from_khz_deg([83.8, 47.0], [21.0, 30.0]).as_row()
    out = remap_labels(cloud_of(row[None, :]), m).locations[0]
    expect = NuclearSpinParams.from_khz_deg([47.0, 83.8], [30.0, 21.0]).as_row()
    np.testing.assert_allclose(out, expect, rtol=0, atol=1e-15)


def test_remap_folds_theta_and_is_noop_when_sorted():
    m = NuclearSpinModel(NuclearModelConfig(n_C=1))
    row = np.array([[0.3, np.radians(350.0)]])
    out = remap_labels(cloud_of(row), m).locations
    assert out[0, 1] == pytest.approx(np.radians(10.0), abs=1e-12)
    for tau in (1.3, 4.0, 8.7):
        np.testing.assert_allclose(m.prob0(row, tau), m.prob0(out, tau), rtol=0, atol=1e-12)
    again = remap_labels(cloud_of(out), m).locations
    np.testing.assert_array_equal(again, out)


def test_remap_is_noop_for_ac():
    m = AcFieldModel()
    loc = m.sample_prior(10, seed=0)
    np.testing.assert_array_equal(remap_labels(cloud_of(loc), m).locations, loc)


def test_summarize_examples():
    s = summarize(cloud_of([1.0, 3.0]))
    assert s.mean[0] == pytest.approx(2.0)
    assert s.abs_uncertainty[0] == pytest.approx(1.0)
    assert s.rel_uncertainty[0] == pytest.approx(0.5)
    s = summarize(cloud_of([0.0, 1.0], [0.8, 0.2]))
    assert s.mean[0] == pytest.approx(0.2)
    assert s.covariance[0, 0] == pytest.approx(0.16)
    s = summarize(cloud_of(np.ones((5, 3))))
    np.testing.assert_array_equal(s.abs_uncertainty, 0.0)


def test_summarize_zero_mean_sentinel():
    s = summarize(cloud_of([-1.0, 1.0]))
    assert s.rel_uncertainty[0] == np.inf


def test_summarize_groups_nuclear_layout():
    loc = np.array([[1.0, 2.0, 0.5, 0.6], [3.0, 2.0, 0.5, 1.0]])
    s = summarize(cloud_of(loc), 2)
    rel = s.rel_uncertainty
    assert s.mean_rel_per_group["omega_h"] == pytest.approx(np.sqrt((rel[0] ** 2 + rel[1] ** 2) / 2))
    assert s.mean_rel_per_group["theta"] == pytest.approx(np.sqrt((rel[2] ** 2 + rel[3] ** 2) / 2))
    assert s.max_group_rel == max(s.mean_rel_per_group.values())


def test_resampler_config_validation():
    with pytest.raises(ConfigurationError):
        ResamplerConfig(a=0.0)
    with pytest.raises(ConfigurationError):
        ResamplerConfig(ess_threshold_fraction=1.0)


def test_cloud_is_read_only():
    c = cloud_of([0.0, 1.0])
    with pytest.raises(ValueError):
        c.weights[0] = 1.0
