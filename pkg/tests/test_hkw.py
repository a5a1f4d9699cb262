import numpy as np
import pytest

from mcfndgen import (
    ConvergenceError,
    CorrelationMatrix,
    HkwOptions,
    MomentTargets,
    Pcg32,
    RankError,
    ScenarioMatrix,
    TransformFailure,
    generate_scenarios,
    match_errors,
)
from mcfndgen.hkw import cubic_transform, impose_correlation, raw_moments, standardize


def weighted_moments(row, probs):
    mean = probs @ row
    centered = row - mean
    var = probs @ centered**2
    return mean, var**0.5, probs @ centered**3 / var**1.5, probs @ centered**4 / var**2


def test_standardize_two_point_rows():
    probs = np.array([0.5, 0.5])
    assert standardize(np.array([-1.0, 1.0]), probs).tolist() == [-1.0, 1.0]
    assert standardize(np.array([0.0, 2.0]), probs).tolist() == [-1.0, 1.0]


def test_standardize_weighted_row():
    probs = np.array([0.5, 0.25, 0.25])
    row = standardize(np.array([1.0, 2.0, 6.0]), probs)
    mean = probs @ row
    var = probs @ (row - mean) ** 2
    assert abs(mean) <= 1e-14
    assert abs(var - 1.0) <= 1e-14


def test_standardize_rejects_constant_row():
    with pytest.raises(ValueError):
        standardize(np.array([3.0, 3.0]), np.array([0.5, 0.5]))


def test_raw_moments_two_point_symmetry():
    probs = np.array([0.5, 0.5])
    m = raw_moments(np.array([-1.0, 1.0]), probs, 12)
    assert np.array_equal(m[0::2], np.zeros(6))  # odd orders vanish
    assert np.array_equal(m[1::2], np.ones(6))


def test_raw_moments_single_point():
    m = raw_moments(np.array([2.0]), np.array([1.0]), 12)
    assert m == pytest.approx([2.0**q for q in range(1, 13)])


def test_raw_moments_against_double_loop():
    rng = Pcg32(5, 6)
    row = rng.normal_array(40)
    probs = rng.uniform_real_array(0.5, 1.5, 40)
    probs = probs / probs.sum()
    m = raw_moments(row, probs, 12)
    brute = [sum(p * x**q for p, x in zip(probs, row)) for q in range(1, 13)]
    assert m == pytest.approx(brute, abs=1e-14, rel=1e-14)


def test_cubic_transform_two_point_identity():
    probs = np.array([0.5, 0.5])
    row = np.array([-1.0, 1.0])
    out = cubic_transform(row, probs, (0.0, 1.0, 0.0, 1.0))
    assert out == pytest.approx(row, abs=1e-12)


def test_cubic_transform_own_moments_fixed_point():
    rng = Pcg32(10, 3)
    probs = np.full(60, 1 / 60)
    row = standardize(rng.normal_array(60), probs)
    m = raw_moments(row, probs, 4)
    out = cubic_transform(row, probs, tuple(m))
    assert out == pytest.approx(row, abs=1e-10)


def test_cubic_transform_seven_point_uniform_kurtosis():
    rng = Pcg32(21, 4)
    probs = np.full(7, 1 / 7)
    row = standardize(rng.normal_array(7), probs)
    out = cubic_transform(row, probs, (0.0, 1.0, 0.0, 1.8))
    m = raw_moments(out, probs, 4)
    assert m == pytest.approx([0.0, 1.0, 0.0, 1.8], abs=1e-10)


def test_cubic_transform_rejects_unrealizable_targets():
    probs = np.full(5, 0.2)
    row = standardize(Pcg32(1, 1).normal_array(5), probs)
    with pytest.raises(ValueError):
        cubic_transform(row, probs, (0.0, 1.0, 2.0, 3.0))  # kurt < 1 + skew^2


def test_cubic_transform_failure_signal():
    # a two-point row cannot reach kurtosis 9 through any cubic
    probs = np.full(50, 0.02)
    row = standardize(np.array([-1.0] * 25 + [1.0] * 25), probs)
    with pytest.raises(TransformFailure):
        cubic_transform(row, probs, (0.0, 1.0, 0.0, 9.0))


def test_cubic_transform_output_moments_on_reachable_random_targets():
    # targets built from an actual cubic image of the row, so a root exists
    rng = Pcg32(77, 88)
    for trial in range(50):
        s = 30 + (trial % 4) * 17
        probs = rng.uniform_real_array(0.5, 2.0, s)
        probs = probs / probs.sum()
        row = standardize(rng.normal_array(s), probs)
        coeffs = np.array(
            [
                rng.uniform_real(-0.3, 0.3),
                rng.uniform_real(0.7, 1.3),
                rng.uniform_real(-0.2, 0.2),
                rng.uniform_real(-0.05, 0.05),
            ]
        )
        powers = np.vstack([np.ones_like(row), row, row**2, row**3])
        image = coeffs @ powers
        image_std = standardize(image, probs)
        targets = tuple(raw_moments(image_std, probs, 4))
        out = cubic_transform(row, probs, targets)
        achieved = raw_moments(out, probs, 4)
        assert achieved == pytest.approx(targets, abs=1e-10)


def test_impose_correlation_identity_when_on_target():
    rng = Pcg32(2, 9)
    probs = np.full(50, 0.02)
    x = np.vstack([standardize(rng.normal_array(50), probs) for _ in range(3)])
    current = impose_correlation(x, probs, _corr_of(x, probs))
    assert current == pytest.approx(x, abs=1e-12)


def _corr_of(x, probs):
    means = x @ probs
    centered = x - means[:, None]
    cov = (centered * probs) @ centered.T
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(corr)


def test_impose_correlation_small_case():
    rng = Pcg32(31, 7)
    probs = np.full(3, 1 / 3)
    x = np.vstack([standardize(rng.normal_array(3), probs) for _ in range(2)])
    target = CorrelationMatrix(np.array([[1.0, 0.5], [0.5, 1.0]]))
    out = impose_correlation(x, probs, target)
    achieved = _corr_of(out, probs).matrix
    assert achieved[0, 1] == pytest.approx(0.5, abs=1e-10)
    assert np.abs(out @ probs).max() <= 1e-12  # means unchanged


def test_impose_correlation_decorrelates():
    rng = Pcg32(13, 5)
    probs = np.full(80, 1 / 80)
    base = standardize(rng.normal_array(80), probs)
    x = np.vstack(
        [
            standardize(base + 0.3 * rng.normal_array(80), probs),
            standardize(base + 0.3 * rng.normal_array(80), probs),
            standardize(rng.normal_array(80), probs),
        ]
    )
    out = impose_correlation(x, probs, CorrelationMatrix(np.eye(3)))
    achieved = _corr_of(out, probs).matrix
    assert np.abs(achieved - np.eye(3)).max() <= 1e-10


@pytest.mark.parametrize("n, s", [(2, 12), (4, 40), (10, 200)])
def test_impose_correlation_randomized_targets(n, s):
    rng = Pcg32(n, s)
    probs = rng.uniform_real_array(0.5, 1.5, s)
    probs = probs / probs.sum()
    x = np.vstack([standardize(rng.normal_array(s), probs) for _ in range(n)])
    # random positive definite correlation built from a random factor
    factor = rng.normal_array(n * n).reshape(n, n) * 0.4 + np.eye(n)
    gram = factor @ factor.T
    sd = np.sqrt(np.diag(gram))
    target = CorrelationMatrix((gram / np.outer(sd, sd) + (gram / np.outer(sd, sd)).T) / 2)
    out = impose_correlation(x, probs, target)
    achieved = _corr_of(out, probs).matrix
    assert np.abs(achieved - target.matrix).max() <= 1e-10
    assert np.abs(out @ probs).max() <= 1e-12


def test_match_errors_exact_and_offsets():
    probs = np.array([0.5, 0.5])
    x = np.array([[-1.0, 1.0], [1.0, -1.0]])
    targets = MomentTargets([0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0])
    corr = CorrelationMatrix(np.array([[1.0, -1.0 + 1e-9], [-1.0 + 1e-9, 1.0]]))
    me, ce = match_errors(x, probs, targets, corr)
    assert me == 0.0
    assert ce == pytest.approx(1e-9, abs=1e-12)


def test_match_errors_skewness_offset():
    rng = Pcg32(3, 3)
    probs = np.full(500, 1 / 500)
    row = standardize(rng.normal_array(500), probs)
    _, _, skew, kurt = weighted_moments(row, probs)
    targets = MomentTargets([0.0], [1.0], [skew + 0.1], [kurt])
    me, ce = match_errors(row[None, :], probs, targets, CorrelationMatrix(np.eye(1)))
    assert me == pytest.approx(0.1, abs=1e-12)
    assert ce == 0.0


def test_match_errors_against_brute_force():
    rng = Pcg32(17, 23)
    n, s = 4, 30
    x = rng.normal_array(n * s).reshape(n, s) * 3.0 + 5.0
    probs = rng.uniform_real_array(0.5, 1.5, s)
    probs = probs / probs.sum()
    targets = MomentTargets(
        np.full(n, 5.0), np.full(n, 3.0), np.zeros(n), np.full(n, 3.0)
    )
    corr = CorrelationMatrix(np.eye(n))
    me, ce = match_errors(x, probs, targets, corr)
    worst_m = 0.0
    for i in range(n):
        mean, sd, skew, kurt = weighted_moments(x[i], probs)
        worst_m = max(
            worst_m,
            abs(mean - 5.0) / 3.0,
            abs(sd - 3.0) / 3.0,
            abs(skew),
            abs(kurt - 3.0),
        )
    worst_c = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            mi, si, *_ = weighted_moments(x[i], probs)
            mj, sj, *_ = weighted_moments(x[j], probs)
            cij = probs @ ((x[i] - mi) * (x[j] - mj)) / (si * sj)
            worst_c = max(worst_c, abs(cij))
    assert me == pytest.approx(worst_m, abs=1e-14)
    assert ce == pytest.approx(worst_c, abs=1e-14)


def test_generate_scenarios_unique_two_point_solution():
    targets = MomentTargets([0.0], [1.0], [0.0], [1.0])
    corr = CorrelationMatrix(np.eye(1))
    sm = generate_scenarios(targets, corr, HkwOptions(scenario_count=2), Pcg32(1, 1))
    assert sorted(sm.values[0].tolist()) == pytest.approx([-1.0, 1.0], abs=1e-9)
    assert sm.probabilities.tolist() == [0.5, 0.5]


def test_generate_scenarios_uniform_pair():
    from mcfndgen import uniform_targets

    mean, sd, skew, kurt = uniform_targets(100.0, 0.25, 0.25)
    targets = MomentTargets([mean] * 2, [sd] * 2, [skew] * 2, [kurt] * 2)
    corr = CorrelationMatrix(np.eye(2))
    opts = HkwOptions(scenario_count=1000)
    sm = generate_scenarios(targets, corr, opts, Pcg32(7, 9))
    me, ce = match_errors(sm.values, sm.probabilities, targets, corr)
    assert me <= 1e-3 and ce <= 1e-3


def test_generate_scenarios_rank_guard():
    targets = MomentTargets([0.0] * 3, [1.0] * 3, [0.0] * 3, [1.8] * 3)
    corr = CorrelationMatrix(np.eye(3))
    with pytest.raises(RankError):
        generate_scenarios(targets, corr, HkwOptions(scenario_count=3), Pcg32(1, 1))


def test_generate_scenarios_deterministic_and_stream_sensitive():
    targets = MomentTargets([10.0] * 3, [2.0] * 3, [0.0] * 3, [1.8] * 3)
    corr = CorrelationMatrix(np.eye(3) * 0.7 + np.full((3, 3), 0.3))
    opts = HkwOptions(scenario_count=40)
    a = generate_scenarios(targets, corr, opts, Pcg32(4567, 1234))
    b = generate_scenarios(targets, corr, opts, Pcg32(4567, 1234))
    c = generate_scenarios(targets, corr, opts, Pcg32(4567, 1235))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_generate_scenarios_start_matrix_converges_immediately(capsys):
    targets = MomentTargets([10.0] * 3, [2.0] * 3, [0.1] * 3, [2.4] * 3)
    corr = CorrelationMatrix(np.eye(3))
    opts = HkwOptions(scenario_count=50)
    first = generate_scenarios(targets, corr, opts, Pcg32(5, 5))
    warm = HkwOptions(scenario_count=50, start_matrix=first, verbosity=1)
    second = generate_scenarios(targets, corr, warm, Pcg32(99, 99))
    assert "trial 1 after 1 iteration" in capsys.readouterr().out
    me, ce = match_errors(second.values, second.probabilities, targets, corr)
    assert me <= 1e-3 and ce <= 1e-3


def test_generate_scenarios_custom_probabilities():
    targets = MomentTargets([0.0], [1.0], [0.0], [1.8])
    corr = CorrelationMatrix(np.eye(1))
    probs = np.array([0.5, 0.2, 0.2, 0.05, 0.05])
    sm = generate_scenarios(targets, corr, HkwOptions(scenario_count=5), Pcg32(3, 1), probs)
    assert np.array_equal(sm.probabilities, probs)
    mean = probs @ sm.values[0]
    var = probs @ (sm.values[0] - mean) ** 2
    assert abs(mean) <= 1e-3 and abs(var - 1.0) <= 3e-3


def test_generate_scenarios_reports_best_errors_on_failure():
    # an adversarial two-variable target at the rank floor with a hostile
    # correlation cannot be matched in one iteration at tight tolerance
    targets = MomentTargets([0.0] * 5, [1.0] * 5, [0.0] * 5, [1.0] * 5)
    corr = CorrelationMatrix(np.eye(5))
    opts = HkwOptions(scenario_count=6, moment_tol=1e-9, corr_tol=1e-9, max_trials=2, max_iterations=3)
    with pytest.raises(ConvergenceError) as excinfo:
        generate_scenarios(targets, corr, opts, Pcg32(8, 8))
    assert excinfo.value.best_moment_error < np.inf
