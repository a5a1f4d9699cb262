import numpy as np
import pytest

from mcfndgen.prng import Pcg32

# frozen reference output of the generator's constants; any change to the
# multiplier, stream rule or output permutation breaks these
GOLDEN_42_54 = [0xA15C02B7, 0x7B47F409, 0xBA1D3330, 0x83D2F293, 0xBFA4784B, 0xCBED606E]
GOLDEN_4567_1234 = [
    404517654,
    4204586864,
    2741594362,
    4037395572,
    161767199,
    3742528312,
    2685214020,
    3015992240,
]


def test_golden_sequences():
    g = Pcg32(42, 54)
    assert [g.next_u32() for _ in range(6)] == GOLDEN_42_54
    g = Pcg32(4567, 1234)
    assert [g.next_u32() for _ in range(8)] == GOLDEN_4567_1234


def test_identical_state_identical_draws():
    a, b = Pcg32(4567, 1234), Pcg32(4567, 1234)
    assert [a.next_u32() for _ in range(10_000)] == [b.next_u32() for _ in range(10_000)]


def test_distinct_streams_disagree_almost_everywhere():
    a, b = Pcg32(4567, 1234), Pcg32(4567, 1235)
    differing = sum(a.next_u32() != b.next_u32() for _ in range(10_000))
    assert differing >= 9_900  # empirically 10,000 of 10,000


def test_zero_seed_and_stream_is_valid():
    g = Pcg32(0, 0)
    draws = [g.next_u32() for _ in range(3)]
    assert draws == [3837872008, 932996374, 1548399547]


def test_seed_bounds():
    with pytest.raises(ValueError):
        Pcg32(2**64, 0)
    with pytest.raises(ValueError):
        Pcg32(0, -1)


def test_uniform_real_mean_law_of_large_numbers():
    g = Pcg32(7, 1)
    draws = g.uniform_real_array(0.0, 1.0, 1_000_000)
    assert abs(draws.mean() - 0.5) < 0.002


def test_uniform_real_degenerate_interval():
    g = Pcg32(1, 1)
    assert g.uniform_real(5.0, 5.0) == 5.0


def test_uniform_real_range_containment():
    g = Pcg32(3, 9)
    draws = g.uniform_real_array(-2.0, 2.0, 20_000)
    assert draws.min() >= -2.0
    assert draws.max() < 2.0


def test_uniform_real_rejects_inverted_range():
    with pytest.raises(ValueError):
        Pcg32(1, 1).uniform_real(1.0, 0.0)


def test_uniform_int_die_frequencies():
    g = Pcg32(11, 13)
    counts = np.zeros(6, dtype=int)
    for _ in range(600_000):
        counts[g.uniform_int(1, 6) - 1] += 1
    freqs = counts / 600_000
    assert np.abs(freqs - 1 / 6).max() < 0.005


def test_uniform_int_degenerate():
    assert Pcg32(1, 1).uniform_int(7, 7) == 7


def test_uniform_int_binary_support():
    g = Pcg32(5, 5)
    assert {g.uniform_int(0, 1) for _ in range(200)} == {0, 1}


def test_uniform_int_rejects_inverted_range():
    with pytest.raises(ValueError):
        Pcg32(1, 1).uniform_int(3, 2)


def test_batched_draws_equal_scalar_draws():
    a, b = Pcg32(97, 31), Pcg32(97, 31)
    batch = a.u32_array(777)
    scalar = np.array([b.next_u32() for _ in range(777)], dtype=np.uint32)
    assert np.array_equal(batch, scalar)
    # the states must line up afterwards too
    assert a.next_u32() == b.next_u32()

    a, b = Pcg32(97, 31), Pcg32(97, 31)
    batch = a.uniform_real_array(-1.5, 2.5, 333)
    scalar = np.array([b.uniform_real(-1.5, 2.5) for _ in range(333)])
    assert np.array_equal(batch, scalar)


def test_normal_array_moments_and_consumption():
    g = Pcg32(8, 8)
    z = g.normal_array(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    # odd counts consume a full final pair: states line up with the even draw
    a, b = Pcg32(2, 2), Pcg32(2, 2)
    a.normal_array(5)
    b.normal_array(6)
    assert a.next_u32() == b.next_u32()
