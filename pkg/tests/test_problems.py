import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from landscape_lab.errors import CapabilityError, ConfigurationError, InputError
from landscape_lab.problems import (
    BitPoint, HiffInstance, NkInstance, fitness_extrema, generate_nk, hamming_distance, hiff_fitness,
    load_instance, nk_fitness, register_hiff_variant, save_instance, unregister_hiff_variant,
)


@pytest.mark.parametrize("a,b,d", [("0000", "0000", 0), ("0101", "1010", 4), ("0011", "0001", 1)])
def test_hamming_examples(a, b, d):
    assert hamming_distance(a, b) == d


def test_hamming_length_mismatch():
    with pytest.raises(InputError):
        hamming_distance("010", "0101")


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1), st.integers(0, 2**n - 1))))
def test_hamming_metric(args):
    n, a, b = args
    pa, pb = BitPoint(n, a), BitPoint(n, b)
    assert hamming_distance(pa, pb) == hamming_distance(pb, pa)
    assert (hamming_distance(pa, pb) == 0) == (a == b)
    assert hamming_distance(pa, pb) == sum(x != y for x, y in zip(str(pa), str(pb)))


def test_bitpoint_order_is_lexicographic():
    pts = [BitPoint.from_str(s) for s in ("110", "001", "100", "011")]
    assert [str(p) for p in sorted(pts)] == sorted(str(p) for p in pts)
    assert BitPoint.from_str("0110").flip(0) == BitPoint.from_str("1110")
    assert str(BitPoint.from_str("0110").complement()) == "1001"


def test_bitpoint_rejects_bad_input():
    with pytest.raises(InputError):
        BitPoint.from_str("012")
    with pytest.raises(InputError):
        BitPoint(3, 8)


def test_generate_nk_deterministic():
    a, b = generate_nk(16, 4, 7), generate_nk(16, 4, 7)
    assert a.neighborhoods == b.neighborhoods
    assert np.array_equal(a.tables, b.tables)
    assert not np.array_equal(a.tables, generate_nk(16, 4, 8).tables)


def test_generate_nk_degenerate_k():
    k0 = generate_nk(16, 0, 1)
    assert all(nb == () for nb in k0.neighborhoods) and k0.tables.shape == (16, 2)
    k15 = generate_nk(16, 15, 1)
    assert all(set(nb) == set(range(16)) - {i} for i, nb in enumerate(k15.neighborhoods))


@pytest.mark.parametrize("n,k", [(16, 16), (16, -1), (5, 5)])
def test_generate_nk_k_out_of_range(n, k):
    with pytest.raises(InputError):
        generate_nk(n, k, 0)


def test_generate_nk_large_n_is_capability_error():
    with pytest.raises(CapabilityError):
        generate_nk(30, 2, 0)


def test_nk_hand_example():
    t0 = [0.2, 0.4, 0.6, 0.8]
    t1 = [0.0, 0.9, 0.1, 0.3]
    inst = NkInstance(2, 1, ((1,), (0,)), np.array([t0, t1]))
    assert nk_fitness(inst, "01") == pytest.approx(0.25)
    assert inst.evaluate_codes(np.array([0b01]))[0] == pytest.approx(0.25)


def test_nk_constant_tables():
    inst = NkInstance(4, 2, ((1, 2), (2, 3), (0, 3), (0, 1)), np.full((4, 8), 0.3))
    assert np.allclose(inst.values, 0.3)


def test_nk_vectorized_matches_scalar():
    inst = generate_nk(10, 3, 2)
    for code in [0, 1, 77, 512, 1023]:
        assert inst.values[code] == pytest.approx(nk_fitness(inst, BitPoint(10, code)), abs=1e-15)
    assert inst.values.min() >= 0.0 and inst.values.max() < 1.0


def test_nk_rejects_bad_neighborhood():
    with pytest.raises(InputError):
        NkInstance(3, 1, ((0,), (0,), (1,)), np.zeros((3, 4)))


def test_instance_roundtrip(tmp_path):
    inst = generate_nk(8, 3, 5)
    save_instance(inst, tmp_path / "i.json")
    back = load_instance(tmp_path / "i.json")
    assert back.neighborhoods == inst.neighborhoods and np.array_equal(back.tables, inst.tables)
    h = HiffInstance(8)
    save_instance(h, tmp_path / "h.json")
    assert np.array_equal(load_instance(tmp_path / "h.json").values, h.values)


def test_classic_hiff_optima_and_symmetry():
    h = HiffInstance(16)
    v = h.values
    assert v.max() == 80.0 and v.min() == 16.0
    assert set(np.flatnonzero(v == v.max())) == {0, 2**16 - 1}
    codes = np.arange(2**16)
    assert np.array_equal(v, v[codes ^ (2**16 - 1)])
    assert fitness_extrema(h) == (16.0, 80.0)


def test_hiff_scalar_matches_vectorized():
    h = HiffInstance(8)
    for bits in itertools.islice(itertools.product("01", repeat=8), 0, 256, 17):
        s = "".join(bits)
        assert hiff_fitness(h, s) == h.values[int(s, 2)]
    # singletons 8, four homogeneous pairs 8, two homogeneous quads 8, mixed whole string 0
    assert hiff_fitness(h, "00001111") == 24.0


def test_hiff_small_hand_values():
    h = HiffInstance(4)
    # 0000: four singletons, two pairs, one quad
    assert hiff_fitness(h, "0000") == 4 + 4 + 4
    assert hiff_fitness(h, "0011") == 4 + 4
    assert hiff_fitness(h, "0101") == 4


def test_hiff_requires_power_of_two():
    with pytest.raises(InputError):
        HiffInstance(12)


def test_unimplemented_hiff_variant_named_gap():
    h = HiffInstance(8, "hiffc")
    with pytest.raises(ConfigurationError):
        h.fitness("00000000")


def test_hiff_extension_point():
    register_hiff_variant("hiffm", lambda codes, n: np.asarray(codes, dtype=float))
    try:
        assert HiffInstance(4, "hiffm").fitness("0011") == 3.0
    finally:
        unregister_hiff_variant("hiffm")
    with pytest.raises(ConfigurationError):
        HiffInstance(4, "hiffm").fitness("0011")


@pytest.mark.parametrize("bits,value", [("11111111", 32.0), ("00000000", 32.0), ("01", 2.0)])
def test_hiff_closed_form_examples(bits, value):
    assert hiff_fitness(HiffInstance(len(bits)), bits) == value


def test_hamming_triangle_inequality_exhaustive():
    n = 6
    codes = np.arange(2**n)
    d = np.bitwise_count(codes[:, None] ^ codes[None, :])
    # d(a, c) <= d(a, b) + d(b, c) for every triple (a, b, c)
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :])
    assert np.array_equal(d, d.T)


def test_nk16_roundtrip_reproduces_every_fitness(tmp_path):
    inst = generate_nk(16, 8, 3)
    save_instance(inst, tmp_path / "i.json")
    assert np.array_equal(load_instance(tmp_path / "i.json").values, inst.values)
    assert np.array_equal(inst.evaluate_codes(np.arange(2**16)), inst.values)


def test_extrema_constant_and_bounds():
    inst = NkInstance(3, 1, ((1,), (2,), (0,)), np.full((3, 4), 0.4))
    assert fitness_extrema(inst) == pytest.approx((0.4, 0.4))
    nk = generate_nk(10, 4, 1)
    lo, hi = fitness_extrema(nk)
    assert lo <= nk.values.min() and nk.values.max() <= hi
