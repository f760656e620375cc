import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshcim.kernels import available_backends

BACKENDS = available_backends()


def pair_params():
    return pytest.mark.parametrize("impl", list(BACKENDS.values()),
                                   ids=list(BACKENDS))


@pair_params()
class TestBackend:
    def test_mvm_exact(self, impl):
        rng = np.random.default_rng(0)
        x = rng.integers(-128, 128, size=(17, 33), dtype=np.int8)
        w = rng.integers(-128, 128, size=(33, 21), dtype=np.int8)
        want = x.astype(np.int64) @ w.astype(np.int64)
        assert np.array_equal(np.asarray(impl.mvm_batch(x, w)), want)

    def test_requant_floor_and_saturation(self, impl):
        acc = np.array([[-1, -256, 255, 1 << 20, -(1 << 20), 0]], dtype=np.int32)
        got = np.asarray(impl.relu_shift_sat8(acc, 4, False))
        # arithmetic shift floors toward negative infinity
        assert got.tolist() == [[-1, -16, 15, 127, -128, 0]]
        relu = np.asarray(impl.relu_shift_sat8(acc, 4, True))
        assert relu.tolist() == [[0, 0, 15, 127, 0, 0]]

    def test_sat_add(self, impl):
        a = np.array([[100, -100, 1]], dtype=np.int8)
        b = np.array([[100, -100, -2]], dtype=np.int8)
        assert np.asarray(impl.sat_add8(a, b)).tolist() == [[127, -128, -1]]

    def test_scatter(self, impl):
        acc = np.zeros((5, 3), dtype=np.int32)
        idx = np.array([1, 3], dtype=np.int64)
        add = np.array([[1, 2, 3], [4, 5, 6]], dtype=np.int32)
        impl.scatter_accumulate(acc, idx, add)
        assert acc[1].tolist() == [1, 2, 3]
        assert acc[3].tolist() == [4, 5, 6]
        assert acc[0].tolist() == [0, 0, 0]


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
class TestCrossBackend:
    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(1, 32), c=st.integers(1, 64), m=st.integers(1, 64),
           seed=st.integers(0, 2**31))
    def test_mvm_identical(self, n, c, m, seed):
        rng = np.random.default_rng(seed)
        x = rng.integers(-128, 128, size=(n, c), dtype=np.int8)
        w = rng.integers(-128, 128, size=(c, m), dtype=np.int8)
        results = [np.asarray(impl.mvm_batch(x, w)) for impl in BACKENDS.values()]
        for r in results[1:]:
            assert np.array_equal(results[0], r)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31), shift=st.integers(0, 20),
           relu=st.booleans())
    def test_requant_identical(self, seed, shift, relu):
        rng = np.random.default_rng(seed)
        acc = rng.integers(-(2**30), 2**30, size=(7, 11), dtype=np.int32)
        results = [np.asarray(impl.relu_shift_sat8(acc, shift, relu))
                   for impl in BACKENDS.values()]
        for r in results[1:]:
            assert np.array_equal(results[0], r)


def test_bench_smoke():
    from meshcim.bench import bench_kernels, format_rows

    rows = bench_kernels(repeat=1)
    assert len(rows) == len(BACKENDS)
    table = format_rows(rows)
    assert "backend" in table
