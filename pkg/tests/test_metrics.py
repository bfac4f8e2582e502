import math

import numpy as np
import pytest

from hsfuse.cube import HsCube
from hsfuse.metrics import SingularBandError, ergas, metric_report, per_band_mse, psnr, sam
from hsfuse.simulate import make_test_cube


def cube_of(arr):
    return HsCube.from_array(np.asarray(arr, dtype=float))


class TestPsnr:
    def test_identical_is_infinite(self):
        truth = make_test_cube(4, 4, 3, "blocks", seed=0)
        assert psnr(truth, truth) == math.inf

    def test_uniform_offset_20db(self):
        truth = make_test_cube(4, 4, 3, "constant")
        est = cube_of(truth.as_array() + 0.1)
        assert psnr(est, truth) == pytest.approx(20.0, abs=1e-9)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(1)
        truth = cube_of(rng.uniform(0, 1, size=(5, 4, 3)))
        est = cube_of(rng.uniform(0, 1, size=(5, 4, 3)))
        expect = 10 * math.log10(60 / float(np.sum((est.data - truth.data) ** 2)))
        assert psnr(est, truth) == pytest.approx(expect, abs=1e-12)

    def test_pixel_permutation_invariant(self):
        rng = np.random.default_rng(2)
        t = rng.uniform(0, 1, size=(4, 4, 2))
        e = rng.uniform(0, 1, size=(4, 4, 2))
        perm = rng.permutation(16)
        tp = t.reshape(16, 2)[perm].reshape(4, 4, 2)
        ep = e.reshape(16, 2)[perm].reshape(4, 4, 2)
        assert psnr(cube_of(e), cube_of(t)) == pytest.approx(
            psnr(cube_of(ep), cube_of(tp)), abs=1e-12
        )

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            psnr(cube_of(np.zeros((2, 2, 2))), cube_of(np.zeros((2, 2, 3))))


class TestSam:
    def test_identical_cubes_zero(self):
        # arccos near 1 amplifies rounding in the dot/norm computation, so
        # "zero" means a few microdegrees here
        truth = make_test_cube(4, 4, 3, "blocks", seed=0)
        per_pixel, mean = sam(truth, truth)
        assert np.nanmax(per_pixel) <= 1e-5
        assert mean <= 1e-5

    def test_orthogonal_spectra_90deg(self):
        t = np.zeros((1, 1, 2))
        e = np.zeros((1, 1, 2))
        t[0, 0] = [1.0, 0.0]
        e[0, 0] = [0.0, 1.0]
        per_pixel, mean = sam(cube_of(e), cube_of(t))
        assert mean == pytest.approx(90.0, abs=1e-9)

    def test_gain_invariance(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(0.1, 1, size=(3, 3, 4))
        e = rng.uniform(0.1, 1, size=(3, 3, 4))
        _, mean1 = sam(cube_of(e), cube_of(t))
        _, mean2 = sam(cube_of(3.0 * e), cube_of(t))
        assert mean1 == pytest.approx(mean2, abs=1e-10)

    def test_zero_spectrum_excluded(self):
        t = np.full((2, 1, 2), 0.5)
        e = np.full((2, 1, 2), 0.5)
        e[0, 0] = [0.0, 0.0]
        per_pixel, mean = sam(cube_of(e), cube_of(t))
        assert np.isnan(per_pixel[0])
        assert mean == pytest.approx(0.0, abs=1e-5)

    def test_range(self):
        rng = np.random.default_rng(4)
        t = rng.standard_normal((4, 4, 5))
        e = rng.standard_normal((4, 4, 5))
        per_pixel, mean = sam(cube_of(e), cube_of(t))
        assert np.nanmin(per_pixel) >= 0.0
        assert np.nanmax(per_pixel) <= 180.0


class TestErgas:
    def test_identical_zero(self):
        truth = make_test_cube(4, 4, 3, "blocks", seed=0)
        assert ergas(truth, truth, 4) == 0.0

    def test_hand_computed_single_band(self):
        # N = 4, truth 0.5, estimate 0.55, r = 2: normalized MSE 0.04,
        # sqrt -> 0.2, x 100/2 -> 10
        t = cube_of(np.full((2, 2, 1), 0.5))
        e = cube_of(np.full((2, 2, 1), 0.55))
        assert ergas(e, t, 2) == pytest.approx(10.0, abs=1e-9)

    def test_r_prefactor(self):
        rng = np.random.default_rng(5)
        t = cube_of(rng.uniform(0.2, 1, size=(4, 4, 3)))
        e = cube_of(rng.uniform(0.2, 1, size=(4, 4, 3)))
        vals = {r: ergas(e, t, r) for r in (2, 4, 8, 16)}
        assert vals[2] == pytest.approx(2 * vals[4], rel=1e-12)
        base = vals[2] * 2
        for r, val in vals.items():
            assert val * r == pytest.approx(base, rel=1e-12)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(6)
        t = cube_of(rng.uniform(0.2, 1, size=(6, 6, 5)))
        e = cube_of(rng.uniform(0.2, 1, size=(6, 6, 5)))
        n, b = 36, 5
        td = t.data.reshape((n, b), order="F")
        ed = e.data.reshape((n, b), order="F")
        acc = 0.0
        for i in range(b):
            acc += float(np.sum((ed[:, i] - td[:, i]) ** 2)) / float(np.mean(td[:, i])) ** 2
        expect = 100.0 / 3 * math.sqrt(acc / b)
        assert ergas(e, t, 3) == pytest.approx(expect, abs=1e-10)

    def test_zero_mean_band_raises(self):
        t = np.full((2, 2, 2), 0.5)
        t[:, :, 1] = 0.0
        with pytest.raises(SingularBandError, match="band 2"):
            ergas(cube_of(t + 0.0), cube_of(t), 2)


class TestPerBandMse:
    def test_values(self):
        t = np.zeros((2, 2, 2))
        e = np.zeros((2, 2, 2))
        e[:, :, 1] = 0.1
        out = per_band_mse(cube_of(e), cube_of(t))
        np.testing.assert_allclose(out, [0.0, 0.01], atol=1e-15)


class TestMetricReport:
    def test_report_fields(self):
        truth = make_test_cube(4, 4, 3, "blocks", seed=7)
        est = cube_of(np.clip(truth.as_array() + 0.05, 0, 1))
        rep = metric_report(est, truth, 2)
        assert rep.psnr_db > 0
        assert 0 <= rep.sam_deg <= 180
        assert rep.ergas >= 0
        assert rep.per_band_mse.shape == (3,)
        assert rep.sam_excluded == 0
