import numpy as np
import pytest

from hsfuse.cube import HsCube
from hsfuse.operators import SpectralResponse, blur, diff_spatial, downsample, spectral_response_apply
from hsfuse.simulate import DegradationSpec, make_test_cube, simulate_observations


def pan(b):
    return SpectralResponse.pan_average(b)


class TestSimulateObservations:
    def test_noiseless_is_exact_model(self):
        truth = make_test_cube(8, 8, 4, "blocks", seed=1)
        spec = DegradationSpec(r=2, sigma_v=0.0, sigma_g=0.0, response=pan(4), seed=0)
        v, g, eps, eta = simulate_observations(truth, spec)
        bl = blur(8, 8, 4, 2)
        s = downsample(8, 8, 4, 2)
        resp_op = spectral_response_apply(pan(4), 8, 8)
        np.testing.assert_array_equal(v, s.apply(bl.apply(truth.data)))
        np.testing.assert_array_equal(g, resp_op.apply(truth.data))
        assert eps == 0.0 and eta == 0.0

    def test_seed_determinism(self):
        truth = make_test_cube(8, 8, 4, "blocks", seed=1)
        spec = DegradationSpec(r=2, sigma_v=0.1, sigma_g=0.02, response=pan(4), seed=9)
        out1 = simulate_observations(truth, spec)
        out2 = simulate_observations(truth, spec)
        np.testing.assert_array_equal(out1[0], out2[0])
        np.testing.assert_array_equal(out1[1], out2[1])
        assert out1[2] == out2[2] and out1[3] == out2[3]

    def test_different_seed_different_noise(self):
        truth = make_test_cube(8, 8, 4, "blocks", seed=1)
        s1 = DegradationSpec(r=2, sigma_v=0.1, sigma_g=0.02, response=pan(4), seed=1)
        s2 = DegradationSpec(r=2, sigma_v=0.1, sigma_g=0.02, response=pan(4), seed=2)
        v1, _, _, _ = simulate_observations(truth, s1)
        v2, _, _, _ = simulate_observations(truth, s2)
        assert not np.array_equal(v1, v2)

    def test_oracle_radii_are_noise_norms(self):
        truth = make_test_cube(8, 8, 4, "blocks", seed=1)
        spec_clean = DegradationSpec(r=2, sigma_v=0.0, sigma_g=0.0, response=pan(4), seed=5)
        v0, g0, _, _ = simulate_observations(truth, spec_clean)
        spec = DegradationSpec(r=2, sigma_v=0.1, sigma_g=0.02, response=pan(4), seed=5)
        v, g, eps, eta = simulate_observations(truth, spec)
        assert eps == pytest.approx(np.linalg.norm(v - v0))
        assert eta == pytest.approx(np.linalg.norm(g - g0))

    def test_divisibility_enforced(self):
        truth = make_test_cube(6, 6, 2, "blocks", seed=1)
        spec = DegradationSpec(r=4, sigma_v=0.0, sigma_g=0.0, response=pan(2), seed=0)
        with pytest.raises(ValueError):
            simulate_observations(truth, spec)

    def test_noise_norm_statistics(self):
        # E[||n_v||^2] = sigma^2 * NB / r^2 within 5% over 100 seeds
        truth = make_test_cube(8, 8, 4, "constant", seed=0)
        sigma = 0.1
        n_lr = 4 * 4 * 4
        sq = []
        for seed in range(100):
            spec = DegradationSpec(r=2, sigma_v=sigma, sigma_g=0.0, response=pan(4), seed=seed)
            _, _, eps, _ = simulate_observations(truth, spec)
            sq.append(eps**2)
        assert np.mean(sq) == pytest.approx(sigma**2 * n_lr, rel=0.05)

    def test_paper_noise_presets(self):
        from hsfuse.presets import preset_values

        pan_preset = preset_values("pan-r2")
        assert (pan_preset["sigma_v"], pan_preset["sigma_g"]) == (0.1, 0.02)
        fuse_preset = preset_values("fuse-r2")
        assert (fuse_preset["sigma_v"], fuse_preset["sigma_g"]) == (0.2, 0.05)


class TestMakeTestCube:
    def test_constant(self):
        cube = make_test_cube(5, 4, 3, "constant")
        assert np.all(cube.data == 0.5)

    def test_blocks_boundary_sparsity(self):
        # tile side for 8x8 is 2, so vertical boundaries fall at rows 2, 4, 6
        # (1-based), i.e. 3 boundary rows x 8 columns of nonzeros per band,
        # and the same count horizontally.
        nv = nh = 8
        b = 4
        cube = make_test_cube(nv, nh, b, "blocks", seed=3)
        d = diff_spatial(nv, nh, b)
        out = d.apply(cube.data)
        n = nv * nh * b
        tile = 2
        boundaries = (nv // tile) - 1
        expected_per_band = boundaries * nh
        dv_nonzeros = np.count_nonzero(out[:n])
        dh_nonzeros = np.count_nonzero(out[n:])
        assert dv_nonzeros == expected_per_band * b
        assert dh_nonzeros == expected_per_band * b

    def test_blocks_deterministic(self):
        c1 = make_test_cube(8, 8, 4, "blocks", seed=3)
        c2 = make_test_cube(8, 8, 4, "blocks", seed=3)
        np.testing.assert_array_equal(c1.data, c2.data)
        c3 = make_test_cube(8, 8, 4, "blocks", seed=4)
        assert not np.array_equal(c1.data, c3.data)

    def test_values_in_unit_interval(self):
        for pattern in ("constant", "blocks", "textured"):
            cube = make_test_cube(7, 9, 5, pattern, seed=2)
            assert cube.data.min() >= 0.0 and cube.data.max() <= 1.0

    def test_unknown_pattern(self):
        with pytest.raises(ValueError):
            make_test_cube(4, 4, 2, "zebra")

    def test_returns_cube_type(self):
        cube = make_test_cube(4, 4, 2, "blocks")
        assert isinstance(cube, HsCube)
        assert (cube.nv, cube.nh, cube.b) == (4, 4, 2)
