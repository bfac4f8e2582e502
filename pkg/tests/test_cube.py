import numpy as np
import pytest

from hsfuse.cube import (
    GuideImage,
    HsCube,
    HscFormatError,
    flatten_index,
    load_cube,
    load_guide,
    rgb_composite,
    save_cube,
    save_guide,
)


def test_flatten_index_paper_example():
    assert flatten_index(3, 2, 4) == 7


def test_flatten_index_identity_and_last():
    assert flatten_index(1, 1, 100) == 1
    n, b = 12, 5
    assert flatten_index(n, b, n, b) == n * b


def test_flatten_index_out_of_range():
    with pytest.raises(IndexError):
        flatten_index(0, 1, 4)
    with pytest.raises(IndexError):
        flatten_index(5, 1, 4)
    with pytest.raises(IndexError):
        flatten_index(1, 0, 4)
    with pytest.raises(IndexError):
        flatten_index(1, 3, 4, 2)


def test_flatten_index_bijection_exhaustive():
    n, b = 6, 4
    seen = set()
    for k in range(1, b + 1):
        for i in range(1, n + 1):
            seen.add(flatten_index(i, k, n, b))
    assert seen == set(range(1, n * b + 1))


def test_flat_order_matches_fortran_ravel():
    # pixel i enumerates column-by-column inside a band
    nv, nh, b = 3, 2, 2
    arr = np.arange(nv * nh * b, dtype=float).reshape((nv, nh, b))
    cube = HsCube.from_array(arr)
    for k in range(1, b + 1):
        for c in range(nh):
            for r in range(nv):
                i = r + c * nv + 1
                idx = flatten_index(i, k, nv * nh, b) - 1
                assert cube.data[idx] == arr[r, c, k - 1]


def test_cube_validation():
    with pytest.raises(ValueError):
        HsCube(np.zeros(5), 2, 2, 2)
    with pytest.raises(ValueError):
        HsCube(np.zeros(0), 0, 1, 1)
    bad = np.zeros(8)
    bad[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        HsCube(bad, 2, 2, 2)


def test_cube_immutable():
    cube = HsCube(np.zeros(8), 2, 2, 2)
    with pytest.raises(ValueError):
        cube.data[0] = 1.0


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(42)
    cube = HsCube(rng.uniform(-1, 2, size=60), 5, 4, 3)
    p1 = tmp_path / "a.hsc"
    p2 = tmp_path / "b.hsc"
    save_cube(cube, p1)
    loaded = load_cube(p1)
    assert loaded.nv == 5 and loaded.nh == 4 and loaded.b == 3
    assert np.array_equal(loaded.data, cube.data)
    save_cube(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_payload_size_arithmetic(tmp_path):
    path = tmp_path / "z.hsc"
    save_cube(HsCube(np.zeros(4), 2, 2, 1), path)
    raw = path.read_bytes()
    header, payload = raw.split(b"\n", 1)
    assert header == b"HSC1 2 2 1"
    assert len(payload) == 32  # 4 samples x 8 bytes


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.hsc"
    path.write_bytes(b"HSC1 2 2 1\n" + b"\x00" * 24)  # header claims 4 samples, has 3
    with pytest.raises(HscFormatError, match="truncated"):
        load_cube(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "t.hsc"
    path.write_bytes(b"HSC1 1 1 1\n" + b"\x00" * 9)
    with pytest.raises(HscFormatError, match="trailing"):
        load_cube(path)


def test_malformed_header(tmp_path):
    path = tmp_path / "m.hsc"
    path.write_bytes(b"HSC9 1 1 1\n" + b"\x00" * 8)
    with pytest.raises(HscFormatError, match="byte offset 0"):
        load_cube(path)
    path.write_bytes(b"HSC1 1 x 1\n" + b"\x00" * 8)
    with pytest.raises(HscFormatError):
        load_cube(path)
    path.write_bytes(b"no newline at all")
    with pytest.raises(HscFormatError):
        load_cube(path)


def test_guide_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    g = GuideImage(rng.uniform(0, 1, size=32), 4, 4, 2)
    path = tmp_path / "g.hsc"
    save_guide(g, path)
    back = load_guide(path)
    assert back.bands == 2
    assert np.array_equal(back.data, g.data)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_roundtrip_random_cubes(tmp_path, seed):
    rng = np.random.default_rng(seed)
    nv, nh, b = rng.integers(1, 7, size=3)
    cube = HsCube(rng.standard_normal(nv * nh * b), int(nv), int(nh), int(b))
    path = tmp_path / f"r{seed}.hsc"
    save_cube(cube, path)
    back = load_cube(path)
    assert (back.nv, back.nh, back.b) == (cube.nv, cube.nh, cube.b)
    assert np.array_equal(back.data, cube.data)


def test_rgb_composite_constant():
    cube = HsCube(np.full(2 * 2 * 3, 0.5), 2, 2, 3)
    img = rgb_composite(cube, 1, 2, 3)
    assert img.shape == (2, 2, 3)
    assert np.all(img == 0.5)


def test_rgb_composite_clamps():
    data = np.full(4, 1.3)
    cube = HsCube(data, 2, 2, 1)
    img = rgb_composite(cube, 1, 1, 1)
    assert np.all(img == 1.0)
    cube2 = HsCube(np.full(4, -0.2), 2, 2, 1)
    assert np.all(rgb_composite(cube2, 1, 1, 1) == 0.0)


def test_rgb_composite_band_out_of_range():
    cube = HsCube(np.zeros(8), 2, 2, 2)
    with pytest.raises(IndexError):
        rgb_composite(cube, 1, 2, 3)
