import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ampforge import data
from ampforge.data import ImageSample
from ampforge.errors import AllZeroInput, DimensionMismatch, IoError, ParseError


class TestEncodePlain:
    def test_single_white_pixel_is_ground_state(self):
        img = ImageSample([1, 0, 0, 0], 2, 2, label=0)
        enc = data.encode_plain(img)
        assert np.allclose(enc.state, [1, 0, 0, 0])

    def test_uniform_image(self):
        enc = data.encode_plain(ImageSample([3, 3, 3, 3], 2, 2, label=1))
        assert np.allclose(enc.state, [0.5] * 4)

    def test_8x8_needs_six_qubits(self, rng):
        img = ImageSample(rng.uniform(size=64), 8, 8, label=0)
        assert data.encode_plain(img).state.size == 64

    def test_padding_to_power_of_two(self):
        enc = data.encode_plain(ImageSample([1, 1, 1], 3, 1, label=0))
        assert enc.state.size == 4
        assert enc.state[3] == 0

    def test_zero_image_rejected(self):
        with pytest.raises(AllZeroInput):
            data.encode_plain(ImageSample([0, 0, 0, 0], 2, 2, label=0))


class TestEncodeCompressed:
    def test_8x8_needs_five_qubits(self, rng):
        img = ImageSample(rng.uniform(size=64), 8, 8, label=0)
        enc = data.encode_compressed(img)
        assert enc.state.size == 32
        assert abs(np.linalg.norm(enc.state) - 1) < 1e-10

    def test_real_pixel_pair_packing(self):
        enc = data.encode_compressed(ImageSample([1, 0, 0, 0], 2, 2, label=0))
        assert np.allclose(enc.state, [1, 0])

    def test_imaginary_packing(self):
        enc = data.encode_compressed(ImageSample([0, 1, 0, 0], 2, 2, label=0))
        assert np.allclose(enc.state, [1j, 0])
        assert abs(enc.state[0]) ** 2 == pytest.approx(1.0)

    def test_row_major_horizontal_adjacency(self, rng):
        pixels = rng.uniform(size=16)
        enc = data.encode_compressed(ImageSample(pixels, 4, 4, label=0))
        nrm = np.linalg.norm(pixels)
        assert np.allclose(enc.state.real * nrm, pixels[0::2])
        assert np.allclose(enc.state.imag * nrm, pixels[1::2])


class TestDecodeCompressed:
    def test_inverse_of_encode(self, rng):
        pixels = rng.uniform(0.1, 1.0, size=64)
        img = ImageSample(pixels, 8, 8, label=3)
        dec = data.decode_compressed(data.encode_compressed(img).state, 8, 8)
        ratio = dec.pixels / pixels
        assert np.allclose(ratio, ratio[0], atol=1e-10)

    def test_ground_state_is_single_bright_pair(self):
        dec = data.decode_compressed(np.array([1.0, 0.0]), 2, 2)
        assert np.allclose(dec.pixels, [1, 0, 0, 0])

    def test_approximate_state_differs_consistently(self):
        from ampforge.disentangle import DisentangleConfig, disentangle, preparation_program
        from ampforge.simulator import run, state_fidelity

        img = data.load_csv("data/digits_test.csv", 32, 32)[0]
        exact = data.encode_compressed(img).state
        report = disentangle(exact, DisentangleConfig(target_fidelity=0.6,
                                                      max_sweeps=30))
        approx = run(preparation_program(report)).amplitudes
        fid = state_fidelity(exact, approx)
        # L2 distance between unit vectors after optimal phase alignment
        l2 = np.sqrt(2 - 2 * np.sqrt(fid))
        phase = np.vdot(exact, approx)
        approx = approx * np.conj(phase) / abs(phase)
        dec = data.decode_compressed(approx, 32, 32)
        exact_pix = img.pixels / np.linalg.norm(img.pixels)
        dec_pix = dec.pixels / np.linalg.norm(dec.pixels)
        err = np.linalg.norm(exact_pix - dec_pix)
        assert err > 0.01  # visibly different from the original
        assert err <= l2 + 0.05  # but bounded by the fidelity shortfall

    def test_dimension_guard(self):
        with pytest.raises(DimensionMismatch):
            data.decode_compressed(np.ones(4), 8, 8)


class TestShapes:
    def test_deterministic(self):
        a = data.generate_shapes(5, seed=9)
        b = data.generate_shapes(5, seed=9)
        assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))
        c = data.generate_shapes(5, seed=10)
        assert any(not np.array_equal(x.pixels, y.pixels) for x, y in zip(a, c))

    def test_class_balance(self):
        samples = data.generate_shapes(7, seed=1)
        labels = [s.label for s in samples]
        assert labels.count(0) == labels.count(1) == 7

    def test_pixel_count_carries_no_signal_but_orientation_does(self):
        samples = data.generate_shapes(20, seed=3)
        totals = {s.pixels.sum() for s in samples}
        assert len(totals) == 1  # any intensity threshold stays at chance

        def orientation_score(img):
            grid = img.pixels.reshape(8, 8)
            return np.var(grid.sum(axis=1)) - np.var(grid.sum(axis=0))

        correct = sum((orientation_score(s) > 0) == (s.label == 0) for s in samples)
        assert correct == len(samples)


class TestRandomPerturb:
    def test_target_one_returns_input(self, rng):
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        v /= np.linalg.norm(v)
        assert np.array_equal(data.random_perturb(v, 1.0, seed=0), v)

    def test_hits_target_band_over_many_seeds(self, rng):
        v = rng.standard_normal(1024) + 1j * rng.standard_normal(1024)
        v /= np.linalg.norm(v)
        for seed in range(100):
            w = data.random_perturb(v, 0.6, seed=seed)
            fid = abs(np.vdot(v, w)) ** 2
            assert abs(fid - 0.6) <= 0.005
            assert abs(np.linalg.norm(w) - 1) < 1e-10

    def test_different_seeds_differ(self, rng):
        v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        v /= np.linalg.norm(v)
        a = data.random_perturb(v, 0.8, seed=1)
        b = data.random_perturb(v, 0.8, seed=2)
        assert not np.allclose(a, b)

    def test_rejects_bad_target(self, rng):
        with pytest.raises(ValueError):
            data.random_perturb(np.ones(4) / 2, 0.0, seed=0)

    @settings(max_examples=40, deadline=None)
    @given(target=st.floats(0.05, 0.99), seed=st.integers(0, 10**6))
    def test_band_property(self, target, seed):
        rng = np.random.default_rng(7)
        v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        v /= np.linalg.norm(v)
        w = data.random_perturb(v, target, seed=seed)
        assert abs(abs(np.vdot(v, w)) ** 2 - target) <= 0.005


class TestCsvRoundTrip:
    def test_single_row(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("0,1,0,0,1\n")
        samples = data.load_csv(path, 2, 2)
        assert len(samples) == 1
        assert samples[0].label == 0
        assert np.array_equal(samples[0].pixels, [1, 0, 0, 1])

    def test_malformed_float_locates_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1,0,0,1\n1,0,oops,0,1\n")
        with pytest.raises(ParseError) as exc_info:
            data.load_csv(path, 2, 2)
        assert exc_info.value.row == 2
        assert exc_info.value.column == 3  # 1-based field position of 'oops'

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("0,1,0\n")
        with pytest.raises(ParseError):
            data.load_csv(path, 2, 2)

    def test_full_precision_round_trip(self, tmp_path, rng):
        samples = [ImageSample(rng.uniform(size=16), 4, 4, label=int(rng.integers(3)))
                   for _ in range(5)]
        path = tmp_path / "rt.csv"
        data.save_csv(path, samples)
        back = data.load_csv(path, 4, 4)
        for a, b in zip(samples, back):
            assert a.label == b.label
            assert np.array_equal(a.pixels, b.pixels)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            data.load_csv(tmp_path / "nope.csv", 2, 2)


def test_pgm_export(tmp_path, rng):
    img = ImageSample(rng.uniform(size=16), 4, 4, label=0)
    path = tmp_path / "img.pgm"
    data.export_pgm(img, path)
    text = path.read_text().splitlines()
    assert text[0] == "P2"
    assert text[1] == "4 4"
    assert len(text) == 3 + 4
