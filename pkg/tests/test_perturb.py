import numpy as np
import pytest

from segperf.frameio import ImageTensor, ShapeError
from segperf.perturb import (
    PerturbationSpec,
    apply_perturbation,
    derive_seed,
    generate_perturbation,
    perturb_image,
)


class TestGenerate:
    def test_zero_epsilon(self):
        r = generate_perturbation(PerturbationSpec("gaussian", 0.0, 1), 4, 4, 3)
        assert np.all(r == 0.0)

    def test_gaussian_rms_exact(self):
        eps = 4 / 255
        r = generate_perturbation(PerturbationSpec("gaussian", eps, 1), 256, 256, 3)
        assert np.sqrt((r ** 2).mean()) == pytest.approx(eps, abs=1e-9)
        assert r.min() >= -1.0 and r.max() <= 1.0

    def test_deterministic(self):
        spec = PerturbationSpec("salt_pepper", 8 / 255, 42)
        a = generate_perturbation(spec, 32, 32, 3)
        b = generate_perturbation(spec, 32, 32, 3)
        assert np.array_equal(a, b)

    def test_gaussian_mean_bound(self):
        eps = 8 / 255
        r = generate_perturbation(PerturbationSpec("gaussian", eps, 5), 128, 128, 3)
        n = r.size
        assert abs(r.mean()) < 3 * eps / np.sqrt(n)

    def test_salt_pepper_values(self):
        r = generate_perturbation(PerturbationSpec("salt_pepper", 32 / 255, 3), 64, 64, 3)
        assert set(np.unique(r)) <= {-1.0, 0.0, 1.0}
        # same sign across channels of a flipped pixel
        flipped = r[:, :, 0] != 0
        assert np.array_equal(r[:, :, 0][flipped], r[:, :, 1][flipped])

    def test_salt_pepper_expected_rms(self):
        eps = 8 / 255
        ms = []
        for seed in range(100):
            r = generate_perturbation(PerturbationSpec("salt_pepper", eps, seed), 128, 128, 3)
            ms.append((r ** 2).mean())
        assert np.sqrt(np.mean(ms)) == pytest.approx(eps, rel=0.05)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            PerturbationSpec("speckle", 0.1, 0)

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            generate_perturbation(PerturbationSpec("gaussian", 0.1, 0), 0, 4, 3)


class TestApply:
    def test_identity_on_zero(self):
        img = ImageTensor(np.random.default_rng(0).random((4, 4, 3)))
        out = apply_perturbation(img, np.zeros((4, 4, 3)))
        assert np.array_equal(out.data, img.data)

    def test_clipping(self):
        img = ImageTensor(np.full((1, 1, 1), 0.9))
        out = apply_perturbation(img, np.full((1, 1, 1), 0.3))
        assert out.data[0, 0, 0] == 1.0

    def test_plain_addition(self):
        img = ImageTensor(np.full((1, 1, 1), 0.5))
        out = apply_perturbation(img, np.full((1, 1, 1), -0.2))
        assert out.data[0, 0, 0] == pytest.approx(0.3)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            apply_perturbation(ImageTensor(np.zeros((2, 2, 3))), np.zeros((3, 3, 3)))

    def test_output_in_range(self):
        rng = np.random.default_rng(1)
        img = ImageTensor(rng.random((16, 16, 3)))
        for kind in ("gaussian", "salt_pepper"):
            out = perturb_image(img, PerturbationSpec(kind, 32 / 255, 9))
            assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_salt_pepper_saturates_pixels(self):
        rng = np.random.default_rng(2)
        img = ImageTensor(rng.uniform(0.2, 0.8, (64, 64, 3)))
        r = generate_perturbation(PerturbationSpec("salt_pepper", 32 / 255, 4), 64, 64, 3)
        out = apply_perturbation(img, r)
        flipped = r != 0
        assert flipped.any()
        assert set(np.unique(out.data[flipped])) <= {0.0, 1.0}


class TestSeedDerivation:
    def test_stable(self):
        assert derive_seed(1, "a", "b") == derive_seed(1, "a", "b")

    def test_decorrelates(self):
        seeds = {derive_seed(1, "frame", i) for i in range(100)}
        assert len(seeds) == 100
