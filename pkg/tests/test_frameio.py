import numpy as np
import pytest
from PIL import Image

from segperf import frameio
from segperf.frameio import (
    DepthMap,
    FormatError,
    FrameRecord,
    ImageTensor,
    LabelRangeError,
    ProbMap,
    RangeError,
    SegMap,
    ShapeError,
    SparseDepthMap,
)


def write_png(path, arr, mode=None):
    Image.fromarray(arr, mode=mode).save(path)


class TestImageTensor:
    def test_range_enforced(self):
        with pytest.raises(RangeError):
            ImageTensor(np.full((2, 2, 3), 1.5))

    def test_bad_channels(self):
        with pytest.raises(FormatError):
            ImageTensor(np.zeros((2, 2, 4)))

    def test_load_white_pixel(self, tmp_path):
        p = tmp_path / "w.png"
        write_png(p, np.full((1, 1, 3), 255, dtype=np.uint8))
        img = frameio.load_image(p)
        assert img.data.shape == (1, 1, 3)
        assert np.all(img.data == 1.0)

    def test_load_black_pixel(self, tmp_path):
        p = tmp_path / "b.png"
        write_png(p, np.zeros((1, 1, 3), dtype=np.uint8))
        assert np.all(frameio.load_image(p).data == 0.0)

    def test_load_grayscale_values(self, tmp_path):
        p = tmp_path / "g.png"
        raw = np.array([[0, 51], [102, 255]], dtype=np.uint8)
        write_png(p, raw, mode="L")
        img = frameio.load_image(p)
        # oracle: v / 255
        assert np.allclose(img.data[:, :, 0], raw / 255.0)
        assert np.array_equal(np.unique(img.data), [0.0, 0.2, 0.4, 1.0])

    def test_load_rejects_16bit(self, tmp_path):
        p = tmp_path / "d16.png"
        write_png(p, np.full((2, 2), 300, dtype=np.uint16))
        with pytest.raises(FormatError):
            frameio.load_image(p)

    def test_half_quantizes_up(self, tmp_path):
        p = tmp_path / "h.png"
        frameio.save_image(ImageTensor(np.full((1, 1, 1), 0.5)), p)
        # round(0.5 * 255) = 128, reloads as 128/255 (asymmetric by design)
        assert frameio.load_image(p).data[0, 0, 0] == pytest.approx(128 / 255)

    def test_roundtrip_error_bound(self, tmp_path):
        rng = np.random.default_rng(0)
        img = ImageTensor(rng.random((9, 7, 3)))
        p = tmp_path / "r.png"
        frameio.save_image(img, p)
        back = frameio.load_image(p)
        assert np.abs(back.data - img.data).max() <= 1.0 / (2 * 255) + 1e-12


class TestSegMap:
    def test_all_zeros(self, tmp_path):
        p = tmp_path / "s.png"
        write_png(p, np.zeros((3, 3), dtype=np.uint8), mode="L")
        seg = frameio.load_seg_map(p, num_classes=2)
        assert np.all(seg.labels == 0)

    def test_ignore_passthrough(self, tmp_path):
        p = tmp_path / "s.png"
        raw = np.zeros((2, 2), dtype=np.uint8)
        raw[1, 1] = 255
        write_png(p, raw, mode="L")
        seg = frameio.load_seg_map(p, num_classes=2)
        assert seg.labels[1, 1] == frameio.IGNORE_LABEL

    def test_label_out_of_range(self, tmp_path):
        p = tmp_path / "s.png"
        raw = np.zeros((2, 2), dtype=np.uint8)
        raw[0, 1] = 7
        write_png(p, raw, mode="L")
        with pytest.raises(LabelRangeError, match=r"\(0, 1\)"):
            frameio.load_seg_map(p, num_classes=5)

    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 6, size=(8, 8))
        labels[0, :] = 255
        seg = SegMap(labels, num_classes=6)
        p = tmp_path / "s.png"
        frameio.save_seg_map(seg, p)
        assert np.array_equal(frameio.load_seg_map(p, 6).labels, seg.labels)


class TestDepthMap:
    def test_raw_256_is_one_meter(self, tmp_path):
        p = tmp_path / "d.png"
        write_png(p, np.full((1, 1), 256, dtype=np.uint16))
        d = frameio.load_depth_map(p)
        assert d.depth[0, 0] == 1.0 and d.valid[0, 0]

    def test_raw_zero_invalid(self, tmp_path):
        p = tmp_path / "d.png"
        write_png(p, np.zeros((1, 1), dtype=np.uint16))
        assert not frameio.load_depth_map(p).valid[0, 0]

    def test_raw_12800_is_50m(self, tmp_path):
        p = tmp_path / "d.png"
        write_png(p, np.full((1, 1), 12800, dtype=np.uint16))
        assert frameio.load_depth_map(p).depth[0, 0] == 50.0  # oracle: raw / 256

    def test_rejects_8bit(self, tmp_path):
        p = tmp_path / "d8.png"
        write_png(p, np.full((2, 2), 10, dtype=np.uint8), mode="L")
        with pytest.raises(FormatError):
            frameio.load_depth_map(p)

    def test_roundtrip_1_5m_stores_raw_384(self, tmp_path):
        sd = SparseDepthMap(np.full((1, 1), 1.5), np.ones((1, 1), bool))
        p = tmp_path / "d.png"
        frameio.save_depth_map(sd, p)
        assert np.asarray(Image.open(p))[0, 0] == 384  # 1.5 * 256
        assert frameio.load_depth_map(p).depth[0, 0] == 1.5

    def test_roundtrip_exact_on_quantized_values(self, tmp_path):
        rng = np.random.default_rng(2)
        raw = rng.integers(0, 30000, size=(6, 6))
        sd = SparseDepthMap(np.where(raw > 0, raw / 256.0, 1.0), raw > 0)
        p = tmp_path / "d.png"
        frameio.save_depth_map(sd, p)
        back = frameio.load_depth_map(p)
        assert np.array_equal(back.valid, sd.valid)
        assert np.array_equal(back.depth[back.valid], sd.depth[sd.valid])

    def test_save_range_error(self, tmp_path):
        sd = SparseDepthMap(np.full((1, 1), 300.0), np.ones((1, 1), bool))
        with pytest.raises(RangeError):
            frameio.save_depth_map(sd, tmp_path / "d.png")

    def test_dense_range_enforced(self):
        with pytest.raises(RangeError):
            DepthMap(np.full((2, 2), 500.0))


class TestProbMap:
    def test_must_sum_to_one(self):
        with pytest.raises(ValueError):
            ProbMap(np.full((2, 2, 3), 0.5))

    def test_valid(self):
        pm = ProbMap(np.full((2, 2, 4), 0.25))
        assert pm.num_classes == 4


class TestFrameRecord:
    def test_shape_consistency(self):
        with pytest.raises(ShapeError):
            FrameRecord(
                frame_id="f",
                image=ImageTensor(np.zeros((4, 4, 3))),
                seg_gt=SegMap(np.zeros((5, 5), dtype=np.int64), 2),
            )


class TestManifest:
    def test_roundtrip_and_load(self, tmp_path):
        seg = SegMap(np.zeros((4, 4), dtype=np.int64), 3)
        frameio.save_seg_map(seg, tmp_path / "s.png")
        frameio.save_image(ImageTensor(np.zeros((4, 4, 3))), tmp_path / "i.png")
        rows = [{"frame_id": "a", "image": "i.png", "seg_gt": "s.png"}]
        frameio.write_manifest(tmp_path / "m.jsonl", rows)
        back = frameio.read_manifest(tmp_path / "m.jsonl")
        assert back == rows
        frame = frameio.load_frame(back[0], tmp_path, num_classes=3)
        assert frame.seg_gt is not None and frame.depth_gt is None
