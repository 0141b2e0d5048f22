import numpy as np
import pytest

from cutmix_lp import (
    ConfigError,
    MultiLabel,
    NoiseSpec,
    RefMap,
    apply_noise_suite,
    border_deformation,
    class_swap,
    dilate_erode,
    map_iou,
    mask_shift,
    rectify_borders,
    segment_swap,
)
from cutmix_lp.mixing import readout_phi
from cutmix_lp.rng import stream


def ref(data, num_classes):
    return RefMap(np.asarray(data, dtype=np.uint8), num_classes)


def cross_dilate_once(mask):
    """Independent 4-neighborhood dilation via shifted copies."""
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


class TestMaskShift:
    def test_east_shift_moves_columns(self):
        data = np.full((6, 6), 2, dtype=np.uint8)
        rng = stream(0)
        shifted = None
        # Draw until the sampled direction is east, then check geometry.
        for _ in range(200):
            candidate = mask_shift(ref(data, 3), 4, rng)
            cols = candidate.data.sum(axis=0)
            if (candidate.data[:, -1] == 2).all() and cols[0] == 0:
                shifted = candidate
                break
        assert shifted is not None
        s = int((cols == 0).sum())
        assert (shifted.data[:, s:] == 2).all()
        assert (shifted.data[:, :s] == 0).all()

    def test_shift_bounded_by_max(self):
        data = np.full((120, 120), 1, dtype=np.uint8)
        rng = stream(1)
        for _ in range(30):
            shifted = mask_shift(ref(data, 1), 36, rng)
            nonvoid_cols = (shifted.data != 0).any(axis=0).sum()
            nonvoid_rows = (shifted.data != 0).any(axis=1).sum()
            assert nonvoid_cols >= 84 and nonvoid_rows >= 84  # always >= 70%

    def test_count_preserved_for_in_bounds_translation(self):
        rng = stream(2)
        data = np.zeros((10, 10), dtype=np.uint8)
        data[3:6, 4:8] = 1
        for _ in range(30):
            shifted = mask_shift(ref(data, 1), 2, rng)
            # A 3x4 block at least 2 pixels from every edge never clips.
            assert (shifted.data == 1).sum() == 12

    def test_nonvoid_count_equals_surviving_translations(self):
        from cutmix_lp.noise import _DIRECTIONS, _DIRECTION_NAMES, _mask_shift

        data = np.full((10, 14), 1, dtype=np.uint8)  # fully non-void
        rng = stream(5)
        for _ in range(40):
            out, record = _mask_shift(ref(data, 1), 6, rng)
            d_row, d_col = _DIRECTIONS[_DIRECTION_NAMES.index(record["direction"])]
            shift = record["shift"]
            expected = (10 - abs(d_row * shift)) * (14 - abs(d_col * shift))
            assert int((out.data != 0).sum()) == expected

    def test_invalid_max_shift(self):
        with pytest.raises(ConfigError):
            mask_shift(ref(np.ones((4, 4)), 1), 4, stream(0))


class TestDilateErode:
    def test_zero_iterations_identity(self):
        data = np.full((5, 5), 1, dtype=np.uint8)
        out = dilate_erode(ref(data, 1), 0, stream(0))
        assert np.array_equal(out.data, data)

    def test_singleton_erosion_vanishes(self):
        data = np.full((5, 5), 1, dtype=np.uint8)
        data[2, 2] = 2
        # Force the eroded class to be 2 by retrying seeds.
        for seed in range(50):
            out = dilate_erode(ref(data, 2), 1, stream(seed))
            if not np.array_equal(out.data, data) and 2 not in np.unique(out.data):
                assert (out.data == 1).all()  # majority border class fills
                return
        pytest.fail("erosion of the singleton class never sampled")

    def test_block_dilation_matches_shift_oracle(self):
        # 3x3 class-2 block centered in a 7x7 class-1 field.
        data = np.full((7, 7), 1, dtype=np.uint8)
        data[2:5, 2:5] = 2
        expected_mask = cross_dilate_once(data == 2)
        for seed in range(50):
            out = dilate_erode(ref(data, 2), 1, stream(seed))
            grew = (out.data == 2).sum() > 9
            if grew:
                assert np.array_equal(out.data == 2, expected_mask)
                assert (out.data == 2).sum() == 21
                return
        pytest.fail("dilation of class 2 never sampled")

    def test_plus_segment_dilation_is_13_pixels(self):
        data = np.full((7, 7), 1, dtype=np.uint8)
        plus = np.zeros((7, 7), dtype=bool)
        plus[3, 2:5] = True
        plus[2:5, 3] = True
        data[plus] = 2
        expected = cross_dilate_once(plus)
        assert expected.sum() == 13
        for seed in range(50):
            out = dilate_erode(ref(data, 2), 1, stream(seed))
            if (out.data == 2).sum() > plus.sum():
                assert np.array_equal(out.data == 2, expected)
                return
        pytest.fail("dilation of class 2 never sampled")

    def test_dilation_grows_erosion_shrinks(self):
        from cutmix_lp.noise import _dilate_erode

        rng = np.random.default_rng(4)
        data = rng.integers(1, 4, (16, 16)).astype(np.uint8)
        saw = {"dilate": False, "erode": False}
        for seed in range(20):
            out, record = _dilate_erode(ref(data, 3), 2, stream(seed))
            cls = record["class"]
            before = int((data == cls).sum())
            after = int((out.data == cls).sum())
            saw[record["op"]] = True
            if record["op"] == "dilate":
                assert after >= before
            else:
                assert after <= before
        assert saw["dilate"] and saw["erode"]


class TestRectifyBorders:
    def test_factor_one_identity(self):
        data = np.arange(16, dtype=np.uint8).reshape(4, 4) % 3
        out = rectify_borders(ref(data, 2), 1)
        assert np.array_equal(out.data, data)

    def test_checkerboard_blocks_take_top_left(self):
        data = np.zeros((4, 4), dtype=np.uint8)
        data[::2, 1::2] = 1
        data[1::2, ::2] = 1
        data += 1  # classes 1/2 checkerboard
        out = rectify_borders(ref(data, 2), 2)
        for r in range(4):
            for c in range(4):
                assert out.data[r, c] == data[(r // 2) * 2, (c // 2) * 2]

    def test_no_new_classes(self):
        rng = np.random.default_rng(0)
        data = rng.integers(0, 5, (9, 9)).astype(np.uint8)
        out = rectify_borders(ref(data, 4), 2)
        assert set(np.unique(out.data)) <= set(np.unique(data))

    def test_factor_too_large(self):
        with pytest.raises(ConfigError):
            rectify_borders(ref(np.ones((4, 4)), 1), 5)


class TestBorderDeformation:
    def test_zero_boxes_identity(self):
        data = np.full((10, 10), 1, dtype=np.uint8)
        out = border_deformation(ref(data, 1), 0, stream(0))
        assert np.array_equal(out.data, data)

    def test_box_inside_single_class_unchanged(self):
        data = np.full((20, 20), 1, dtype=np.uint8)
        out = border_deformation(ref(data, 1), 5, stream(3))
        assert np.array_equal(out.data, data)

    def test_straddling_box_resolves_to_one_side(self):
        data = np.ones((20, 20), dtype=np.uint8)
        data[:, 10:] = 2
        original = data.copy()
        changed = False
        for seed in range(40):
            out = border_deformation(ref(original, 2), 3, stream(seed)).data
            diff = out != original
            if diff.any():
                changed = True
                # Every changed pixel became 1 or 2, i.e. a bordering class.
                assert set(np.unique(out[diff])) <= {1, 2}
        assert changed


class TestSegmentSwap:
    def make_map(self):
        data = np.full((16, 16), 1, dtype=np.uint8)
        data[2:4, 3:8] = 2  # 10-pixel segment
        return ref(data, 2)

    def test_pixel_count_preserved(self):
        for seed in range(15):
            out = segment_swap(self.make_map(), stream(seed))
            assert (out.data == 2).sum() + (out.data == 1).sum() == 256
            counts = {1: (out.data == 1).sum(), 2: (out.data == 2).sum()}
            # Some swaps move class 1 (the big background segment), others
            # the 10-pixel class-2 segment; either way counts stay equal.
            assert counts[1] + counts[2] == 256
            assert counts[2] in (10, 246)

    def test_moved_segment_recolors_elsewhere(self):
        moved = False
        for seed in range(30):
            out = segment_swap(self.make_map(), stream(seed))
            if (out.data == 2).sum() == 10:
                before = np.zeros((16, 16), dtype=bool)
                before[2:4, 3:8] = True
                after = out.data == 2
                if not np.array_equal(before, after):
                    moved = True
                    # Vacated pixels take the only bordering class.
                    assert (out.data[before & ~after] == 1).all()
        assert moved

    def test_class_set_preserved_without_clipping(self):
        for seed in range(15):
            out = segment_swap(self.make_map(), stream(seed))
            assert set(np.unique(out.data)) == {1, 2}

    def test_single_class_rejected(self):
        with pytest.raises(ConfigError):
            segment_swap(ref(np.ones((4, 4)), 1), stream(0))


class TestClassSwap:
    def test_zero_fraction_identity(self):
        maps = [ref(np.full((6, 6), 1, dtype=np.uint8), 3)]
        labels = [MultiLabel.from_classes([1], 3)]
        new_maps, new_labels = class_swap(maps, labels, 0.0, stream(0))
        assert np.array_equal(new_maps[0].data, maps[0].data)
        assert new_labels[0].classes == (1,)

    def test_full_fraction_single_segment(self):
        maps = [ref(np.full((6, 6), 1, dtype=np.uint8), 3)]
        labels = [MultiLabel.from_classes([1], 3)]
        new_maps, new_labels = class_swap(maps, labels, 1.0, stream(1))
        new_class = int(new_maps[0].data[0, 0])
        assert new_class in (2, 3)
        assert (new_maps[0].data == new_class).all()
        assert new_labels[0].classes == (new_class,)

    def test_labels_recomputed_from_maps(self):
        data = np.ones((8, 8), dtype=np.uint8)
        data[:2, :2] = 2
        maps = [ref(data, 4)]
        labels = [MultiLabel.from_classes([1, 2], 4)]
        new_maps, new_labels = class_swap(maps, labels, 1.0, stream(5))
        assert new_labels[0] == readout_phi(new_maps[0])


class TestSuite:
    def make_dataset(self, n=20, num_classes=4):
        entries = []
        rng = np.random.default_rng(0)
        for i in range(n):
            data = rng.integers(1, num_classes + 1, (12, 12)).astype(np.uint8)
            ref_map = RefMap(data, num_classes)
            entries.append((f"s{i:03d}", ref_map, readout_phi(ref_map)))
        return entries

    def test_zero_fraction_byte_identical(self):
        entries = self.make_dataset()
        spec = NoiseSpec(kind="mask_shift", fraction=0.0, magnitude=3)
        result = apply_noise_suite(entries, spec, seed=7)
        assert result.records == []
        for (_, clean, _), noisy in zip(entries, result.maps):
            assert noisy.data.tobytes() == clean.data.tobytes()

    def test_full_fraction_manifest_complete(self):
        entries = self.make_dataset()
        spec = NoiseSpec(kind="mask_shift", fraction=1.0, magnitude=3)
        result = apply_noise_suite(entries, spec, seed=7)
        assert len(result.records) == len(entries)
        for record in result.records:
            assert record["kind"] == "mask_shift"
            assert record["params"]["direction"] in ("n", "ne", "e", "se", "s", "sw", "w", "nw")
            assert 1 <= record["params"]["shift"] <= 3

    def test_exact_fraction_selection(self):
        entries = self.make_dataset(n=40)
        for fraction, expected in ((0.25, 10), (0.5, 20), (1.0, 40)):
            spec = NoiseSpec(kind="rectify_borders", fraction=fraction, magnitude=2)
            result = apply_noise_suite(entries, spec, seed=3)
            assert len(result.records) == expected

    def test_deterministic(self):
        entries = self.make_dataset()
        spec = NoiseSpec(kind="dilation_erosion", fraction=0.5, magnitude=2)
        a = apply_noise_suite(entries, spec, seed=11)
        b = apply_noise_suite(entries, spec, seed=11)
        assert a.records == b.records
        for x, y in zip(a.maps, b.maps):
            assert x.data.tobytes() == y.data.tobytes()

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            NoiseSpec(kind="mask_shift", fraction=0.5)  # magnitude required
        with pytest.raises(ConfigError):
            NoiseSpec(kind="segment_swap", fraction=0.5, magnitude=3)
        with pytest.raises(ConfigError):
            NoiseSpec(kind="unknown", fraction=0.5)


class TestMapIou:
    def test_identical_maps(self):
        rng = np.random.default_rng(1)
        data = rng.integers(0, 4, (10, 10)).astype(np.uint8)
        iou = map_iou(ref(data, 3), ref(data, 3))
        assert iou.mean == 1.0
        assert all(v == 1.0 for v in iou.per_class.values())

    def test_disjoint_single_class_maps(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        b = np.zeros((4, 4), dtype=np.uint8)
        a[0] = 1
        b[1] = 2
        iou = map_iou(ref(a, 2), ref(b, 2))
        assert iou.per_class == {1: 0.0, 2: 0.0}
        assert iou.mean == 0.0

    def test_half_overlap_is_one_third(self):
        a = np.zeros((4, 8), dtype=np.uint8)
        b = np.zeros((4, 8), dtype=np.uint8)
        a[:, 0:4] = 1  # 16 pixels
        b[:, 2:6] = 1  # 16 pixels, 8 shared -> 8 / 24
        iou = map_iou(ref(a, 1), ref(b, 1))
        assert iou.per_class[1] == pytest.approx(1 / 3)

    def test_absent_classes_excluded(self):
        a = np.ones((4, 4), dtype=np.uint8)
        iou = map_iou(ref(a, 5), ref(a, 5))
        assert set(iou.per_class) == {1}
