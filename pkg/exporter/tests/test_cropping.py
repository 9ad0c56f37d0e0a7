"""Crop-rule parity with the consumer toolkit, plus pixel-window behavior."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from mvexport.cropping import crop_with_zoom_out, pixel_window

PARITY_FIXTURE = (
    Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "crop_parity_cases.json"
)


class TestCropParity:
    def test_all_frozen_cases_match_exactly(self):
        cases = json.loads(PARITY_FIXTURE.read_text())
        assert len(cases) == 100
        for case in cases:
            got = crop_with_zoom_out(
                tuple(case["box"]), case["ratio"], tuple(case["image_size"])
            )
            assert list(got) == case["expected"], case

    def test_hand_cases(self):
        assert crop_with_zoom_out((10, 10, 20, 20), 2.0, (100, 100)) == (5, 5, 25, 25)
        assert crop_with_zoom_out((0, 0, 10, 10), 2.0, (100, 100)) == (0, 0, 15, 15)
        assert crop_with_zoom_out((10, 10, 20, 20), 1.0, (100, 100)) == (10, 10, 20, 20)

    def test_ratio_below_one_rejected(self):
        with pytest.raises(ValueError, match="ratio"):
            crop_with_zoom_out((0, 0, 10, 10), 0.9, (100, 100))

    def test_fully_outside_box_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            crop_with_zoom_out((200, 200, 210, 210), 1.0, (100, 100))


class TestPixelWindow:
    def test_outer_rounding(self):
        image = np.arange(100 * 100 * 3).reshape(100, 100, 3)
        window = pixel_window((10.2, 20.8, 14.1, 25.0), image)
        assert window.shape == (5, 5, 3)  # rows 20..25, cols 10..15
        np.testing.assert_array_equal(window, image[20:25, 10:15])

    def test_minimum_one_pixel(self):
        image = np.zeros((10, 10, 3))
        window = pixel_window((3.2, 4.1, 3.9, 4.6), image)
        assert window.shape == (1, 1, 3)

    def test_outside_rejected(self):
        image = np.zeros((10, 10, 3))
        with pytest.raises(ValueError, match="outside"):
            pixel_window((20.0, 20.0, 25.0, 25.0), image)
