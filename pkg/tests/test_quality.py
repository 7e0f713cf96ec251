import math

import numpy as np
import pytest

from lesionprep.quality import (
    format_quality_report,
    l2rat,
    maxerr,
    mse,
    psnr,
    quality_report,
    quality_row,
)
from lesionprep.raster import GrayImage, Image

# Published before/after metric rows whose PSNR and MSE are mutually
# consistent under psnr = 10*log10(255^2 / mse).
CONSISTENT_ROWS = [
    (19.4205, 743.0656),
    (22.1285, 398.3229),
    (23.2953, 304.4737),
    (22.4291, 371.6785),
    (18.6732, 882.5930),
]
# Rows transcribed with a PSNR that does not match their own MSE.
INCONSISTENT_ROWS = [
    (21.5481, 655.2738),
    (24.0840, 329.9128),
    (19.3975, 847.0221),
]


def gray(values):
    return GrayImage(np.array(values, np.uint8))


class TestMse:
    def test_identical_zero(self, rng):
        img = Image(rng.integers(0, 256, size=(6, 6, 3), dtype=np.uint8))
        assert mse(img, img) == 0.0

    def test_hand_arithmetic(self):
        assert mse(gray([[10, 20]]), gray([[10, 14]])) == 18.0

    def test_symmetry(self, rng):
        a = Image(rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8))
        b = Image(rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8))
        assert mse(a, b) == mse(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            mse(gray([[1]]), gray([[1, 2]]))


class TestPsnr:
    @pytest.mark.parametrize("expected_db,mse_value", CONSISTENT_ROWS)
    def test_published_rows(self, expected_db, mse_value):
        assert 10 * math.log10(255**2 / mse_value) == pytest.approx(expected_db, abs=1e-3)

    @pytest.mark.parametrize("claimed_db,mse_value", INCONSISTENT_ROWS)
    def test_anomalous_rows_stay_anomalous(self, claimed_db, mse_value):
        # transcription anomaly in the source table: these PSNR cells do not
        # follow from their MSE cells, and must not be used as goldens
        assert abs(10 * math.log10(255**2 / mse_value) - claimed_db) > 0.01

    def test_identical_is_infinite(self):
        img = gray([[5, 5]])
        assert math.isinf(psnr(img, img))

    def test_consistency_with_mse(self, rng):
        for _ in range(20):
            a = Image(rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8))
            b = Image(rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8))
            m = mse(a, b)
            assert psnr(a, b) == pytest.approx(10 * math.log10(65025 / m), rel=1e-9)


class TestMaxerr:
    def test_identical_zero(self):
        img = gray([[1, 2, 3]])
        assert maxerr(img, img) == 0

    def test_single_deviation(self):
        assert maxerr(gray([[0, 10]]), gray([[99, 10]])) == 99

    def test_symmetric(self, rng):
        a = gray(rng.integers(0, 256, size=(3, 3)))
        b = gray(rng.integers(0, 256, size=(3, 3)))
        assert maxerr(a, b) == maxerr(b, a)

    def test_dominates_mse(self, rng):
        for _ in range(20):
            a = Image(rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8))
            b = Image(rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8))
            assert maxerr(a, b) ** 2 >= mse(a, b)


class TestL2rat:
    def test_identical_is_one(self, rng):
        img = Image(rng.integers(1, 256, size=(4, 4, 3), dtype=np.uint8))
        assert l2rat(img, img) == 1.0

    def test_zero_test_image(self):
        assert l2rat(gray([[3, 4]]), gray([[0, 0]])) == 0.0

    def test_hand_arithmetic(self):
        assert l2rat(gray([[3, 4]]), gray([[3, 0]])) == pytest.approx(0.36)

    def test_all_zero_reference_rejected(self):
        with pytest.raises(ValueError, match="all-zero"):
            l2rat(gray([[0, 0]]), gray([[1, 2]]))


class TestReport:
    def test_empty(self):
        assert quality_report([]) == []

    def test_identical_pair_row(self):
        img = gray([[7, 7]])
        (row,) = quality_report([("a", img, img)])
        assert math.isinf(row.psnr)
        assert (row.mse, row.maxerr, row.l2rat) == (0.0, 0, 1.0)

    def test_matches_scalar_recomputation(self, rng):
        a = Image(rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8))
        b = Image(rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8))
        row = quality_row("x", a, b)
        sq_sum = 0.0
        max_dev = 0
        e_ref = e_test = 0.0
        for pa, pb in zip(a.pixels.reshape(-1), b.pixels.reshape(-1)):
            d = int(pa) - int(pb)
            sq_sum += d * d
            max_dev = max(max_dev, abs(d))
            e_ref += int(pa) ** 2
            e_test += int(pb) ** 2
        n = 75
        assert row.mse == pytest.approx(sq_sum / n)
        assert row.maxerr == max_dev
        assert row.l2rat == pytest.approx(e_test / e_ref)
        assert row.psnr == pytest.approx(10 * math.log10(65025 / (sq_sum / n)))

    def test_failing_pair_names_id(self):
        good = gray([[1]])
        bad = gray([[1, 2]])
        with pytest.raises(ValueError, match="'case7'"):
            quality_report([("ok", good, good), ("case7", good, bad)])

    def test_formatting(self):
        img = gray([[7, 7]])
        text = format_quality_report(quality_report([("a", img, img)]))
        lines = text.splitlines()
        assert lines[0] == "id,psnr_db,mse,maxerr,l2rat,width,height"
        assert lines[1] == "a,inf,0.0000,0,1.0000,2,1"

    def test_mean_row(self):
        a, b = gray([[10, 20]]), gray([[10, 14]])
        text = format_quality_report(quality_report([("a", a, b)]), include_mean=True)
        assert text.splitlines()[-1].startswith("mean,")
