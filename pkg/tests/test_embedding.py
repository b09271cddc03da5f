import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from specae.config import TrainConfig
from specae.embedding import EPS_DIV, assemble, reconstruction_features
from specae.errors import DimensionError
from specae.model import embedding_width


def features_oracle(x, x_hat):
    """Per-node loop computing the two error features directly."""
    out = []
    for a, b in zip(x, x_hat):
        na = math.sqrt(sum(v * v for v in a)) + EPS_DIV
        nb = math.sqrt(sum(v * v for v in b)) + EPS_DIV
        err = math.sqrt(sum((u - v) ** 2 for u, v in zip(a, b))) / na
        cos = sum(u * v for u, v in zip(a, b)) / (na * nb)
        out.append([err, cos])
    return np.array(out)


class TestReconstructionFeatures:
    def test_perfect(self):
        out = reconstruction_features([[1.0, 0.0]], [[1.0, 0.0]]).data
        assert out[0, 0] == 0.0
        assert out[0, 1] == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal(self):
        out = reconstruction_features([[1.0, 0.0]], [[0.0, 1.0]]).data
        assert out[0, 0] == pytest.approx(math.sqrt(2), abs=1e-10)
        assert out[0, 1] == 0.0

    def test_zero_row_is_finite(self):
        out = reconstruction_features([[0.0, 0.0]], [[3.0, 4.0]]).data
        assert np.all(np.isfinite(out))
        assert out[0, 0] == pytest.approx(5.0 / EPS_DIV)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            reconstruction_features(np.zeros((2, 3)), np.zeros((2, 2)))

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (6, 4), elements=st.floats(-5, 5)),
           arrays(np.float64, (6, 4), elements=st.floats(-5, 5)))
    def test_matches_oracle(self, X, X_hat):
        out = reconstruction_features(X, X_hat).data
        np.testing.assert_allclose(out, features_oracle(X, X_hat), rtol=1e-10, atol=1e-10)
        assert np.all(np.abs(out[:, 1]) <= 1.0 + 1e-12)


class TestAssemble:
    def test_full_width(self):
        cfg = TrainConfig(d1=8, d2=8)
        assert embedding_width(cfg) == 20
        emb = assemble(np.zeros((3, 8)), np.zeros((3, 8)), np.zeros((3, 2)), np.zeros((3, 2)))
        assert emb.width == 20

    def test_ablation_widths(self):
        assert embedding_width(TrainConfig(ablation="S")) == 8 + 2
        assert embedding_width(TrainConfig(ablation="nr")) == 8 + 8
        assert embedding_width(TrainConfig(ablation="N")) == 8 + 2
        assert assemble(z_x=np.zeros((3, 8)), x_error=np.zeros((3, 2))).width == 10

    def test_segments_recover_inputs(self, rng):
        parts = [rng.standard_normal((5, w)) for w in (3, 4, 2, 2)]
        emb = assemble(*parts)
        for name, part in zip(("z_x", "z_g", "x_error", "g_error"), parts):
            np.testing.assert_array_equal(emb.segment(name).data, part)

    def test_absent_segment(self, rng):
        emb = assemble(z_x=rng.standard_normal((5, 3)), z_g=rng.standard_normal((5, 4)))
        assert emb.layout == {"z_x": 3, "z_g": 4, "x_error": 0, "g_error": 0}
        assert emb.segment("x_error").shape == (5, 0)

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            assemble(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_empty(self):
        with pytest.raises(DimensionError):
            assemble()
