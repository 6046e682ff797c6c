import numpy as np
import pytest

from emostim import diffmath as dm
from emostim import encoders as enc
from emostim import gradcheck as gc


def test_identity_passthrough():
    p = enc.EncoderParams(2, 2, enc.IDENTITY)
    raw = np.array([0.1, 0.2])
    v, cache = enc.encode_global(p, raw)
    assert v.tobytes() == raw.tobytes()
    assert p.params() == []
    assert enc.encode_backward(p, cache, np.array([1.0, 2.0])).tolist() == [1.0, 2.0]


def test_identity_requires_equal_sizes():
    with pytest.raises(ValueError):
        enc.EncoderParams(3, 2, enc.IDENTITY)


def test_zero_params_give_zero_vector():
    p = enc.EncoderParams(4, 3)
    v, _ = enc.encode_global(p, np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.array_equal(v, np.zeros(3))


def test_shape_mismatch():
    with pytest.raises(dm.ShapeError):
        enc.encode_global(enc.EncoderParams(4, 3), np.ones(5))
    with pytest.raises(dm.ShapeError):
        enc.encode_expression(enc.EncoderParams(4, 3), np.ones(2))


@pytest.mark.parametrize("mode", [enc.TRAINABLE, enc.IDENTITY])
def test_absent_face_is_exact_zero_without_gradient(mode):
    p = enc.EncoderParams(3, 3, mode)
    p.init(dm.make_rng(1))
    v, cache = enc.encode_expression(p, None)
    assert v.shape == (3,) and v.tobytes() == np.zeros(3).tobytes()
    assert enc.encode_backward(p, cache, np.ones(3)) is None
    assert all(not q.grad.any() for q in p.params())


def test_present_face_matches_affine_tanh():
    rng = dm.make_rng(2)
    p = enc.EncoderParams(4, 3)
    p.init(rng)
    face = rng.standard_normal(4)
    v, _ = enc.encode_expression(p, face)
    expected = [np.tanh(sum(p.projection.value[r, k] * face[k] for k in range(4)) + p.bias.value[r]) for r in range(3)]
    np.testing.assert_allclose(v, expected, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_encoder_gradients(seed):
    assert gc.check_global_encoder(dm.make_rng(seed, 20)) < 1e-4
    assert gc.check_expression_encoder(dm.make_rng(seed, 21)) < 1e-4
