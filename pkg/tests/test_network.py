import struct

import numpy as np
import pytest

from emostim import diffmath as dm
from emostim import gradcheck as gc
from emostim.data import SampleRecord
from emostim.modelio import MAGIC, ModelFormatError, load_model, model_from_bytes, model_to_bytes, save_model
from emostim.network import Dims, FusionNet
from emostim.taxonomy import emotionroi_default, mikel_default

DIMS = Dims(d1=6, d2=5, d3=4, H=5, M=4, F=3)


def make_net(seed=0, **kw):
    net = FusionNet(kw.pop("taxonomy", mikel_default()), DIMS, 5, 4, **kw)
    net.init(seed)
    return net


def sample(rng, n=3, face=True):
    objs = rng.standard_normal((n, 3)) if n else np.empty((0, 0))
    return SampleRecord("s", "awe", 3, rng.standard_normal(5), objs, rng.standard_normal(4) if face else None)


def test_dims_validation():
    assert Dims().fused == 128
    with pytest.raises(ValueError):
        Dims(d2=16, H=32)
    with pytest.raises(ValueError):
        Dims(F=0)


def test_forward_outputs_distribution():
    net = make_net()
    p, _ = net.forward(sample(dm.make_rng(1)))
    assert p.shape == (8,) and abs(p.sum() - 1) < 1e-12


def test_missing_stimuli_contribute_zero_blocks():
    net = make_net()
    s = sample(dm.make_rng(2), n=0, face=False)
    _, cache = net.forward(s)
    v_emo = cache[3]
    assert not v_emo[6:].any()
    d_global, d_obj, d_face = net.backward(cache, np.ones(8))
    assert d_face is None and d_obj.shape == (0, 3)
    assert all(not p.grad.any() for p in net.face_enc.params() + net.snet.params())


def test_objects_beyond_n_max_are_ignored():
    net = make_net(n_max=2)
    rng = dm.make_rng(3)
    s = sample(rng, n=5)
    cut = SampleRecord("s", "awe", 3, s.global_feat, s.objects[:2], s.face)
    assert net.predict(s).tobytes() == net.predict(cut).tobytes()


def test_init_is_seeded():
    a, b, c = make_net(1), make_net(1), make_net(2)
    assert all(x.value.tobytes() == y.value.tobytes() for x, y in zip(a.params(), b.params()))
    assert any(x.value.tobytes() != y.value.tobytes() for x, y in zip(a.params(), c.params()))


@pytest.mark.parametrize("seed", range(5))
def test_whole_network_gradients(seed):
    assert gc.check_composite(dm.make_rng(seed, 40)) < 1e-4


@pytest.mark.parametrize("kw", [{}, {"snet": "fc"}, {"taxonomy": emotionroi_default(), "t_steps": 2}])
def test_model_roundtrip_is_exact(tmp_path, kw):
    net = make_net(4, **kw)
    path = tmp_path / "m.bin"
    save_model(net, path)
    back = load_model(path)
    assert back.describe() == net.describe()
    for a, b in zip(net.params(), back.params()):
        assert a.value.tobytes() == b.value.tobytes()
    s = sample(dm.make_rng(5))
    assert net.predict(s).tobytes() == back.predict(s).tobytes()
    assert path.read_bytes().startswith(MAGIC)


def _corrupt_cases(blob):
    hlen = struct.unpack_from("<I", blob, 12)[0]
    header = blob[16:16 + hlen]
    yield "bad magic", b"XXXXXXXX" + blob[8:]
    yield "version", blob[:8] + struct.pack("<I", 9) + blob[12:]
    yield "truncated", blob[:-8]
    yield "trailing", blob + b"\0"
    yield "short", blob[:12]
    at = header.index(b'"taxonomy_hash": "') + len(b'"taxonomy_hash": "')
    flipped = b"1" if header[at:at + 1] != b"1" else b"2"
    yield "hash", blob[:16 + at] + flipped + blob[16 + at + 1:]
    yield "header", blob[:16] + b"{" * hlen + blob[16 + hlen:]


@pytest.mark.parametrize("case", ["bad magic", "version", "truncated", "trailing", "short", "hash", "header"])
def test_corrupted_files_are_rejected(case):
    blob = model_to_bytes(make_net())
    bad = dict(_corrupt_cases(blob))[case]
    match = {"hash": "hash", "bad magic": "magic", "trailing": "trailing"}.get(case)
    with pytest.raises(ModelFormatError, match=match):
        model_from_bytes(bad)
