import json
import warnings

import numpy as np
import pytest

from emostim.data import (
    DataError,
    SynthSpec,
    check_consistent,
    dump_jsonl,
    parse_jsonl,
    record_from_json,
    split_dataset,
    synth_generate,
    synth_geometry,
)
from emostim.taxonomy import emotionroi_default, mikel_default

MIKEL = mikel_default()


def _rec(**kw):
    obj = {"id": "a", "label": "awe", "global": [0.1, 0.2], "objects": [[1.0, 2.0]], "face": None}
    obj.update(kw)
    return obj


def _write(tmp_path, lines):
    path = tmp_path / "d.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_parse_single_record(tmp_path):
    path = _write(tmp_path, [json.dumps(_rec())])
    (r,) = parse_jsonl(path, MIKEL)
    assert (r.y, r.n_objects, r.face) == (3, 1, None)
    assert r.global_feat.tolist() == [0.1, 0.2]


def test_empty_objects_and_face():
    r = record_from_json(_rec(objects=[], face=[0.5, 0.5]), MIKEL)
    assert r.n_objects == 0 and r.face.tolist() == [0.5, 0.5]


def test_truncation_warns_and_keeps_first():
    objs = [[float(i), 0.0] for i in range(12)]
    with pytest.warns(UserWarning, match="first 10"):
        r = record_from_json(_rec(objects=objs), MIKEL, n_max=10)
    assert r.n_objects == 10 and r.objects[-1, 0] == 9.0


def test_missing_label_names_line(tmp_path):
    bad = _rec()
    del bad["label"]
    path = _write(tmp_path, [json.dumps(_rec()), json.dumps(bad)])
    with pytest.raises(DataError, match=r":2: missing field\(s\) label"):
        parse_jsonl(path, MIKEL)


@pytest.mark.parametrize("obj, msg", [
    (_rec(label="joy"), "unknown label"),
    (_rec(extra=1), "unexpected field"),
    (_rec(objects=[[1.0], [1.0, 2.0]]), "differ in length"),
    (_rec(global_feat=None), "unexpected field"),
    (_rec(face="x"), "face"),
    (_rec(**{"global": []}), "empty"),
])
def test_record_rejects(obj, msg):
    with pytest.raises(DataError, match=msg):
        record_from_json(obj, MIKEL)


@pytest.mark.parametrize("text", ['[NaN, 1.0]', '[1e999, 1.0]', '[Infinity, 0.0]'])
def test_non_finite_rejected(tmp_path, text):
    line = '{"id": "a", "label": "awe", "global": %s, "objects": [], "face": null}' % text
    with pytest.raises(DataError, match=":1:"):
        parse_jsonl(_write(tmp_path, [line]), MIKEL)


def test_label_resolved_against_other_taxonomy():
    r = record_from_json(_rec(label="joy"), emotionroi_default())
    assert r.y == 3


def test_roundtrip_is_bitwise(tmp_path):
    spec = SynthSpec(samples_per_class=3, test_per_class=0, seed=5)
    records = synth_generate(spec)
    path = tmp_path / "r.jsonl"
    dump_jsonl(records, path)
    back = parse_jsonl(path, MIKEL)
    for a, b in zip(records, back, strict=True):
        assert a.id == b.id and a.y == b.y
        assert a.global_feat.tobytes() == b.global_feat.tobytes()
        assert a.objects.tobytes() == b.objects.tobytes()
        assert (a.face is None and b.face is None) or a.face.tobytes() == b.face.tobytes()


def test_check_consistent():
    recs = [record_from_json(_rec(), MIKEL), record_from_json(_rec(objects=[], face=[1.0]), MIKEL)]
    assert check_consistent(recs) == (2, 2, 1)
    with pytest.raises(DataError, match="empty"):
        check_consistent([])
    recs.append(record_from_json(_rec(**{"global": [1.0]}), MIKEL))
    with pytest.raises(DataError, match="global"):
        check_consistent(recs)


def test_split_sizes_and_disjointness():
    items = list(range(100))
    train, val, test = split_dataset(items, (0.8, 0.05, 0.15), seed=3)
    assert (len(train), len(val), len(test)) == (80, 5, 15)
    assert sorted(train + val + test) == items
    assert split_dataset(items, seed=3) == (train, val, test)
    with pytest.raises(ValueError):
        split_dataset(items, (0.5, 0.2, 0.2))


def test_synth_class_balance():
    spec = SynthSpec(samples_per_class=7, test_per_class=2)
    train = synth_generate(spec, "train")
    assert np.bincount([r.y for r in train]).tolist() == [7] * 8
    assert np.bincount([r.y for r in synth_generate(spec, "test")]).tolist() == [2] * 8
    assert all(0 <= r.n_objects <= 10 for r in train)


def test_synth_is_deterministic_and_seeded():
    a = synth_generate(SynthSpec(samples_per_class=2, seed=1))
    b = synth_generate(SynthSpec(samples_per_class=2, seed=1))
    c = synth_generate(SynthSpec(samples_per_class=2, seed=2))
    assert all(x.global_feat.tobytes() == y.global_feat.tobytes() for x, y in zip(a, b))
    assert a[0].global_feat.tobytes() != c[0].global_feat.tobytes()


def test_tiny_noise_recovers_means():
    spec = SynthSpec(samples_per_class=1, noise=1e-12, face_prob=1.0, min_objects=1)
    geo = synth_geometry(spec)
    for r in synth_generate(spec):
        np.testing.assert_allclose(r.global_feat, geo["global"][r.y], atol=1e-9)
        np.testing.assert_allclose(r.face, geo["face"][r.y], atol=1e-9)
        np.testing.assert_allclose(r.objects, np.tile(geo["object"][r.y], (r.n_objects, 1)), atol=1e-9)


def test_same_polarity_means_are_closer():
    spec = SynthSpec()
    for means in synth_geometry(spec).values():
        d = np.linalg.norm(means[:, None] - means[None], axis=-1)
        pol = np.array([int(p) for p in spec.taxonomy.polarities])
        same = pol[:, None] == pol[None]
        off = ~np.eye(8, dtype=bool)
        assert d[same & off].max() < d[~same].min()


def test_synth_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(noise=0.0)
    with pytest.raises(ValueError):
        SynthSpec.from_dict({"bogus": 1})
    assert SynthSpec.from_dict({"taxonomy": "emotionroi"}).taxonomy.size == 6
