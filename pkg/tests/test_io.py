import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bifinn.io import Container, FormatError, decode_stream, encode, history_csv, load_basis, load_model, \
    load_split, read_containers, read_csv, save_basis, save_model, save_split, sha256_file, write_containers, \
    write_csv
from bifinn.lm import TrainOptions, train
from bifinn.net import NetLayout, fit_normalizers, init_net
from bifinn.pipelines import offline_bifinn, offline_mpodnn, predict_batch
from bifinn.pod import compute_pod


def test_header_layout():
    buf = encode(Container("basis", np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]), {"k": 1}))
    assert buf[:4] == b"BFNN"
    assert struct.unpack_from("<IIQQ", buf, 4) == (1, 2, 3, 2)
    # column-major payload
    assert struct.unpack_from("<6d", buf, 28) == (1.0, 3.0, 5.0, 2.0, 4.0, 6.0)
    (mlen,) = struct.unpack_from("<Q", buf, 28 + 48)
    assert buf[28 + 56:].decode() == '{"k": 1}' and mlen == 8


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(0, 6), st.integers(0, 6)),
              elements=st.floats(allow_nan=True, allow_infinity=True)))
def test_container_round_trip_is_bitwise(a):
    out = decode_stream(encode(Container("snapshot", a, {"x": [1, 2]})))
    assert len(out) == 1 and out[0].role == "snapshot" and out[0].meta == {"x": [1, 2]}
    assert out[0].data.tobytes() == np.asarray(a, dtype="<f8").tobytes()


def test_several_containers_per_file(tmp_path):
    cs = [Container("dataset", np.eye(2)), Container("basis", np.ones((3, 1)), {"a": "b"})]
    write_containers(tmp_path / "f.bfnn", cs)
    back = read_containers(tmp_path / "f.bfnn")
    assert [c.role for c in back] == ["dataset", "basis"]
    np.testing.assert_array_equal(back[1].data, np.ones((3, 1)))


def test_format_errors(tmp_path):
    good = encode(Container("basis", np.ones((2, 2))))
    with pytest.raises(FormatError, match="magic"):
        decode_stream(b"XXXX" + good[4:])
    with pytest.raises(FormatError, match="version"):
        decode_stream(good[:4] + struct.pack("<I", 9) + good[8:])
    with pytest.raises(FormatError, match="shorter"):
        decode_stream(good[:40])
    with pytest.raises(FormatError, match="truncated header"):
        decode_stream(good + good[:10])
    with pytest.raises(FormatError):
        encode(Container("weights", np.ones((1, 1))))
    (tmp_path / "bad.bfnn").write_bytes(good[:-3])
    with pytest.raises(FormatError, match="bad.bfnn"):
        read_containers(tmp_path / "bad.bfnn")


def test_basis_round_trip(tmp_path):
    b = compute_pod(np.random.default_rng(0).standard_normal((20, 8)), r=3, fidelity="low", grid_id="g")
    save_basis(tmp_path / "b.bfnn", b)
    back = load_basis(tmp_path / "b.bfnn")
    assert (back.r, back.fidelity, back.grid_id) == (3, "low", "g")
    np.testing.assert_array_equal(back.modes, b.modes)
    np.testing.assert_array_equal(back.singular_values, b.singular_values)
    assert load_basis(tmp_path / "b.bfnn", r=2).r == 2


def test_split_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    Z, H, L = rng.uniform(size=(5, 3)), rng.standard_normal((7, 5)), rng.standard_normal((4, 5))
    save_split(tmp_path / "s.bfnn", Z, H, L, {"seed": 3})
    s = load_split(tmp_path / "s.bfnn")
    np.testing.assert_array_equal(s["Z"], Z)
    np.testing.assert_array_equal(s["high"], H)
    np.testing.assert_array_equal(s["low"], L)
    assert s["meta"]["seed"] == 3
    save_split(tmp_path / "h.bfnn", Z, H)
    assert load_split(tmp_path / "h.bfnn")["low"] is None


def test_model_round_trip_predicts_identically(tmp_path):
    rng = np.random.default_rng(2)
    Z = rng.uniform(-1, 1, (30, 3))
    U = np.sin(np.outer(np.arange(1, 13), Z[:, 0])) + np.outer(np.ones(12), Z[:, 1] * Z[:, 2])
    L = U[::2] + 0.01 * rng.standard_normal((6, 30))
    bh, bl = compute_pod(U, r=4), compute_pod(L, r=4)
    opts = TrainOptions(max_iters=15)
    for model in (offline_bifinn(Z, L, U, bl, bh, opts, (5,), meta={"problem": "toy"}),
                  offline_mpodnn(Z, U, bh, opts, (2,))):
        save_model(tmp_path / "m.bfnn", model)
        back = load_model(tmp_path / "m.bfnn")
        assert back.variant == model.variant and back.meta == model.meta
        a, _ = predict_batch(model, Z, L)
        b, _ = predict_batch(back, Z, L)
        np.testing.assert_array_equal(a, b)
        for n1, n2 in zip(model.nets, back.nets):
            np.testing.assert_array_equal(n1.theta, n2.theta)
            np.testing.assert_array_equal(n1.x_std, n2.x_std)


def test_sha256_is_stable(tmp_path):
    p = tmp_path / "x"
    p.write_bytes(b"abc")
    assert sha256_file(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_csv_round_trip_keeps_floats_exact(tmp_path):
    rows = [{"a": 0.1 + 0.2, "b": "x", "c": None}, {"a": 1e-300, "b": "y", "c": 3}]
    write_csv(tmp_path / "t.csv", ["a", "b", "c"], rows)
    back = read_csv(tmp_path / "t.csv")
    assert float(back[0]["a"]) == 0.1 + 0.2 and float(back[1]["a"]) == 1e-300
    assert back[0]["c"] == "" and back[1]["c"] == "3"


def test_history_csv():
    X = np.linspace(0, 1, 20)[:, None]
    net = fit_normalizers(init_net(NetLayout.square(1, 3), 0), X, X[:, 0] ** 2)
    rep = train(net, X, X[:, 0] ** 2, TrainOptions(max_iters=5))
    lines = history_csv(rep).splitlines()
    assert lines[0] == "iteration,train_mse,val_mse"
    assert len(lines) == len(rep.train_mse_history) + 1
