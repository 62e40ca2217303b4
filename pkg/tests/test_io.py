import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from signcoded.io import (
    HEADER, FormatError, atomic_write, import_graymaps, parse_stack, read_bundle, read_pgm, read_stack,
    stack_bytes, write_bundle, write_pgm, write_stack,
)


@given(st.integers(1, 4), st.integers(1, 6), st.integers(1, 6), st.integers(0, 10**6))
def test_stack_round_trip(t, h, w, seed):
    a = np.random.default_rng(seed).standard_normal((t, h, w)).astype(np.float32)
    assert np.array_equal(parse_stack(stack_bytes(a)), a)


def test_header_layout():
    buf = stack_bytes(np.arange(6, dtype=np.float32).reshape(1, 2, 3))
    assert buf[:4] == b"FSTK"
    assert struct.unpack("<HIIIH", buf[4:HEADER.size]) == (1, 1, 2, 3, 1)
    assert len(buf) == HEADER.size + 24
    assert np.frombuffer(buf[HEADER.size:], "<f4").tolist() == list(range(6))


def test_2d_promoted(tmp_path):
    write_stack(tmp_path / "a.fstk", np.ones((3, 4)))
    assert read_stack(tmp_path / "a.fstk").shape == (1, 3, 4)


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + struct.pack("<H", 2) + b[6:],
    lambda b: b[:HEADER.size - 2] + struct.pack("<H", 7) + b[HEADER.size:],
    lambda b: b[:-1],
    lambda b: b + b"\0\0\0\0",
    lambda b: b[:10],
    lambda b: b[:HEADER.size] + np.array([np.nan] * 4, "<f4").tobytes(),
])
def test_parse_rejects(mutate):
    good = stack_bytes(np.zeros((1, 2, 2)))
    with pytest.raises(FormatError):
        parse_stack(mutate(good))


def test_write_rejects_nonfinite(tmp_path):
    with pytest.raises(FormatError):
        write_stack(tmp_path / "x.fstk", np.array([[[np.inf]]]))
    with pytest.raises(FormatError):
        stack_bytes(np.zeros((1, 1, 1, 1)))
    assert list(tmp_path.iterdir()) == []


def test_atomic_write_cleans_up(tmp_path, monkeypatch):
    target = tmp_path / "out.bin"
    target.write_bytes(b"old")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr("signcoded.io.os.replace", boom)
    with pytest.raises(OSError):
        atomic_write(target, b"new")
    assert target.read_bytes() == b"old"
    assert [p.name for p in tmp_path.iterdir()] == ["out.bin"]


@pytest.mark.parametrize("bits", [8, 16])
def test_pgm_round_trip(tmp_path, bits):
    img = np.random.default_rng(0).random((7, 9))
    write_pgm(tmp_path / "a.pgm", img, bits)
    back = read_pgm(tmp_path / "a.pgm")
    assert back.shape == (7, 9)
    assert np.abs(back - img).max() <= 0.5 / ((1 << bits) - 1) + 1e-12


def test_pgm_odd_maxval(tmp_path):
    p = tmp_path / "m.pgm"
    p.write_bytes(b"P5\n# comment\n2 1\n1023\n" + np.array([0, 1023], ">u2").tobytes())
    assert read_pgm(p).tolist() == [[0.0, 1.0]]
    q = tmp_path / "n.pgm"
    q.write_bytes(b"P5\n2 1\n100\n" + bytes([0, 50]))
    assert read_pgm(q)[0, 1] == pytest.approx(0.5, abs=1 / 255)


def test_read_pgm_rejects_other_formats(tmp_path):
    Image.new("L", (4, 4)).save(tmp_path / "a.png")
    with pytest.raises(FormatError):
        read_pgm(tmp_path / "a.png")


def test_import_graymaps(tmp_path):
    frames = np.random.default_rng(1).random((3, 5, 6))
    for i, f in enumerate(frames):
        write_pgm(tmp_path / f"f{i:02d}.pgm", f)
    stack = import_graymaps(tmp_path)
    assert stack.shape == (3, 5, 6)
    assert np.abs(stack - frames).max() < 1 / 255
    write_pgm(tmp_path / "f99.pgm", np.zeros((2, 2)))
    with pytest.raises(FormatError):
        import_graymaps(tmp_path)
    with pytest.raises(FormatError):
        import_graymaps(tmp_path / "none")


def test_bundle_round_trip(tmp_path):
    imgs = {"pos": np.full((4, 5), 0.25), "neg": np.full((4, 5), 0.5), "stack": np.zeros((3, 4, 5))}
    write_bundle(tmp_path / "cap", imgs, {"design": 1})
    back, meta = read_bundle(tmp_path / "cap")
    assert meta == {"design": 1}
    assert set(back) == set(imgs)
    for k in imgs:
        assert np.array_equal(back[k], imgs[k])


def test_bundle_mismatch(tmp_path):
    write_bundle(tmp_path / "cap", {"a": np.zeros((2, 2))}, {})
    write_stack(tmp_path / "cap.fstk", np.zeros((2, 2, 2)))
    with pytest.raises(FormatError):
        read_bundle(tmp_path / "cap")
