"""Portable binary matrix containers and CSV helpers.

Container layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"BFNN"
    4       4     u32 format version (1)
    8       4     u32 role: 1 snapshot, 2 basis, 3 dataset, 4 model-part
    12      8     u64 rows
    20      8     u64 columns
    28      8*rows*cols  float64 values, column-major
    ...     8     u64 metadata length L
    ...     L     UTF-8 JSON metadata

Containers are self-delimiting, so a file may hold several back to back
(a dataset split, a basis, or a whole model).
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .net import NetLayout, ShallowNet
from .pod import PodBasis

MAGIC = b"BFNN"
VERSION = 1
ROLES = {"snapshot": 1, "basis": 2, "dataset": 3, "model-part": 4}
ROLE_NAMES = {v: k for k, v in ROLES.items()}
_HEADER = struct.Struct("<4sIIQQ")
_LEN = struct.Struct("<Q")


class FormatError(ValueError):
    pass


@dataclass
class Container:
    role: str
    data: np.ndarray
    meta: dict = field(default_factory=dict)


def encode(c: Container) -> bytes:
    if c.role not in ROLES:
        raise FormatError(f"unknown role {c.role!r}")
    data = np.asarray(c.data, dtype="<f8")
    if data.ndim != 2:
        raise FormatError("container payload must be a matrix")
    meta = json.dumps(c.meta, sort_keys=True).encode("utf-8")
    rows, cols = data.shape
    return b"".join([_HEADER.pack(MAGIC, VERSION, ROLES[c.role], rows, cols),
                     data.tobytes(order="F"), _LEN.pack(len(meta)), meta])


def decode_stream(buf: bytes) -> list[Container]:
    out, pos = [], 0
    while pos < len(buf):
        if len(buf) - pos < _HEADER.size:
            raise FormatError(f"truncated header at byte {pos}")
        magic, version, role, rows, cols = _HEADER.unpack_from(buf, pos)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r} at byte {pos}")
        if version != VERSION:
            raise FormatError(f"unsupported format version {version}")
        if role not in ROLE_NAMES:
            raise FormatError(f"unknown role code {role}")
        pos += _HEADER.size
        nbytes = 8 * rows * cols
        if len(buf) - pos < nbytes + _LEN.size:
            raise FormatError("payload shorter than declared size")
        data = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=pos)
        data = data.reshape((rows, cols), order="F").astype(float)
        pos += nbytes
        (mlen,) = _LEN.unpack_from(buf, pos)
        pos += _LEN.size
        if len(buf) - pos < mlen:
            raise FormatError("metadata shorter than declared length")
        try:
            meta = json.loads(buf[pos:pos + mlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"unreadable metadata: {exc}") from exc
        pos += mlen
        out.append(Container(ROLE_NAMES[role], data, meta))
    return out


def write_containers(path, containers) -> None:
    Path(path).write_bytes(b"".join(encode(c) for c in containers))


def read_containers(path) -> list[Container]:
    path = Path(path)
    try:
        return decode_stream(path.read_bytes())
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- domain objects <-> containers -------------------------------------------

def basis_to_containers(basis: PodBasis, name: str = "basis") -> list[Container]:
    meta = {"name": name, "r": basis.r, "fidelity": basis.fidelity, "grid_id": basis.grid_id}
    return [Container("basis", basis.modes, {**meta, "kind": "modes"}),
            Container("basis", basis.singular_values[:, None], {**meta, "kind": "singular_values"})]


def basis_from_containers(cs: list[Container], name: str = "basis") -> PodBasis:
    parts = {c.meta["kind"]: c for c in cs if c.role == "basis" and c.meta.get("name") == name}
    if set(parts) != {"modes", "singular_values"}:
        raise FormatError(f"basis {name!r} incomplete: found {sorted(parts)}")
    m = parts["modes"].meta
    return PodBasis(parts["modes"].data, parts["singular_values"].data[:, 0], int(m["r"]),
                    m["fidelity"], m["grid_id"])


def save_basis(path, basis: PodBasis) -> None:
    write_containers(path, basis_to_containers(basis))


def load_basis(path, r: int | None = None) -> PodBasis:
    b = basis_from_containers(read_containers(path))
    return b if r is None else b.truncate(r)


def net_to_container(net: ShallowNet, index: int) -> Container:
    L = net.layout
    data = np.concatenate([net.theta, net.x_mean, net.x_std, net.y_mean, net.y_std])[:, None]
    return Container("model-part", data, {"part": "net", "index": index, "format_version": VERSION,
                                          "layout": [L.n_in, L.H1, L.H2, L.n_out]})


def net_from_container(c: Container) -> ShallowNet:
    L = NetLayout(*c.meta["layout"])
    v = c.data[:, 0]
    sizes = [L.n_params, L.n_in, L.n_in, L.n_out, L.n_out]
    if v.size != sum(sizes):
        raise FormatError(f"net payload has {v.size} values, layout needs {sum(sizes)}")
    parts = np.split(v, np.cumsum(sizes)[:-1])
    return ShallowNet(L, *[p.copy() for p in parts])


def save_model(path, model) -> None:
    header = Container("model-part", np.zeros((0, 0)),
                       {"part": "model", "variant": model.variant, "n_nets": len(model.nets),
                        "meta": model.meta, "format_version": VERSION})
    cs = [header, *basis_to_containers(model.basis_high, "basis_high")]
    if model.basis_low is not None:
        cs += basis_to_containers(model.basis_low, "basis_low")
    cs += [net_to_container(n, i) for i, n in enumerate(model.nets)]
    write_containers(path, cs)


def load_model(path):
    from .pipelines import RomModel

    cs = read_containers(path)
    heads = [c for c in cs if c.role == "model-part" and c.meta.get("part") == "model"]
    if len(heads) != 1:
        raise FormatError(f"{path}: expected one model header, found {len(heads)}")
    head = heads[0].meta
    nets = sorted((c for c in cs if c.meta.get("part") == "net"), key=lambda c: c.meta["index"])
    if len(nets) != head["n_nets"]:
        raise FormatError(f"{path}: {len(nets)} nets stored, header declares {head['n_nets']}")
    has_low = any(c.meta.get("name") == "basis_low" for c in cs)
    return RomModel(head["variant"], basis_from_containers(cs, "basis_high"),
                    [net_from_container(c) for c in nets],
                    basis_from_containers(cs, "basis_low") if has_low else None, head["meta"])


def save_split(path, Z, U_high, U_low=None, meta=None) -> None:
    """A dataset split: parameters (d x n, one sample per column) and snapshots."""
    meta = meta or {}
    cs = [Container("dataset", np.atleast_2d(np.asarray(Z, dtype=float)).T, {**meta, "kind": "params"}),
          Container("snapshot", U_high, {**meta, "kind": "high", "fidelity": "high"})]
    if U_low is not None:
        cs.append(Container("snapshot", U_low, {**meta, "kind": "low", "fidelity": "low"}))
    write_containers(path, cs)


def load_split(path) -> dict:
    """Returns ``{"Z": (n, d), "high": (N_h, n), "low": (N_l, n) | None, "meta": {...}}``."""
    cs = {c.meta.get("kind"): c for c in read_containers(path)}
    if "params" not in cs or "high" not in cs:
        raise FormatError(f"{path}: dataset split needs params and high-fidelity snapshots")
    low = cs.get("low")
    return {"Z": cs["params"].data.T.copy(), "high": cs["high"].data, "low": None if low is None else low.data,
            "meta": cs["params"].meta}


# --- CSV ---------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def write_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fieldnames)
        for row in rows:
            w.writerow([_fmt(row.get(k)) for k in fieldnames])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def history_csv(report) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "train_mse", "val_mse"])
    for i, (t, v) in enumerate(zip(report.train_mse_history, report.val_mse_history)):
        w.writerow([i, repr(float(t)), repr(float(v))])
    return buf.getvalue()
