"""File formats: CSV tables, KMAT binary matrices, MNIST-style images, model archives.

Model archive layout (all integers and floats little-endian)::

    b"KAHM" u8 version=1
    u32 class_count  u32 client_count  u32 dim  u32 n_cells
    u64 seed  u32 max_part_size
    n_cells x (u32 c, u32 q, u32 part_count, u64 offset, u64 length)
    payload
    u64 checksum   (first 8 bytes of BLAKE2b over the payload)

Each cell payload is ``u64 cluster_seed``, the assignment matrix, then per
part the matrices samples, projection, covariance, cholesky, encoded, coef
and a 1x5 scalar row [jitter, lambda_star, e_hat, spectral, frobenius].  A
matrix is ``u32 rows, u32 cols`` followed by row-major float64.
"""
from __future__ import annotations

import gzip
import hashlib
import io
import struct
from pathlib import Path

import numpy as np

from .core import Encoder, KahmModel, KernelParams
from .errors import FormatError
from .federation import GlobalModel, LabeledDataset
from .partitioned import PartitionedKahm

MAGIC = b"KAHM"
VERSION = 1
KMAT_MAGIC = b"KMAT"


def _checksum(payload: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def _write_matrix(buf: io.BytesIO, A: np.ndarray) -> None:
    A = np.atleast_2d(np.asarray(A, dtype="<f8"))
    buf.write(struct.pack("<II", *A.shape))
    buf.write(np.ascontiguousarray(A).tobytes())


def _read_matrix(view: memoryview, pos: int) -> tuple[np.ndarray, int]:
    rows, cols = struct.unpack_from("<II", view, pos)
    pos += 8
    nbytes = rows * cols * 8
    if pos + nbytes > len(view):
        raise FormatError("truncated matrix in archive")
    A = np.frombuffer(view[pos : pos + nbytes], dtype="<f8").reshape(rows, cols).astype(np.float64)
    return A, pos + nbytes


def _write_part(buf: io.BytesIO, m: KahmModel) -> None:
    n, p = m.subspace_dim, m.dim
    kernel = m.kernel
    cov = kernel.covariance if kernel else np.zeros((0, 0))
    chol = kernel.cholesky if kernel else np.zeros((0, 0))
    jitter = kernel.jitter if kernel else 0.0
    for A in (m.samples, m.encoder.projection.reshape(n, p), cov, chol, m.encoded.reshape(m.n_samples, n), m.coef):
        _write_matrix(buf, A)
    _write_matrix(buf, [[jitter, m.lambda_star, m.e_hat, m.spectral_norm, m.frobenius_norm]])


def _read_part(view: memoryview, pos: int) -> tuple[KahmModel, int]:
    mats = []
    for _ in range(7):
        A, pos = _read_matrix(view, pos)
        mats.append(A)
    samples, projection, cov, chol, encoded, coef, scalars = mats
    jitter, lam, e_hat, spectral, frob = scalars[0]
    N, p = samples.shape
    projection = projection.reshape(-1, p)
    kernel = KernelParams(cov, chol, float(jitter)) if projection.shape[0] else None
    model = KahmModel(
        samples=samples,
        encoder=Encoder(projection),
        kernel=kernel,
        lambda_star=float(lam),
        e_hat=float(e_hat),
        coef=coef,
        encoded=encoded.reshape(N, projection.shape[0]),
        spectral_norm=float(spectral),
        frobenius_norm=float(frob),
    )
    return model, pos


def dumps_model(gm: GlobalModel) -> bytes:
    payload = io.BytesIO()
    directory = []
    for key in gm.cell_keys:
        cell = gm.cells[key]
        start = payload.tell()
        payload.write(struct.pack("<Q", cell.cluster_seed & 0xFFFFFFFFFFFFFFFF))
        _write_matrix(payload, cell.assignment.astype(np.float64)[None, :])
        for part in cell.parts:
            _write_part(payload, part)
        directory.append((*key, cell.n_parts, start, payload.tell() - start))
    body = payload.getvalue()
    head = io.BytesIO()
    head.write(MAGIC + bytes([VERSION]))
    head.write(struct.pack("<IIII", gm.class_count, gm.client_count, gm.dim, len(directory)))
    head.write(struct.pack("<QI", gm.seed & 0xFFFFFFFFFFFFFFFF, gm.max_part_size))
    for entry in directory:
        head.write(struct.pack("<IIIQQ", *entry))
    return head.getvalue() + body + struct.pack("<Q", _checksum(body))


def loads_model(blob: bytes) -> GlobalModel:
    view = memoryview(blob)
    if len(blob) < 5 + 16 + 12 + 8 or bytes(view[:4]) != MAGIC:
        raise FormatError("not a KAHM model archive")
    if view[4] != VERSION:
        raise FormatError(f"unsupported archive version {view[4]}")
    C, Q, p, n_cells = struct.unpack_from("<IIII", view, 5)
    seed, max_part = struct.unpack_from("<QI", view, 21)
    pos = 33
    entry_size = struct.calcsize("<IIIQQ")
    directory = [struct.unpack_from("<IIIQQ", view, pos + i * entry_size) for i in range(n_cells)]
    base = pos + n_cells * entry_size
    body = bytes(view[base:-8])
    (stored,) = struct.unpack_from("<Q", view, len(blob) - 8)
    if stored != _checksum(body):
        raise FormatError("archive checksum mismatch")
    bview = memoryview(body)
    cells = {}
    for c, q, n_parts, offset, length in directory:
        at = offset
        (cseed,) = struct.unpack_from("<Q", bview, at)
        assignment, at = _read_matrix(bview, at + 8)
        parts = []
        for _ in range(n_parts):
            part, at = _read_part(bview, at)
            parts.append(part)
        if at != offset + length:
            raise FormatError(f"cell ({c}, {q}) length mismatch")
        cells[(c, q)] = PartitionedKahm(tuple(parts), assignment[0].astype(np.int64), int(cseed))
    return GlobalModel(cells, C, Q, p, int(seed), int(max_part))


def save_model(gm: GlobalModel, path) -> bytes:
    blob = dumps_model(gm)
    Path(path).write_bytes(blob)
    return blob


def load_model(path) -> GlobalModel:
    return loads_model(Path(path).read_bytes())


def archive_checksum(blob: bytes) -> int:
    return struct.unpack_from("<Q", blob, len(blob) - 8)[0]


# --- feature tables -------------------------------------------------------


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_table(path) -> tuple[np.ndarray, list[str] | None]:
    """Numeric matrix of a CSV (or KMAT) file and its header names, if any."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == KMAT_MAGIC:
        return read_kmat(path), None
    text = path.read_text().splitlines()
    lines = [(i + 1, ln) for i, ln in enumerate(text) if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = None
    first = lines[0][1].split(",")
    if not _is_number(first[0].strip()):
        header = [t.strip() for t in first]
        lines = lines[1:]
    rows = []
    width = None
    for lineno, line in lines:
        tokens = line.split(",")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} columns, got {len(tokens)}")
        try:
            values = [float(t) for t in tokens]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        if not all(np.isfinite(values)):
            raise FormatError(f"{path}:{lineno}: NaN or Inf value")
        rows.append(values)
    if header is not None and len(header) != width:
        raise FormatError(f"{path}: header has {len(header)} names for {width} columns")
    return np.array(rows, dtype=np.float64).reshape(len(rows), width or 0), header


def _as_int_column(values: np.ndarray, what: str, path) -> np.ndarray:
    ints = np.rint(values).astype(np.int64)
    if not np.array_equal(ints, values):
        raise FormatError(f"{path}: non-integer {what}")
    bad = np.flatnonzero(ints < 1)
    if bad.size:
        raise FormatError(f"{path}: row {bad[0] + 1}: {what} out of range (must be >= 1)")
    return ints


def split_columns(M: np.ndarray, header: list[str] | None, path="<data>"):
    """Features, labels and clients (or None) of a table.

    With a header the ``label`` and ``client`` columns are found by name;
    without one the last column is the label and there is no client column.
    """
    if header is not None and "label" in header:
        label_col = header.index("label")
        client_col = header.index("client") if "client" in header else None
    else:
        label_col, client_col = M.shape[1] - 1, None
    feature_cols = [j for j in range(M.shape[1]) if j not in (label_col, client_col)]
    if not feature_cols:
        raise FormatError(f"{path}: no feature columns")
    labels = _as_int_column(M[:, label_col], "label", path)
    clients = None if client_col is None else _as_int_column(M[:, client_col], "client", path)
    return M[:, feature_cols], labels, clients


def load_dataset(path, class_count: int | None = None) -> LabeledDataset:
    M, header = read_table(path)
    X, labels, clients = split_columns(M, header, path)
    return LabeledDataset(X, labels, clients, class_count=class_count)


def write_table(path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n]) for n in names])
    ints = [np.issubdtype(np.asarray(columns[n]).dtype, np.integer) for n in names]
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(str(int(v)) if isint else repr(float(v)) for v, isint in zip(row, ints)) + "\n")


def write_dataset(path, data: LabeledDataset, with_clients: bool = True) -> None:
    cols = {f"x{j + 1}": data.samples[:, j] for j in range(data.dim)}
    cols["label"] = data.labels
    if with_clients:
        cols["client"] = data.clients
    write_table(path, cols)


def write_kmat(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(KMAT_MAGIC + struct.pack("<II", *M.shape) + bytes(4))
        fh.write(np.ascontiguousarray(M).tobytes())


def read_kmat(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != KMAT_MAGIC or len(raw) < 16:
        raise FormatError(f"{path}: not a KMAT file")
    rows, cols = struct.unpack_from("<II", raw, 4)
    if len(raw) != 16 + rows * cols * 8:
        raise FormatError(f"{path}: payload size does not match {rows}x{cols}")
    M = np.frombuffer(raw, dtype="<f8", offset=16).reshape(rows, cols).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(M).all(axis=1))
    if bad.size:
        raise FormatError(f"{path}: row {bad[0] + 1}: NaN or Inf value")
    return M


# --- image datasets -------------------------------------------------------


def read_idx(path) -> np.ndarray:
    """Array stored in the IDX format used by the MNIST distributions (optionally gzipped)."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    zero, dtype_code, ndim = struct.unpack_from(">HBB", raw, 0)
    if zero != 0 or dtype_code != 0x08:
        raise FormatError(f"{path}: unsupported IDX header")
    shape = struct.unpack_from(f">{ndim}I", raw, 4)
    return np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim).reshape(shape)


def load_image_dataset(source) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(x_train, y_train, x_test, y_test)`` from an ``.npz`` or an IDX directory.

    Labels are returned as stored (0-based for the MNIST family).
    """
    source = Path(source)
    if source.is_file():
        with np.load(source) as z:
            return z["x_train"], z["y_train"], z["x_test"], z["y_test"]

    def find(stem: str) -> Path:
        for name in (stem, stem + ".gz"):
            if (source / name).exists():
                return source / name
        raise FormatError(f"{source}: missing {stem}")

    return (
        read_idx(find("train-images-idx3-ubyte")),
        read_idx(find("train-labels-idx1-ubyte")),
        read_idx(find("t10k-images-idx3-ubyte")),
        read_idx(find("t10k-labels-idx1-ubyte")),
    )
