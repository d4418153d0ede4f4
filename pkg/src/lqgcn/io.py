"""File formats, persistence, and run manifests.

Formats (all plain text unless noted, '#' starts a comment line):

* edge list      — one "u<TAB>v" (any whitespace) pair per line, 0-based
                   ids; an optional "N=<n>" line declares the node count,
                   otherwise it is 1 + max id. Duplicates and reversed
                   duplicates merge; self-loops are dropped with a warning.
* attributes     — either sparse coordinate text with a header line
                   "N d NNZ" followed by NNZ lines "i j value", or a dense
                   CSV (auto-detected by the comma in the first data line).
* cover          — one community per line as space-separated node ids;
                   an optional "N=<n>" line declares the node count.
                   Writing emits ascending ids per line.
* affiliations   — TSV, N rows x K columns, full float64 precision.
* train log      — JSON lines, one record per iteration.
* checkpoint     — .npz with keys format_version, w1, w2.
* manifest       — JSON holding the config snapshot, seed, input digests
                   (recorded before training), and output paths; enough
                   to reproduce a run bit-for-bit.

Writes are atomic (temp file + rename). Loaders raise DataError with the
offending file and line; the CLI maps exception types to exit codes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .graph import Graph
from .metrics import Cover
from .model import ModelParams
from .training import TrainConfig, TrainLog

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class UsageError(Exception):
    """Bad invocation (missing flags, contradictory options). Exit code 1."""


class DataError(Exception):
    """Malformed or inconsistent input data. Exit code 2."""


class NumericError(Exception):
    """Training failed numerically. Exit code 3."""


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _data_lines(path):
    """Yield (lineno, stripped line) skipping blanks and comments."""
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def _parse_n_header(line: str):
    if line.startswith("N="):
        try:
            return int(line[2:])
        except ValueError:
            return None
    return None


def parse_edge_list(path) -> Graph:
    """Load an undirected graph from an edge-list file."""
    n_declared = None
    pairs = []
    self_loops = 0
    for lineno, line in _data_lines(path):
        header = _parse_n_header(line)
        if header is not None:
            if n_declared is not None:
                raise DataError(f"{path}:{lineno}: duplicate N= header")
            if header <= 0:
                raise DataError(f"{path}:{lineno}: N must be positive")
            n_declared = header
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
        if u < 0 or v < 0:
            raise DataError(f"{path}:{lineno}: negative node id in {line!r}")
        if u == v:
            self_loops += 1
            continue
        pairs.append((u, v))
    if n_declared is None:
        if not pairs:
            raise DataError(f"{path}: empty edge list without an N= header")
        n = max(max(u, v) for u, v in pairs) + 1
    else:
        n = n_declared
        top = max((max(u, v) for u, v in pairs), default=-1)
        if top >= n:
            raise DataError(f"{path}: node id {top} exceeds declared N={n}")
    if self_loops:
        logger.warning("%s: dropped %d self-loop(s)", path, self_loops)
    return Graph.from_edges(n, pairs)


def write_edge_list(path, graph: Graph) -> None:
    lines = [f"N={graph.n_nodes}"]
    lines.extend(f"{u}\t{v}" for u, v in zip(graph.edges_u, graph.edges_v))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def parse_attributes(path) -> np.ndarray:
    """Load a dense N x d attribute matrix (sparse-coordinate or dense CSV)."""
    rows = list(_data_lines(path))
    if not rows:
        raise DataError(f"{path}: empty attribute file")
    first = rows[0][1]
    if "," in first:
        return _parse_attributes_dense(path, rows)
    return _parse_attributes_sparse(path, rows)


def _parse_attributes_dense(path, rows) -> np.ndarray:
    data = []
    width = None
    for lineno, line in rows:
        try:
            vals = [float(tok) for tok in line.split(",")]
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed CSV row") from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DataError(f"{path}:{lineno}: ragged CSV row")
        data.append(vals)
    arr = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite attribute values")
    return arr


def _parse_attributes_sparse(path, rows) -> np.ndarray:
    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 3:
        raise DataError(f"{path}:{lineno}: expected header 'N d NNZ'")
    try:
        n, d, nnz = (int(p) for p in parts)
    except ValueError:
        raise DataError(f"{path}:{lineno}: non-integer header field") from None
    if n <= 0 or d <= 0 or nnz < 0:
        raise DataError(f"{path}:{lineno}: invalid header dimensions")
    entries = rows[1:]
    if len(entries) != nnz:
        raise DataError(f"{path}: header declares NNZ={nnz} but found {len(entries)} entries")
    arr = np.zeros((n, d), dtype=np.float64)
    for lineno, line in entries:
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 'i j value'")
        try:
            i, j, value = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed entry {line!r}") from None
        if not (0 <= i < n and 0 <= j < d):
            raise DataError(f"{path}:{lineno}: index ({i}, {j}) out of bounds for {n}x{d}")
        if not np.isfinite(value):
            raise DataError(f"{path}:{lineno}: non-finite value")
        arr[i, j] = value
    return arr


def write_attributes(path, x, sparse: bool = True) -> None:
    arr = np.asarray(x, dtype=np.float64)
    if sparse:
        ii, jj = np.nonzero(arr)
        lines = [f"{arr.shape[0]} {arr.shape[1]} {len(ii)}"]
        lines.extend(f"{i} {j} {arr[i, j]:.17g}" for i, j in zip(ii, jj))
    else:
        lines = [",".join(f"{v:.17g}" for v in row) for row in arr]
    _atomic_write_text(path, "\n".join(lines) + "\n")


def parse_cover(path, n_nodes: int | None = None) -> Cover:
    """Load a cover; K = number of community lines."""
    n_declared = None
    comms = []
    max_id = -1
    for lineno, line in _data_lines(path):
        header = _parse_n_header(line)
        if header is not None:
            if n_declared is not None:
                raise DataError(f"{path}:{lineno}: duplicate N= header")
            n_declared = header
            continue
        try:
            ids = [int(tok) for tok in line.split()]
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer node id") from None
        if any(i < 0 for i in ids):
            raise DataError(f"{path}:{lineno}: negative node id")
        if ids:
            max_id = max(max_id, max(ids))
        comms.append(frozenset(ids))
    n = n_nodes if n_nodes is not None else n_declared
    if n is None:
        if max_id < 0:
            raise DataError(f"{path}: cannot infer node count from an empty cover")
        n = max_id + 1
    if max_id >= n:
        raise DataError(f"{path}: node id {max_id} out of range for N={n}")
    return Cover(n_nodes=n, communities=comms)


def write_cover(path, cover: Cover) -> None:
    lines = [f"N={cover.n_nodes}"]
    lines.extend(" ".join(str(i) for i in sorted(c)) for c in cover.communities)
    _atomic_write_text(path, "\n".join(lines) + "\n")


def parse_affiliations(path) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in _data_lines(path):
        try:
            vals = [float(tok) for tok in line.split("\t")]
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed affiliation row") from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DataError(f"{path}:{lineno}: ragged affiliation row")
        rows.append(vals)
    if not rows:
        raise DataError(f"{path}: empty affiliation file")
    return np.asarray(rows, dtype=np.float64)


def write_affiliations(path, f) -> None:
    arr = np.asarray(f, dtype=np.float64)
    lines = ["\t".join(f"{v:.17g}" for v in row) for row in arr]
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_train_log(path, log: TrainLog) -> None:
    lines = [json.dumps(rec, sort_keys=True) for rec in log.to_dicts()]
    if log.diverged:
        lines.append(json.dumps({"event": "diverged"}))
    _atomic_write_text(path, "\n".join(lines) + "\n" if lines else "")


def read_train_log(path):
    """Records (as dicts) and the diverged flag."""
    records = []
    diverged = False
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("event") == "diverged":
                diverged = True
            else:
                records.append(obj)
    return records, diverged


def save_checkpoint(path, params: ModelParams) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp.npz")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, format_version=np.int64(FORMAT_VERSION), w1=params.w1, w2=params.w2)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> ModelParams:
    with np.load(path) as data:
        if "format_version" not in data or int(data["format_version"]) != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint format")
        return ModelParams(w1=np.asarray(data["w1"]), w2=np.asarray(data["w2"]))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, *, config: TrainConfig, inputs: dict, outputs: dict, version: str) -> None:
    payload = {
        "version": version,
        "seed": config.seed,
        "config": asdict(config),
        "inputs": inputs,
        "outputs": outputs,
    }
    _atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def parse_metrics(text: str) -> dict:
    """Parse key=value tokens (the eval/sweep output format) into floats."""
    out = {}
    for token in text.split():
        if "=" not in token:
            continue
        key, _, value = token.partition("=")
        try:
            out[key] = float(value)
        except ValueError:
            continue
    return out


@dataclass(frozen=True)
class DatasetShape:
    """Expected sizes for a known public benchmark network."""

    n_nodes: int
    n_edges: int
    k: int
    n_attrs: int


DATASET_SHAPES = {
    "facebook_348": DatasetShape(n_nodes=227, n_edges=6384, k=14, n_attrs=21),
    "facebook_686": DatasetShape(n_nodes=170, n_edges=3312, k=14, n_attrs=9),
    "facebook_1684": DatasetShape(n_nodes=792, n_edges=28048, k=17, n_attrs=15),
    "engineering": DatasetShape(n_nodes=14927, n_edges=98610, k=16, n_attrs=4839),
    "computer_science": DatasetShape(n_nodes=21597, n_edges=193500, k=18, n_attrs=7793),
    "chemistry": DatasetShape(n_nodes=35409, n_edges=314716, k=14, n_attrs=4877),
}


def check_dataset_shape(
    expected: DatasetShape,
    graph: Graph | None = None,
    attrs: np.ndarray | None = None,
    truth: Cover | None = None,
) -> list:
    """Compare loaded data against published sizes; returns mismatch messages.

    Published edge counts are taken as undirected; on a mismatch both the
    undirected and directed counts of the loaded graph are reported so a
    factor-of-two convention difference is visible at a glance.
    """
    problems = []
    if graph is not None:
        if graph.n_nodes != expected.n_nodes:
            problems.append(f"n_nodes: expected {expected.n_nodes}, got {graph.n_nodes}")
        if graph.n_edges != expected.n_edges:
            problems.append(
                f"n_edges: expected {expected.n_edges} undirected, got "
                f"{graph.n_edges} undirected ({2 * graph.n_edges} directed)"
            )
    if attrs is not None and attrs.shape[1] != expected.n_attrs:
        problems.append(f"n_attrs: expected {expected.n_attrs}, got {attrs.shape[1]}")
    if truth is not None and truth.k != expected.k:
        problems.append(f"k: expected {expected.k}, got {truth.k}")
    return problems
