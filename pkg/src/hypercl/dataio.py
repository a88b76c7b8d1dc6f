"""File formats: datasets, run configs, splits, embeddings and run summaries."""

import csv
import dataclasses
import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from .augment import AugmentConfig
from .errors import ConfigurationError, DatasetFormatError, HyperclError
from .evalkit import ProbeConfig
from .hgraph import Hypergraph, LabeledDataset, Split
from .loss import LossConfig
from .trainer import TrainConfig

SCHEMA_VERSION = 1
EMB_MAGIC = b"HCEB"
EMB_VERSION = 1
_EMB_HEADER = struct.Struct("<4sBQQ")  # magic, version, rows, cols


# ------------------------------------------------------------ datasets


def _read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DatasetFormatError(f"cannot read {path}: {e.strerror}") from None
    except UnicodeDecodeError as e:
        raise DatasetFormatError(f"not UTF-8 text (byte {e.start})", where=str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetFormatError(e.msg, where=f"{path}:{e.lineno}:{e.colno}") from None


def _int(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise DatasetFormatError(f"expected an integer, got {v!r}", where=where)
    return int(v)


def dataset_from_dict(obj, source="<dict>"):
    """Validate a parsed dataset record and build a LabeledDataset."""
    if not isinstance(obj, dict):
        raise DatasetFormatError("top level must be an object", where=source)
    need = ("num_nodes", "hyperedges", "features", "labels")
    for key in need:
        if key not in obj:
            raise DatasetFormatError("missing field", where=key)
    extra = set(obj) - set(need) - {"schema_version", "class_names", "num_classes", "name"}
    if extra:
        raise DatasetFormatError(f"unknown fields {sorted(extra)}", where=source)
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise DatasetFormatError(f"unsupported version {version!r}", where="schema_version")
    n = _int(obj["num_nodes"], "num_nodes")
    if n < 0:
        raise DatasetFormatError("must be non-negative", where="num_nodes")
    edges = obj["hyperedges"]
    if not isinstance(edges, list):
        raise DatasetFormatError("expected a list", where="hyperedges")
    members = []
    for j, e in enumerate(edges):
        if not isinstance(e, list):
            raise DatasetFormatError("expected a list of node indices", where=f"hyperedges[{j}]")
        row = []
        for t, i in enumerate(e):
            i = _int(i, f"hyperedges[{j}][{t}]")
            if not 0 <= i < n:
                raise DatasetFormatError(f"node index {i} outside [0, {n})",
                                         where=f"hyperedges[{j}][{t}]")
            row.append(i)
        if len(set(row)) != len(row):
            raise DatasetFormatError("repeated node", where=f"hyperedges[{j}]")
        members.append(row)
    feats = obj["features"]
    if not isinstance(feats, list) or len(feats) != n:
        raise DatasetFormatError(f"expected {n} rows", where="features")
    width = len(feats[0]) if n else 0
    for r, row in enumerate(feats):
        if not isinstance(row, list) or len(row) != width:
            raise DatasetFormatError(f"expected a row of {width} numbers", where=f"features[{r}]")
    try:
        x = np.array(feats, dtype=np.float64).reshape(n, width)
    except (TypeError, ValueError):
        raise DatasetFormatError("non-numeric entry", where="features") from None
    labels = obj["labels"]
    if not isinstance(labels, list) or len(labels) != n:
        raise DatasetFormatError(f"expected {n} labels", where="labels")
    y = np.array([_int(v, f"labels[{r}]") for r, v in enumerate(labels)], np.int64)
    names = obj.get("class_names")
    num_classes = obj.get("num_classes")
    if num_classes is None:
        num_classes = len(names) if names else (int(y.max()) + 1 if n else 0)
    num_classes = _int(num_classes, "num_classes")
    bad = np.flatnonzero((y < 0) | (y >= num_classes))
    if bad.size:
        raise DatasetFormatError(f"label {y[bad[0]]} outside [0, {num_classes})",
                                 where=f"labels[{bad[0]}]")
    if names is not None and (not isinstance(names, list) or len(names) != num_classes):
        raise DatasetFormatError(f"expected {num_classes} names", where="class_names")
    h = Hypergraph.from_hyperedges(members, num_nodes=n)
    return LabeledDataset(h, x, y, num_classes, names, str(obj.get("name", "")))


def dataset_to_dict(d):
    x = d.features
    feats = x.astype(int).tolist() if np.array_equal(x, np.round(x)) else x.tolist()
    out = {
        "schema_version": SCHEMA_VERSION,
        "name": d.name,
        "num_nodes": d.num_nodes,
        "num_classes": d.num_classes,
        "hyperedges": d.hypergraph.hyperedge_list(),
        "features": feats,
        "labels": d.labels.tolist(),
    }
    if d.class_names is not None:
        out["class_names"] = list(d.class_names)
    return out


def load_dataset(path):
    """Read a dataset JSON file. Isolated nodes are kept."""
    return dataset_from_dict(_read_json(path), source=str(path))


def save_dataset(d, path):
    Path(path).write_text(json.dumps(dataset_to_dict(d), separators=(",", ":")) + "\n")


def load_hyperedge_text(path, num_nodes=None):
    """Structure-only format: one hyperedge per line, whitespace- or
    comma-separated node indices. Blank lines and ``#`` comments are skipped."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                row = [int(t) for t in line.replace(",", " ").split()]
            except ValueError:
                raise DatasetFormatError("non-integer node index", where=f"{path}:{lineno}") from None
            if min(row) < 0 or (num_nodes is not None and max(row) >= num_nodes):
                raise DatasetFormatError("node index out of range", where=f"{path}:{lineno}")
            if len(set(row)) != len(row):
                raise DatasetFormatError("repeated node", where=f"{path}:{lineno}")
            edges.append(row)
    return Hypergraph.from_hyperedges(edges, num_nodes=num_nodes)


def hypergraph_from_table(columns, label=None):
    """One hyperedge per (column, value) pair of a categorical table.

    ``columns`` is a list of equal-length value sequences. Hyperedges are
    ordered by column, then by sorted value.
    """
    edges = []
    for col in list(columns) + ([label] if label is not None else []):
        col = np.asarray(col)
        for v in np.unique(col):
            edges.append(np.flatnonzero(col == v).tolist())
    n = len(np.asarray(columns[0])) if len(columns) else 0
    return Hypergraph.from_hyperedges(edges, num_nodes=n)


def load_orange_tab(path):
    """Read a categorical ``.tab`` table (three header lines) as a dataset.

    Every attribute column becomes a feature; the class column supplies the
    labels. Hyperedges group nodes that share a value in any attribute or
    the class column.
    """
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3:
        raise DatasetFormatError("missing header lines", where=str(path))
    names = lines[0].split("\t")
    flags = lines[2].split("\t")
    rows = [ln.split("\t") for ln in lines[3:] if ln.strip()]
    for r, row in enumerate(rows):
        if len(row) != len(names):
            raise DatasetFormatError(f"expected {len(names)} fields", where=f"{path}:{r + 4}")
    cls = [c for c, f in enumerate(flags) if f.strip() == "class"]
    meta = {c for c, f in enumerate(flags) if f.strip() == "meta"}
    if len(cls) != 1:
        raise DatasetFormatError("need exactly one class column", where=str(path))
    attrs = [c for c in range(len(names)) if c not in meta and c != cls[0]]
    cols = [[row[c] for row in rows] for c in attrs]
    feats = np.array([[float(v) for v in col] for col in cols]).T
    class_names = sorted({row[cls[0]] for row in rows})
    y = np.array([class_names.index(row[cls[0]]) for row in rows])
    h = hypergraph_from_table(cols, label=[row[cls[0]] for row in rows])
    return LabeledDataset(h, feats, y, len(class_names), class_names, Path(path).stem)


def dataset_stats(d):
    h = d.hypergraph
    size = np.bincount(h.edges, minlength=h.num_hyperedges)
    deg = np.bincount(h.nodes, minlength=h.num_nodes)
    return {
        "nodes": h.num_nodes,
        "hyperedges": h.num_hyperedges,
        "memberships": h.num_memberships,
        "avg_hyperedge_size": float(size.mean()) if size.size else 0.0,
        "max_hyperedge_size": int(size.max()) if size.size else 0,
        "avg_node_degree": float(deg.mean()) if deg.size else 0.0,
        "max_node_degree": int(deg.max()) if deg.size else 0,
        "features": int(d.features.shape[1]),
        "classes": int(d.num_classes),
    }


# ------------------------------------------------------------ embeddings


def save_embeddings(matrix, path, format="binary"):
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError(f"embeddings must be 2-d, got shape {m.shape}")
    path = Path(path)
    try:
        if format == "binary":
            with open(path, "wb") as fh:
                fh.write(_EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, *m.shape))
                fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())
        elif format == "csv":
            with open(path, "w", newline="") as fh:
                fh.write(f"# rows={m.shape[0]},cols={m.shape[1]}\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([f"d{j}" for j in range(m.shape[1])])
                for row in m:
                    w.writerow([repr(float(v)) for v in row])
        else:
            raise ConfigurationError(f"unknown embedding format {format!r}")
    except OSError as e:
        raise OSError(e.errno, f"cannot write embeddings: {e.strerror}", str(path)) from None


def load_embeddings(path, format=None):
    """Read embeddings written by :func:`save_embeddings` (format sniffed)."""
    path = Path(path)
    raw = path.read_bytes()
    if format is None:
        format = "binary" if raw[:4] == EMB_MAGIC else "csv"
    if format == "binary":
        if len(raw) < _EMB_HEADER.size:
            raise DatasetFormatError("truncated header", where=str(path))
        magic, version, rows, cols = _EMB_HEADER.unpack_from(raw)
        if magic != EMB_MAGIC or version != EMB_VERSION:
            raise DatasetFormatError("not an embedding file", where=str(path))
        body = raw[_EMB_HEADER.size:]
        if len(body) != rows * cols * 4:
            raise DatasetFormatError(f"expected {rows * cols * 4} payload bytes, got {len(body)}",
                                     where=str(path))
        return np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float32)
    text = raw.decode()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# rows="):
        raise DatasetFormatError("missing '# rows=' header", where=f"{path}:1")
    rows = list(csv.reader(io.StringIO("\n".join(lines[2:]))))
    try:
        return np.array([[float(v) for v in r] for r in rows], np.float64)
    except ValueError:
        raise DatasetFormatError("non-numeric entry", where=str(path)) from None


# ------------------------------------------------------------ configs


_SECTIONS = {"augment": AugmentConfig, "loss": LossConfig}


def _field_names(cls):
    return [f.name for f in dataclasses.fields(cls)]


CONFIG_KEYS = (
    _field_names(AugmentConfig) + _field_names(LossConfig)
    + [k for k in _field_names(TrainConfig) if k not in _SECTIONS]
    + _field_names(ProbeConfig)
)


def config_from_dict(obj):
    """Build (TrainConfig, ProbeConfig) from a flat key -> value mapping.

    Unknown keys are rejected; missing keys take the dataclass defaults.
    """
    if not isinstance(obj, dict):
        raise ConfigurationError("config must be a JSON object")
    obj = {k: v for k, v in obj.items() if k != "name"}
    unknown = sorted(set(obj) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigurationError(f"unknown config keys {unknown}")

    def pick(cls):
        return {k: obj[k] for k in _field_names(cls) if k in obj}

    try:
        aug = AugmentConfig(**pick(AugmentConfig))
        lc = LossConfig(**pick(LossConfig))
        rest = {k: v for k, v in pick(TrainConfig).items() if k not in _SECTIONS}
        tc = TrainConfig(augment=aug, loss=lc, **rest)
        pc = ProbeConfig(**pick(ProbeConfig))
    except TypeError as e:
        raise ConfigurationError(str(e)) from None
    return tc, pc


def config_to_dict(tc, pc=None):
    out = dataclasses.asdict(tc.augment)
    out.update(dataclasses.asdict(tc.loss))
    out.update({k: getattr(tc, k) for k in _field_names(TrainConfig) if k not in _SECTIONS})
    out.update(dataclasses.asdict(pc or ProbeConfig()))
    return out


def load_config(path):
    path = Path(path)
    try:
        obj = json.loads(path.read_text() or "{}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}:{e.lineno}: {e.msg}") from None
    return config_from_dict(obj)


def save_config(tc, path, pc=None):
    Path(path).write_text(json.dumps(config_to_dict(tc, pc), indent=2) + "\n")


def bundled_config_names():
    from importlib import resources
    root = resources.files("hypercl") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_config(name):
    """The shipped hyperparameter set for a benchmark dataset, e.g. ``"zoo"``."""
    from importlib import resources
    res = resources.files("hypercl") / "configs" / f"{name.lower()}.json"
    if not res.is_file():
        raise ConfigurationError(f"no bundled config {name!r}; have {bundled_config_names()}")
    return config_from_dict(json.loads(res.read_text()))


# ------------------------------------------------------------ splits


def save_split(split, path):
    obj = {"seed": split.seed, "train": np.asarray(split.train).tolist(),
           "valid": np.asarray(split.valid).tolist(), "test": np.asarray(split.test).tolist()}
    Path(path).write_text(json.dumps(obj) + "\n")


def load_split(path, num_nodes=None):
    obj = _read_json(path)
    parts = []
    for key in ("train", "valid", "test"):
        if key not in obj or not isinstance(obj[key], list):
            raise ConfigurationError(f"{path}: split field {key!r} missing or not a list")
        parts.append(np.array([_int(v, f"{key}") for v in obj[key]], np.int64))
    allidx = np.concatenate(parts)
    if np.unique(allidx).size != allidx.size:
        raise ConfigurationError(f"{path}: split parts overlap")
    if num_nodes is not None and allidx.size and (allidx.min() < 0 or allidx.max() >= num_nodes):
        raise ConfigurationError(f"{path}: split index outside [0, {num_nodes})")
    return Split(*parts, seed=obj.get("seed"))


# ------------------------------------------------------------ run summaries


RUN_SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config", "seeds", "loss_trace", "epoch_ms", "evaluation", "artifacts"],
    "properties": {
        "config": {"type": "object"},
        "dataset": {"type": "string"},
        "variant": {"type": "string"},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "loss_trace": {"type": "array", "items": {"type": "number"}},
        "component_trace": {"type": "object",
                            "additionalProperties": {"type": "array", "items": {"type": "number"}}},
        "epoch_ms": {"type": "number", "minimum": 0},
        "evaluation": {
            "type": "object",
            "properties": {
                "accuracy_mean": {"type": "number"},
                "accuracy_std": {"type": "number"},
                "accuracies": {"type": "array", "items": {"type": "number"}},
                "nmi": {"type": "number"},
                "f1": {"type": "number"},
                "silhouette": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "artifacts": {"type": "object", "additionalProperties": {"type": "string"}},
    },
    "additionalProperties": False,
}


def validate_run_summary(obj):
    import jsonschema
    try:
        jsonschema.validate(obj, RUN_SUMMARY_SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigurationError(f"run summary invalid at {path}: {e.message}") from None


def summary_digest(obj):
    """SHA-256 of the summary without wall-clock timings and file paths."""
    core = {k: v for k, v in obj.items() if k not in ("epoch_ms", "artifacts")}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()


def save_run_summary(obj, path):
    validate_run_summary(obj)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_run_summary(path):
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise HyperclError(f"cannot read run summary {path}: {e}") from None
    validate_run_summary(obj)
    return obj


# ------------------------------------------------------------ models


def save_model(tm, path):
    """Parameters plus the config echo in one ``.npz`` file."""
    arrays = {k: v.value for k, v in tm.model.parameters().items()}
    meta = json.dumps({"config": config_to_dict(tm.config),
                       "in_dim": int(tm.model.encoder.in_dim)})
    np.savez(path, __meta__=np.array(meta), **arrays)


def load_model(path):
    from .trainer import TrainedModel, _init_model
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        tc, _ = config_from_dict(meta["config"])
        model = _init_model(meta["in_dim"], tc)
        params = model.parameters()
        missing = set(params) - set(z.files)
        if missing:
            raise DatasetFormatError(f"missing parameters {sorted(missing)}", where=str(path))
        for k, p in params.items():
            if z[k].shape != p.value.shape:
                raise DatasetFormatError(f"shape {z[k].shape} != {p.value.shape}", where=f"{path}:{k}")
            p.value[...] = z[k]
    return TrainedModel(model, tc)
