"""Python bindings for the pathflow aggregation engine.

JSON documents come back as plain dicts and lists.
"""

import json as _json

from . import _pathflow
from ._pathflow import (
    Dataset,
    Error,
    ManifestError,
    NotFoundError,
    ParamError,
    ParseError,
    QueryError,
    Tree,
)

__all__ = [
    "Manifest", "Dataset", "Tree", "History",
    "load_manifest", "manifest_from_dict", "validate_manifest",
    "read_csv", "read_csv_text", "synthetic",
    "build", "build_progressive", "tree_dict", "layout", "hit_test",
    "distribution", "diff", "normalize_filter",
    "Error", "ManifestError", "NotFoundError", "ParamError", "ParseError", "QueryError",
]

Manifest = _pathflow.Manifest


def _dump(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return _json.dumps(value)


def load_manifest(path):
    return Manifest.load(str(path))


def manifest_from_dict(doc):
    return Manifest.from_json(_dump(doc))


def validate_manifest(manifest):
    return _json.loads(manifest.violations())


def read_csv(path, manifest):
    return Dataset.from_csv(str(path), manifest)


def read_csv_text(text, manifest):
    return Dataset.from_csv_text(text, manifest)


def synthetic(params, manifest):
    return Dataset.synthetic(_dump(params), manifest)


def build(dataset, filter=None):
    return _pathflow.build(dataset, _dump(filter))


def build_progressive(dataset, filter=None, quantum_ms=1000, workers=0, on_snapshot=None):
    callback = None
    if on_snapshot is not None:
        def callback(meta):
            on_snapshot(_json.loads(meta))
    return _pathflow.build_progressive(dataset, _dump(filter), quantum_ms, workers, callback)


def tree_dict(tree, max_nodes=0):
    return _json.loads(tree.to_json(max_nodes))


def layout(tree, vw=1000.0, vh=600.0, minpx=0.0, mode="mean", scale=None):
    return _json.loads(_pathflow.layout(tree, vw, vh, minpx, mode, scale))


def hit_test(rects, x, y):
    return _pathflow.hit_test(_dump(rects), x, y)


def distribution(tree, path=(), selector="duration"):
    return _json.loads(_pathflow.distribution(tree, list(path), selector))


def diff(a, b):
    return _json.loads(_pathflow.diff(a, b))


def normalize_filter(filter, manifest):
    return _json.loads(_pathflow.normalize_filter(_dump(filter), manifest))


class History:
    """Past views; optionally persisted as JSON lines."""

    def __init__(self, manifest, path=None):
        self._store = _pathflow.History(manifest, None if path is None else str(path))

    def put(self, tree, filter=None, label=""):
        return self._store.put(tree, _dump(filter), label)

    def get(self, entry_id):
        return _json.loads(self._store.get(entry_id))

    def tree(self, entry_id):
        return self._store.tree(entry_id)

    def list(self):
        return _json.loads(self._store.list())

    def __len__(self):
        return len(self._store)
