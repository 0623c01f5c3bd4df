"""Single-node storage and extraction server.

Layout under the data directory::

    config.json                 n, graph and model texts, universal flag
    index.json                  ids -> file names (replaced atomically)
    sources/<id>.raw            uploaded realizations
    streams/<k>-<hash>.smra     encoded streams, never rewritten
    reports/<k>-<hash>.json     rate reports

Every file is written to a temporary name and renamed into place.  The index
is updated last, so a crash in between leaves an unindexed stream that the
next identical encode request picks up again.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import codec
from .entropy_bounds import rate_storage_single_memory
from .errors import FormatError, GraphError, ModelError, RequestError, SmraError, StorageInsufficient
from .model import CorrelationModel
from .navigation import NavigationGraph, one_hop
from .sources import SourceEnsemble, load_raw

log = logging.getLogger(__name__)


class LocalFS:
    """The only door to the disk; tests swap in a recording double."""

    def read_bytes(self, path):
        return Path(path).read_bytes()

    def exists(self, path):
        return Path(path).exists()

    def write_atomic(self, path, data):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class HttpError(Exception):
    def __init__(self, status, message, **extra):
        super().__init__(message)
        self.status = status
        self.body = {"error": message, **extra}


class Store:
    def __init__(self, data_dir, graph=None, model=None, n=None, universal=False, fs=None):
        self.root = Path(data_dir)
        self.fs = fs or LocalFS()
        cfg_path = self.root / "config.json"
        if graph is None and self.fs.exists(cfg_path):
            cfg = json.loads(self.fs.read_bytes(cfg_path))
            graph = NavigationGraph.parse(cfg["graph"])
            model = CorrelationModel.parse(cfg["model"])
            n = cfg["n"]
            universal = cfg.get("universal", False)
        if graph is None or model is None or n is None:
            raise GraphError("store needs a graph, a model and n")
        self.graph, self.model, self.n, self.universal = graph, model, int(n), bool(universal)
        cfg = {"n": self.n, "graph": graph.dumps(), "model": model.dumps(), "universal": self.universal}
        self.fs.write_atomic(cfg_path, json.dumps(cfg, indent=2).encode())
        idx_path = self.root / "index.json"
        self.index = {"sources": {}, "streams": {}}
        if self.fs.exists(idx_path):
            self.index = json.loads(self.fs.read_bytes(idx_path))
        self._lock = threading.Lock()
        self._encode_locks = {}
        self._streams = {}

    # helpers ---------------------------------------------------------------

    def _save_index(self):
        self.fs.write_atomic(self.root / "index.json", json.dumps(self.index, indent=2, sort_keys=True).encode())

    def _check_source(self, k):
        if not 1 <= k <= self.graph.num_sources:
            raise HttpError(HTTPStatus.NOT_FOUND, f"unknown source {k}")

    def _source_path(self, sid):
        return self.root / "sources" / f"{sid}.raw"

    # operations ------------------------------------------------------------

    def put_source(self, sid, body):
        self._check_source(sid)
        try:
            sym = load_raw(body)
        except FormatError as exc:
            raise HttpError(HTTPStatus.BAD_REQUEST, f"malformed source: {exc}") from None
        if sym.shape[0] != self.n:
            raise HttpError(HTTPStatus.BAD_REQUEST, f"source has {sym.shape[0]} symbols, store expects {self.n}")
        with self._lock:
            if str(sid) in self.index["sources"]:
                raise HttpError(HTTPStatus.CONFLICT, f"source {sid} already exists")
            path = self._source_path(sid)
            self.fs.write_atomic(path, body)
            self.index["sources"][str(sid)] = path.name
            self._save_index()

    def _needed(self, k):
        return [k] + sorted(j for j in one_hop(self.graph, k) if j != 0)

    def encode(self, k):
        self._check_source(k)
        with self._lock:
            lk = self._encode_locks.setdefault(k, threading.Lock())
        with lk:
            needed = self._needed(k)
            missing = [j for j in needed if str(j) not in self.index["sources"]]
            if missing:
                raise HttpError(HTTPStatus.NOT_FOUND, "missing sources", missing=missing)
            raws = {j: self.fs.read_bytes(self._source_path(j)) for j in needed}
            h = hashlib.sha256()
            h.update(self.graph.dumps().encode() + self.model.dumps().encode())
            h.update(b"universal" if self.universal else b"known")
            for j in needed:
                h.update(f"{j}:{len(raws[j])}:".encode() + raws[j])
            digest = h.hexdigest()[:16]
            name = f"{k}-{digest}"
            spath = self.root / "streams" / f"{name}.smra"
            rpath = self.root / "reports" / f"{name}.json"
            entry = self.index["streams"].get(str(k))
            if entry and entry["hash"] == digest or self.fs.exists(spath) and self.fs.exists(rpath):
                report = self.fs.read_bytes(rpath)
            else:
                ens = SourceEnsemble(self.n, load_raw(raws[k]), {j: load_raw(raws[j]) for j in needed[1:]})
                try:
                    bs, rep = codec.offline_encode(ens, self.graph, self.model, k, universal=self.universal)
                except StorageInsufficient as exc:
                    raise HttpError(HTTPStatus.INTERNAL_SERVER_ERROR, f"storage insufficient: {exc}") from None
                report = json.dumps(rep.to_json(), indent=2, sort_keys=True).encode()
                self.fs.write_atomic(spath, codec.serialize(bs))
                self.fs.write_atomic(rpath, report)
            with self._lock:
                self.index["streams"][str(k)] = {"hash": digest, "stream": spath.name, "report": rpath.name}
                self._save_index()
            return report

    def _stream(self, k):
        self._check_source(k)
        entry = self.index["streams"].get(str(k))
        if entry is None:
            raise HttpError(HTTPStatus.PRECONDITION_FAILED, f"source {k} is not encoded yet")
        key = entry["hash"]
        bs = self._streams.get((k, key))
        if bs is None:
            bs = codec.deserialize(self.fs.read_bytes(self.root / "streams" / entry["stream"]))
            self._streams[(k, key)] = bs
        return bs

    def extract(self, k, prev):
        bs = self._stream(k)
        try:
            return codec.online_extract(bs, prev)
        except RequestError:
            raise HttpError(HTTPStatus.NOT_FOUND, f"source {k} has no level for previous request {prev}") from None

    def report(self, k):
        self._stream(k)
        entry = self.index["streams"][str(k)]
        return self.fs.read_bytes(self.root / "reports" / entry["report"])

    def bounds(self, k):
        self._check_source(k)
        try:
            return rate_storage_single_memory(k, self.graph, self.model).to_json()
        except (ModelError, GraphError) as exc:
            raise HttpError(HTTPStatus.BAD_REQUEST, str(exc)) from None


# wire format of an extraction ------------------------------------------------------

def transmission_headers(tx):
    h = {
        "X-Level": str(tx.level),
        "X-Bits": str(tx.bits.shape[0]),
        "X-Root-Bits": str(tx.root_bits),
        "X-Mode": str(int(tx.mode)),
        "X-N": str(tx.n),
        "X-Source": str(tx.source_id),
        "X-Prev": str(tx.prev_id),
        "X-Channel-Param": repr(float(tx.channel_param)),
    }
    if tx.learning is not None:
        h["X-Learning"] = "".join(map(str, tx.learning.tolist()))
        h["X-Type-Table"] = "1" if tx.type_table else "0"
    return h


def transmission_from_http(body, headers):
    """Rebuild a ``Transmission`` from an extraction response."""
    get = {k.lower(): v for k, v in dict(headers).items()}.get
    nbits = int(get("x-bits"))
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[:nbits].astype(np.uint8)
    learning = get("x-learning")
    learning = None if learning is None else np.array([int(c) for c in learning], dtype=np.uint8)
    return codec.Transmission(int(get("x-source")), int(get("x-prev")), int(get("x-n")),
                              codec.Mode(int(get("x-mode"))), int(get("x-level")),
                              float(get("x-channel-param")), bits, learning,
                              get("x-type-table") == "1", int(get("x-root-bits")))


# HTTP layer ----------------------------------------------------------------------

def _make_handler(store):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.info("%s %s", self.address_string(), fmt % args)

        def _send(self, status, body=b"", ctype="application/json", headers=None):
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            for k, v in (headers or {}).items():
                self.send_header(k, v)
            self.end_headers()
            self.wfile.write(body)

        def _error(self, status, body):
            self._send(status, json.dumps(body).encode())

        def _route(self, method):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            if len(parts) != 3 or parts[0] != "v1":
                raise HttpError(HTTPStatus.NOT_FOUND, f"no route {url.path}")
            try:
                ident = int(parts[2])
            except ValueError:
                raise HttpError(HTTPStatus.NOT_FOUND, f"bad id {parts[2]!r}") from None
            return (method, parts[1]), ident, parse_qs(url.query)

        def _dispatch(self, method):
            try:
                route, ident, query = self._route(method)
                if route == ("PUT", "sources"):
                    length = int(self.headers.get("Content-Length", 0))
                    store.put_source(ident, self.rfile.read(length))
                    self._send(HTTPStatus.CREATED, json.dumps({"id": ident}).encode())
                elif route == ("POST", "encode"):
                    length = int(self.headers.get("Content-Length", 0) or 0)
                    if length:
                        self.rfile.read(length)
                    self._send(HTTPStatus.OK, store.encode(ident))
                elif route == ("GET", "extract"):
                    try:
                        prev = int(query["prev"][0])
                    except (KeyError, ValueError):
                        raise HttpError(HTTPStatus.BAD_REQUEST, "query parameter prev=<int> required") from None
                    tx = store.extract(ident, prev)
                    body = np.packbits(tx.bits).tobytes()
                    self._send(HTTPStatus.OK, body, "application/octet-stream", transmission_headers(tx))
                elif route == ("GET", "bounds"):
                    self._send(HTTPStatus.OK, json.dumps(store.bounds(ident)).encode())
                elif route == ("GET", "report"):
                    self._send(HTTPStatus.OK, store.report(ident))
                else:
                    raise HttpError(HTTPStatus.NOT_FOUND, f"no route {method} {self.path}")
            except HttpError as exc:
                self._error(exc.status, exc.body)
            except SmraError as exc:
                log.exception("request failed")
                self._error(HTTPStatus.INTERNAL_SERVER_ERROR, {"error": str(exc)})

        def do_GET(self):
            self._dispatch("GET")

        def do_PUT(self):
            self._dispatch("PUT")

        def do_POST(self):
            self._dispatch("POST")

    return Handler


def make_server(store, host="127.0.0.1", port=0):
    server = ThreadingHTTPServer((host, port), _make_handler(store))
    server.daemon_threads = True
    return server
