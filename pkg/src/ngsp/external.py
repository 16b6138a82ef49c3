"""Scorer bank backed by an external program speaking a tab-separated protocol.

For each batch the engine writes ``queries.tsv``::

    query_id  shape_id  kind  label  region_ids  child_tags

(region ids and tags comma-separated, ``-`` for no tags), writes the shape as
a region file, and runs ``<command> <query_path> <response_path> <regs_path>``.
The program must exit 0 and write ``scores.tsv`` with one
``query_id  value`` line per query.
"""

from __future__ import annotations

import logging
import math
import os
import shlex
import subprocess
import tempfile

from .errors import (DuplicateResponse, IncompleteResponse, ScoreOutOfRange, ScorerProcessError,
                     ScorerTimeout)
from .shapes import format_shape

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 300.0
TIMEOUT_ENV = "NGSP_SCORER_TIMEOUT_SECS"


def default_timeout():
    raw = os.environ.get(TIMEOUT_ENV)
    if not raw:
        return DEFAULT_TIMEOUT
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{TIMEOUT_ENV} must be a number of seconds, got {raw!r}") from None
    if not value > 0:
        raise ValueError(f"{TIMEOUT_ENV} must be positive")
    return value


def format_queries(shape_id, queries):
    lines = []
    for i, q in enumerate(queries):
        regions = ",".join(str(r) for r in q.regions)
        tags = ",".join(q.tags) if q.tags else "-"
        lines.append(f"{i}\t{shape_id}\t{q.kind}\t{q.label}\t{regions}\t{tags}\n")
    return "".join(lines)


def parse_scores(text, n):
    """Values in query order; every id in 0..n-1 must appear exactly once."""
    values = {}
    for ln in text.splitlines():
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise IncompleteResponse(f"malformed response line {ln!r}")
        try:
            qid, value = int(parts[0]), float(parts[1])
        except ValueError:
            raise IncompleteResponse(f"malformed response line {ln!r}") from None
        if qid in values:
            raise DuplicateResponse(f"query {qid} answered twice")
        if not 0 <= qid < n:
            raise IncompleteResponse(f"response for unknown query id {qid}")
        if math.isnan(value) or not 0.0 <= value <= 1.0:
            raise ScoreOutOfRange(f"ScoreOutOfRange: query {qid} scored {value}")
        values[qid] = value
    missing = [i for i in range(n) if i not in values]
    if missing:
        raise IncompleteResponse(
            f"IncompleteResponse: {len(missing)} queries unanswered (first id {missing[0]})")
    return [values[i] for i in range(n)]


class ExternalScorerBank:
    backend = "external"

    def __init__(self, command, timeout=None):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.argv:
            raise ValueError("empty external scorer command")
        self.timeout = default_timeout() if timeout is None else float(timeout)

    def score(self, shape, queries):
        queries = list(queries)
        if not queries:
            return []
        with tempfile.TemporaryDirectory(prefix="ngsp-") as tmp:
            qpath = os.path.join(tmp, "queries.tsv")
            rpath = os.path.join(tmp, "scores.tsv")
            spath = os.path.join(tmp, "shape.regs")
            with open(qpath, "w", encoding="utf-8", newline="\n") as f:
                f.write(format_queries(shape.id, queries))
            with open(spath, "w", encoding="utf-8", newline="\n") as f:
                f.write(format_shape(shape))
            log.debug("external scorer: %d queries for %s", len(queries), shape.id)
            try:
                proc = subprocess.run(self.argv + [qpath, rpath, spath], capture_output=True,
                                      timeout=self.timeout)
            except subprocess.TimeoutExpired:
                raise ScorerTimeout(f"external scorer exceeded {self.timeout:g} s") from None
            except OSError as e:
                raise ScorerProcessError(f"cannot run external scorer: {e}") from None
            if proc.returncode != 0:
                tail = proc.stderr.decode("utf-8", "replace").strip()[-500:]
                raise ScorerProcessError(
                    f"external scorer exited with status {proc.returncode}: {tail}")
            try:
                with open(rpath, encoding="utf-8") as f:
                    text = f.read()
            except FileNotFoundError:
                raise IncompleteResponse("external scorer wrote no response file") from None
        return parse_scores(text, len(queries))
