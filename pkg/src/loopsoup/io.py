"""Graph loading with error context, and JSON-lines dumps of paths and trees."""

from __future__ import annotations

import json
import os

from .errors import ValidationError
from .graph import DELTA, FORMAT_VERSION, GraphModel, fixture, graph_from_dict
from .soup import PathBatch


def load_graph(path: str) -> GraphModel:
    """Graph JSON from ``path``; a shipped fixture name (G2, T3, P3, PN<N>) also works."""
    if not os.path.exists(path):
        try:
            return fixture(path)
        except ValidationError:
            raise ValidationError(f"{path}: no such file or fixture") from None
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}:{e.lineno}:{e.colno}: invalid JSON ({e.msg})") from None
    try:
        return graph_from_dict(doc)
    except ValidationError as e:
        raise ValidationError(f"{path}: {e}") from None


def dump_paths(g: GraphModel, paths: PathBatch) -> str:
    """One path per line: {"nodes": [...], "holding": [...], "end": node or DELTA}."""
    lines = [json.dumps({"format_version": FORMAT_VERSION, "count": len(paths), "killed": paths.killed})]
    for i in range(len(paths)):
        p = paths.path(i)
        end = DELTA if paths.killed else g.nodes[p.nodes[-1]]
        lines.append(json.dumps({
            "nodes": [g.nodes[x] for x in p.nodes],
            "holding": [float(t) for t in p.holding],
            "end": end,
        }))
    return "\n".join(lines) + "\n"


def write_text(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
