"""JSONL iteration traces and DOT rendering of the explored path tree."""

from __future__ import annotations

import json

from .trace import constraint_from_record, print_constraint


class JsonlWriter:
    """Observer that writes one JSON object per search event."""

    def __init__(self, fh):
        self.fh = fh

    def __call__(self, record: dict) -> None:
        self.fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


class PathTree:
    """Prefix tree of the paths seen in ``iteration`` records.

    Test constraints are kept as nodes too, so each dispatch shows where it
    started inspecting a value.
    """

    def __init__(self):
        self.children: list[dict] = [{}]
        self.labels: list[str] = ["start"]
        self.leaves: dict[int, list[str]] = {}

    def __call__(self, record: dict) -> None:
        if record.get("event") != "iteration":
            return
        node = 0
        for rec in record["path"]:
            text = print_constraint(constraint_from_record(rec))
            nxt = self.children[node].get(text)
            if nxt is None:
                nxt = len(self.labels)
                self.children.append({})
                self.labels.append(text)
                self.children[node][text] = nxt
            node = nxt
        self.leaves.setdefault(node, []).append(f"#{record['iteration']}: {record['outcome']}")

    def to_dot(self) -> str:
        lines = ["digraph paths {", "  node [shape=box, fontname=monospace];"]
        for i, label in enumerate(self.labels):
            text = label
            if i in self.leaves:
                text += "\\n" + "\\n".join(self.leaves[i])
            bug = any(s.split(": ", 1)[1].startswith("bug") for s in self.leaves.get(i, ()))
            style = ", color=red" if bug else ""
            lines.append(f"  n{i} [label={_quote(text)}{style}];")
        for i, kids in enumerate(self.children):
            for j in kids.values():
                lines.append(f"  n{i} -> n{j};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


class Tee:
    """Forward each record to several observers."""

    def __init__(self, *observers):
        self.observers = [o for o in observers if o is not None]

    def __call__(self, record: dict) -> None:
        for o in self.observers:
            o(record)
