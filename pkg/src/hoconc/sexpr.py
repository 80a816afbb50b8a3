"""A small s-expression reader that keeps source positions.

Used for program files and for reading SMT solver output.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Atom:
    text: str
    pos: Pos = field(compare=False)


@dataclass(frozen=True)
class SList:
    items: tuple
    pos: Pos = field(compare=False)


class ReadError(Exception):
    def __init__(self, message: str, pos: Pos | None = None):
        self.message = message
        self.pos = pos
        super().__init__(f"{pos}: {message}" if pos else message)


_DELIMS = set("()") | set(" \t\r\n;")


def tokenize(text: str):
    """Yield (kind, text, pos) triples; kind is '(' , ')' or 'atom'."""
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
        elif c in " \t\r":
            i, col = i + 1, col + 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c, c, Pos(line, col)
            i, col = i + 1, col + 1
        elif c == "|":
            # SMT-LIB quoted symbol; the bars are dropped
            j = text.find("|", i + 1)
            if j < 0:
                raise ReadError("unterminated |symbol|", Pos(line, col))
            sym = text[i + 1 : j]
            yield "atom", sym, Pos(line, col)
            line += sym.count("\n")
            col += j + 1 - i
            i = j + 1
        else:
            start = i
            while i < n and text[i] not in _DELIMS:
                i += 1
            yield "atom", text[start:i], Pos(line, col)
            col += i - start


def read_all(text: str) -> list:
    """Read every top-level datum in ``text``."""
    stack: list[tuple[Pos, list]] = []
    out: list = []
    for kind, tok, pos in tokenize(text):
        if kind == "(":
            stack.append((pos, []))
        elif kind == ")":
            if not stack:
                raise ReadError("unexpected ')'", pos)
            start, items = stack.pop()
            node = SList(tuple(items), start)
            (stack[-1][1] if stack else out).append(node)
        else:
            node = Atom(tok, pos)
            (stack[-1][1] if stack else out).append(node)
    if stack:
        raise ReadError("unclosed '('", stack[-1][0])
    return out


def to_python(node):
    """Strip positions: atoms become str, lists become nested lists."""
    if isinstance(node, Atom):
        return node.text
    return [to_python(x) for x in node.items]
