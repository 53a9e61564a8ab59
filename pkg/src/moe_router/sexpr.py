"""Minimal s-expression reader for Lisp-like task-definition files.

Grammar: parenthesized lists of atoms and double-quoted string literals,
with ``;`` comments running to end of line. The parse tree uses Python
lists for lists, plain ``str`` for atoms, and ``StringLit`` for quoted
strings so that rendering round-trips exactly.

Input is bytes and must be valid UTF-8; parse errors report byte offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import ParseError

_STRUCTURAL = "()\";"


@dataclass(frozen=True)
class StringLit:
    """A double-quoted string literal, kept distinct from bare atoms."""

    value: str


Node = Union[str, StringLit, list]


def parse_sexpr_bytes(data: bytes) -> list[Node]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8 at byte {exc.start}", offset=exc.start) from None
    return _parse(text)


def parse_sexpr(text: str) -> list[Node]:
    return _parse(text)


def _parse(text: str) -> list[Node]:
    top: list[Node] = []
    stack: list[list[Node]] = []
    open_offsets: list[int] = []

    def current() -> list[Node]:
        return stack[-1] if stack else top

    i = 0
    byte_pos = 0
    n = len(text)
    while i < n:
        ch = text[i]
        ch_bytes = len(ch.encode("utf-8"))
        if ch == ";":
            while i < n and text[i] != "\n":
                byte_pos += len(text[i].encode("utf-8"))
                i += 1
            continue
        if ch == "(":
            new: list[Node] = []
            current().append(new)
            stack.append(new)
            open_offsets.append(byte_pos)
            i += 1
            byte_pos += 1
            continue
        if ch == ")":
            if not stack:
                raise ParseError(f"unbalanced ')' at offset {byte_pos}", offset=byte_pos)
            stack.pop()
            open_offsets.pop()
            i += 1
            byte_pos += 1
            continue
        if ch == '"':
            start_offset = byte_pos
            i += 1
            byte_pos += 1
            chars: list[str] = []
            closed = False
            while i < n:
                c = text[i]
                c_bytes = len(c.encode("utf-8"))
                if c == "\\":
                    if i + 1 >= n:
                        break
                    esc = text[i + 1]
                    chars.append({"n": "\n", "t": "\t"}.get(esc, esc))
                    byte_pos += c_bytes + len(esc.encode("utf-8"))
                    i += 2
                    continue
                if c == '"':
                    closed = True
                    i += 1
                    byte_pos += 1
                    break
                chars.append(c)
                i += 1
                byte_pos += c_bytes
            if not closed:
                raise ParseError(
                    f"unterminated string literal starting at offset {start_offset}",
                    offset=start_offset,
                )
            current().append(StringLit("".join(chars)))
            continue
        if ch.isspace():
            i += 1
            byte_pos += ch_bytes
            continue
        # bare atom
        chars = []
        while i < n and not text[i].isspace() and text[i] not in _STRUCTURAL:
            chars.append(text[i])
            byte_pos += len(text[i].encode("utf-8"))
            i += 1
        current().append("".join(chars))

    if stack:
        end = len(text.encode("utf-8"))
        raise ParseError(
            f"unbalanced '(': {len(stack)} unclosed at offset {end}"
            f" (first opened at offset {open_offsets[0]})",
            offset=end,
        )
    return top


def render_sexpr(node: Node) -> str:
    """Serialize a parse tree node; parse(render(t)) == t for all trees."""
    if isinstance(node, StringLit):
        escaped = node.value.replace("\\", "\\\\").replace('"', '\\"')
        escaped = escaped.replace("\n", "\\n").replace("\t", "\\t")
        return f'"{escaped}"'
    if isinstance(node, list):
        return "(" + " ".join(render_sexpr(child) for child in node) + ")"
    return node


def render_document(forms: list[Node]) -> str:
    return "\n".join(render_sexpr(form) for form in forms) + "\n"
