"""Canonical XML emission shared by the METS codec and descriptor renderers.

Canonical form: XML declaration, two-space indentation, attributes
alphabetized, UTF-8, LF line endings, trailing newline. Whitespace control
characters in attribute values are numeric-escaped so documents survive
attribute-value normalization on reparse.
"""

from __future__ import annotations


def escape_text(value: str) -> str:
    return (value.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace("\r", "&#13;"))


def escape_attr(value: str) -> str:
    return (value.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;")
            .replace("\t", "&#9;").replace("\n", "&#10;")
            .replace("\r", "&#13;"))


class Emitter:
    def __init__(self):
        self.lines: list[str] = ['<?xml version="1.0" encoding="UTF-8"?>']

    def _attrs(self, attrs: dict[str, str]) -> str:
        return "".join(
            f' {name}="{escape_attr(attrs[name])}"' for name in sorted(attrs))

    def element(self, depth: int, tag: str, attrs: dict[str, str],
                text: str | None = None):
        pad = "  " * depth
        if text:
            self.lines.append(
                f"{pad}<{tag}{self._attrs(attrs)}>{escape_text(text)}</{tag}>")
        else:
            self.lines.append(f"{pad}<{tag}{self._attrs(attrs)}/>")

    def open(self, depth: int, tag: str, attrs: dict[str, str]):
        self.lines.append(f"{'  ' * depth}<{tag}{self._attrs(attrs)}>")

    def close(self, depth: int, tag: str):
        self.lines.append(f"{'  ' * depth}</{tag}>")

    def tobytes(self) -> bytes:
        return ("\n".join(self.lines) + "\n").encode("utf-8")
