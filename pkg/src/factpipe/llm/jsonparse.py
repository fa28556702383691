"""Pull JSON documents out of free-form model replies."""

from __future__ import annotations

import json
import re
from collections.abc import Iterator
from typing import Any

from factpipe.errors import NoJsonFound

_FENCE = re.compile(r"```[ \t]*(?:json|JSON)?[ \t]*\n?(.*?)```", re.DOTALL)
_OPENERS = {"{": "}", "[": "]"}


def _balanced_spans(text: str) -> Iterator[str]:
    """Yield every balanced ``{...}``/``[...]`` span, in order of its opening char.

    String literals are honoured so braces inside quoted text don't count.
    Unbalanced openers are skipped and scanning resumes after them.
    """
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch not in _OPENERS:
            i += 1
            continue
        stack = [_OPENERS[ch]]
        in_str = False
        escaped = False
        j = i + 1
        while j < n and stack:
            c = text[j]
            if in_str:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_str = False
            elif c == '"':
                in_str = True
            elif c in _OPENERS:
                stack.append(_OPENERS[c])
            elif c in "}]":
                if c != stack[-1]:
                    break
                stack.pop()
            j += 1
        if not stack:
            yield text[i:j]
        i += 1


def _loads(candidate: str) -> Any:
    # strict=False lets raw newlines through inside strings, which models emit constantly.
    return json.loads(candidate, strict=False)


def iter_json_documents(raw: str) -> Iterator[Any]:
    """Yield every parseable top-level JSON object or array in ``raw``."""
    if raw is None:
        return
    sources = [m.group(1) for m in _FENCE.finditer(raw)]
    sources.append(raw)
    seen: set[str] = set()
    for source in sources:
        stripped = source.strip()
        if stripped and stripped[0] in _OPENERS:
            try:
                doc = _loads(stripped)
            except ValueError:
                pass
            else:
                seen.add(stripped)
                yield doc
        for span in _balanced_spans(source):
            if span in seen:
                continue
            try:
                doc = _loads(span)
            except ValueError:
                continue
            seen.add(span)
            yield doc


def extract_json_object(raw: str) -> Any:
    """Return the first JSON object or array embedded in ``raw``.

    Code fences are looked at first, then the whole text is scanned for the
    first balanced span that parses.

    >>> extract_json_object('Sure! ```json\\n{"label": "supported"}\\n```')
    {'label': 'supported'}
    """
    for doc in iter_json_documents(raw):
        return doc
    raise NoJsonFound(f"no JSON object or array in reply ({len(raw or '')} chars)")
