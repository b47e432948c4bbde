"""Multiple-choice prompt template and response parsing."""

from __future__ import annotations

import re
import string
from typing import Sequence

PROMPT_VERSION = "mc-v1"
LETTERS = string.ascii_uppercase

_STRIP = " \t\r\n\"'`*.,!?:;()[]{}"
_ANSWER_PREFIX = re.compile(r"^(?:(?:the|my)\s+)?(?:final\s+)?answer(?:\s+is)?\s*[:\-]?\s*")


def build_prompt(qa, blind: bool = False) -> str:
    """Render the versioned template for a ``QAPair``.

    Blind prompts drop the instruction to look at an attached image; the
    question text itself is passed through unchanged.
    """
    lines = ["Answer the following question." if blind else "Look at the image and answer the following question."]
    lines.append(f"Question: {qa.question}")
    lines.append("Choices:")
    lines.extend(f"{LETTERS[i]}. {choice}" for i, choice in enumerate(qa.choices))
    lines.append("Reply with exactly one of the choices above, copied verbatim, and nothing else.")
    return "\n".join(lines)


def _normalize(text: str) -> str:
    text = re.sub(r"\s+", " ", text.strip().lower())
    text = _ANSWER_PREFIX.sub("", text.strip(_STRIP))
    return text.strip(_STRIP)


def parse_response(raw: str | None, choices: Sequence[str]) -> int | None:
    """Map a free-text reply to a choice index, or ``None`` when it is unparseable.

    Tried in order: case/whitespace-insensitive exact match, a bare choice
    letter (``"B"``, ``"(b)"``) or ``"B. <choice>"``, then a unique prefix
    match in either direction. Anything matching several choices is
    unparseable.
    """
    if not raw:
        return None
    text = _normalize(raw)
    if not text:
        return None
    normed = [_normalize(c) for c in choices]

    exact = [i for i, c in enumerate(normed) if c == text]
    if exact:
        return exact[0] if len(exact) == 1 else None

    if len(text) == 1 and text in LETTERS.lower()[: len(choices)]:
        return LETTERS.lower().index(text)
    m = re.fullmatch(r"\(?([a-z])[.):]\s*(.+)", text)
    if m and m.group(1) in LETTERS.lower()[: len(choices)]:
        i = LETTERS.lower().index(m.group(1))
        return i if _normalize(m.group(2)) == normed[i] else None

    hits = [i for i, c in enumerate(normed) if re.match(re.escape(c) + r"\b", text)]
    if len(hits) == 1:
        return hits[0]
    if len(text) >= 2:
        hits = [i for i, c in enumerate(normed) if c.startswith(text)]
        if len(hits) == 1:
            return hits[0]
    return None
