"""Canonical JSON encoding shared by every value-comparing stage.

All cross-language value comparisons in the pipeline are plain string
comparisons of canonically encoded JSON, so the encoding has to be a fixed
point under decode/re-encode and reproducible byte-for-byte by the source
language shim:

- object keys sorted (code-point order, which equals UTF-8 byte order)
- no insignificant whitespace
- floats in shortest round-trip decimal form (``repr`` of a Python float)
- byte strings as standard base64 text
- no NaN/Infinity (rejected)
"""

from __future__ import annotations

import base64
import json
import math
from typing import Any


class CanonicalEncodeError(ValueError):
    """Raised for values with no canonical JSON form."""


def _prepare(value: Any) -> Any:
    """Return a plain-JSON shadow of `value` (bytes become base64 text)."""
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise CanonicalEncodeError(f"non-finite float {value!r} has no JSON form")
        return value
    if isinstance(value, (bytes, bytearray)):
        return base64.b64encode(bytes(value)).decode("ascii")
    if isinstance(value, (list, tuple)):
        return [_prepare(v) for v in value]
    if isinstance(value, dict):
        out = {}
        for k, v in value.items():
            if not isinstance(k, str):
                raise CanonicalEncodeError(f"object key {k!r} is not a string")
            out[k] = _prepare(v)
        return out
    raise CanonicalEncodeError(f"{type(value).__name__} value has no canonical JSON form")


def dumps(value: Any) -> str:
    """Encode `value` in canonical form."""
    return json.dumps(
        _prepare(value),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def loads(text: str) -> Any:
    return json.loads(text)


def recanonicalize(text: str) -> str:
    """Canonical form of any valid JSON text (normalizes foreign encoders)."""
    return dumps(json.loads(text))


def is_canonical(text: str) -> bool:
    try:
        return recanonicalize(text) == text
    except (ValueError, CanonicalEncodeError):
        return False


def equal(a: Any, b: Any) -> bool:
    """Value equality as the pipeline defines it: canonical-string equality."""
    return dumps(a) == dumps(b)
