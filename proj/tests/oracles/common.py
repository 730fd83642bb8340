"""Shared helpers for the standalone oracle scripts (stdlib only)."""

import math

MASK = (1 << 64) - 1


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def tokenize(text: str) -> list:
    out, cur = [], ""
    for ch in text:
        if ch.isascii() and ch.isalnum():
            cur += ch.lower()
        elif cur:
            out.append(cur)
            cur = ""
    if cur:
        out.append(cur)
    return out


def embed(text: str, dim: int = 64) -> list:
    v = [0.0] * dim
    for tok in tokenize(text):
        h = fnv1a64(tok)
        v[h % dim] += -1.0 if h >> 63 else 1.0
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v] if n > 0 else v


def cosine(a, b) -> float:
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def artifact_id(app: str, title_key: str) -> str:
    return "a%016x" % fnv1a64(app.lower() + "\x1f" + title_key)
