"""Build strings that match a regular expression by walking its parse tree.

Covers the dialect shared by JSON Schema and Python (no backreferences).
Lookarounds are skipped here, so callers must still check the result with
:func:`quickrest.specs.schema_pattern`.
"""
import string

try:
    import re._parser as sre_parse  # Python >= 3.11
    from re._constants import MAXREPEAT
except ImportError:  # pragma: no cover - exercised on 3.10
    import sre_parse
    from sre_constants import MAXREPEAT

_CATEGORY_CHARS = {
    "CATEGORY_DIGIT": string.digits,
    "CATEGORY_WORD": string.ascii_letters + string.digits + "_",
    "CATEGORY_SPACE": " \t\n\r\f\v",
    "CATEGORY_NOT_DIGIT": string.ascii_letters + "_ -",
    "CATEGORY_NOT_WORD": " -.!,;:",
    "CATEGORY_NOT_SPACE": string.ascii_letters + string.digits,
}


class Unsupported(Exception):
    pass


def _class_char(items, rng, any_char):
    negate = any(str(op) == "NEGATE" for op, _ in items)
    if negate:
        for _ in range(64):
            c = any_char()
            if not _in_class(c, items):
                return c
        raise Unsupported("negated class rejected every candidate")
    op, arg = rng.choice([it for it in items if str(it[0]) != "NEGATE"])
    name = str(op)
    if name == "LITERAL":
        return chr(arg)
    if name == "RANGE":
        return chr(rng.randint(arg[0], arg[1]))
    if name == "CATEGORY":
        return rng.choice(_CATEGORY_CHARS.get(str(arg), string.ascii_letters))
    raise Unsupported(name)


def _in_class(c, items):
    o = ord(c)
    for op, arg in items:
        name = str(op)
        if name == "LITERAL" and o == arg:
            return True
        if name == "RANGE" and arg[0] <= o <= arg[1]:
            return True
        if name == "CATEGORY" and c in _CATEGORY_CHARS.get(str(arg), ""):
            return True
    return False


def _walk(tokens, rng, size, any_char, out):
    for op, arg in tokens:
        name = str(op)
        if name == "LITERAL":
            out.append(chr(arg))
        elif name == "NOT_LITERAL":
            c = any_char()
            while ord(c) == arg:
                c = any_char()
            out.append(c)
        elif name == "ANY":
            c = any_char()
            while c == "\n":
                c = any_char()
            out.append(c)
        elif name == "IN":
            out.append(_class_char(arg, rng, any_char))
        elif name == "BRANCH":
            _walk(rng.choice(arg[1]), rng, size, any_char, out)
        elif name == "SUBPATTERN":
            _walk(arg[-1], rng, size, any_char, out)
        elif name in ("MAX_REPEAT", "MIN_REPEAT", "POSSESSIVE_REPEAT"):
            lo, hi, sub = arg
            hi = lo + size if hi == MAXREPEAT else min(hi, lo + size)
            for _ in range(rng.randint(lo, max(lo, hi))):
                _walk(sub, rng, size, any_char, out)
        elif name in ("AT", "ASSERT", "ASSERT_NOT"):
            continue
        else:
            raise Unsupported(name)


def generate(pattern, rng, size, any_char):
    """One candidate string for ``pattern``; ``any_char()`` supplies wildcard characters."""
    out = []
    _walk(sre_parse.parse(pattern), rng, size, any_char, out)
    return "".join(out)
