"""A small C lexer for convention checks.

Not a parser: it strips comments and literals, tokenizes, finds top-level
function bodies by brace matching, and classifies identifier-followed-by-
parenthesis sites. That is enough to reason about call wrapping, include
lines, and rank-guarded blocks without type information.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

KEYWORDS = frozenset(
    "if else for while do switch case default return sizeof goto break continue "
    "typedef struct union enum static extern const volatile inline register "
    "_Alignof alignof _Generic defined".split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<id>[A-Za-z_]\w*)
  | (?P<num>\.?\d[\w.]*(?:[eEpP][-+]\w*)?)
  | (?P<str>"")|(?P<chr>'')
  | (?P<op>->|\+\+|--|<<=|>>=|<<|>>|<=|>=|==|!=|&&|\|\||[-+*/%&|^!~<>=]=?|[(){}\[\];,.?:#])
    """,
    re.VERBOSE,
)

_INCLUDE_RE = re.compile(r'^[ \t]*#[ \t]*include[ \t]*([<"])([^>"\n]+)[>"]', re.MULTILINE)


def _scan(src: str, keep_literals: bool) -> str:
    """Remove comments; optionally blank out string/char literal bodies.

    Newlines are preserved so offsets map to the same line numbers.
    """
    out = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c == "/" and src.startswith("//", i):
            j = src.find("\n", i)
            j = n if j < 0 else j
            out.append(" ")
            i = j
        elif c == "/" and src.startswith("/*", i):
            j = src.find("*/", i + 2)
            j = n if j < 0 else j + 2
            out.append(" " + "\n" * src.count("\n", i, j))
            i = j
        elif c in "\"'":
            j = i + 1
            while j < n and src[j] != c and src[j] != "\n":
                j += 2 if src[j] == "\\" else 1
            j = min(j + 1, n)
            out.append(src[i:j] if keep_literals else c + c)
            i = j
        else:
            out.append(c)
            i += 1
    return "".join(out)


def strip_comments(src: str) -> str:
    return _scan(src, keep_literals=True)


def strip_comments_and_literals(src: str) -> str:
    return _scan(src, keep_literals=False)


def _blank_preprocessor(src: str) -> str:
    lines = src.split("\n")
    continued = False
    for idx, line in enumerate(lines):
        if continued or line.lstrip().startswith("#"):
            continued = line.rstrip().endswith("\\")
            lines[idx] = ""
    return "\n".join(lines)


@dataclass(frozen=True)
class Token:
    text: str
    line: int

    @property
    def is_ident(self) -> bool:
        return self.text[:1].isalpha() or self.text[:1] == "_"


@dataclass(frozen=True)
class Include:
    path: str
    system: bool
    line: int


@dataclass(frozen=True)
class Function:
    name: str
    body_start: int  # index of the opening brace
    body_end: int  # index of the matching closing brace


@dataclass(frozen=True)
class CallSite:
    name: str
    index: int
    line: int
    statement_level: bool
    wrapper: str | None  # enclosing macro when the call is its direct argument
    followed_by: str | None  # identifier that starts the next statement, if a call


class CSource:
    """Lexed view of one C translation unit."""

    def __init__(self, text: str, name: str = "<source>"):
        self.name = name
        self.text = text
        self.without_comments = strip_comments(text)
        code = _blank_preprocessor(strip_comments_and_literals(text))
        self.tokens: list[Token] = []
        line = 1
        pos = 0
        for m in _TOKEN_RE.finditer(code):
            line += code.count("\n", pos, m.start())
            pos = m.start()
            self.tokens.append(Token(m.group(0), line))
        self._match = self._pair_brackets()

    def _pair_brackets(self) -> dict[int, int]:
        pairs: dict[int, int] = {}
        stacks: dict[str, list[int]] = {"(": [], "{": [], "[": []}
        closers = {")": "(", "}": "{", "]": "["}
        for i, tok in enumerate(self.tokens):
            t = tok.text
            if t in stacks:
                stacks[t].append(i)
            elif t in closers and stacks[closers[t]]:
                j = stacks[closers[t]].pop()
                pairs[i] = j
                pairs[j] = i
        return pairs

    def match(self, index: int) -> int | None:
        return self._match.get(index)

    @cached_property
    def includes(self) -> list[Include]:
        out = []
        for m in _INCLUDE_RE.finditer(self.without_comments):
            line = self.without_comments.count("\n", 0, m.start()) + 1
            out.append(Include(m.group(2).strip(), m.group(1) == "<", line))
        return out

    @cached_property
    def functions(self) -> list[Function]:
        funcs = []
        depth = 0
        toks = self.tokens
        for i, tok in enumerate(toks):
            if tok.text == "{":
                if depth == 0 and i > 0 and toks[i - 1].text == ")":
                    open_paren = self.match(i - 1)
                    close = self.match(i)
                    if open_paren and open_paren > 0 and close is not None:
                        name_tok = toks[open_paren - 1]
                        if name_tok.is_ident and name_tok.text not in KEYWORDS:
                            funcs.append(Function(name_tok.text, i, close))
                depth += 1
            elif tok.text == "}":
                depth = max(0, depth - 1)
        return funcs

    def function(self, name: str) -> Function | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def identifiers(self) -> set[str]:
        return {t.text for t in self.tokens if t.is_ident}

    def _prev(self, index: int) -> str | None:
        return self.tokens[index - 1].text if index > 0 else None

    def _is_statement_start(self, index: int) -> bool:
        prev = self._prev(index)
        if prev is None or prev in (";", "{", "}", ":", "else", "return", "="):
            return True
        if prev == ")":
            # `if (...) Call(...)`, `while (...) Call(...)` or a cast like `(void)Call(...)`
            open_paren = self.match(index - 1)
            if open_paren is None:
                return False
            before = self._prev(open_paren)
            return before in (None, ";", "{", "}", ":", "else", "if", "while", "for", "=", "return")
        return False

    def calls(self, within: Function | None = None, checkers: frozenset[str] = frozenset()) -> list[CallSite]:
        """Identifier-followed-by-paren sites, optionally limited to one body.

        ``checkers`` names wrapping macros: a call that is the sole direct
        argument head of one of them is statement level with that wrapper.
        """
        toks = self.tokens
        lo, hi = (within.body_start, within.body_end) if within else (0, len(toks))
        sites = []
        for i in range(lo + 1, hi):
            tok = toks[i]
            if not tok.is_ident or tok.text in KEYWORDS or i + 1 >= len(toks) or toks[i + 1].text != "(":
                continue
            wrapper = None
            statement = False
            prev = self._prev(i)
            if prev == "(" and i >= 2 and toks[i - 2].text in checkers:
                wrapper = toks[i - 2].text
                statement = True
            else:
                statement = self._is_statement_start(i)
            followed = None
            close = self.match(i + 1)
            if close is not None and close + 2 < len(toks) and toks[close + 1].text == ";":
                nxt = toks[close + 2]
                if nxt.is_ident and close + 3 < len(toks) and toks[close + 3].text == "(":
                    followed = nxt.text
            sites.append(CallSite(tok.text, i, tok.line, statement, wrapper, followed))
        return sites

    def guarded_regions(self, condition_idents: frozenset[str], within: Function | None = None) -> list[tuple[int, int, int]]:
        """Token ranges controlled by an ``if`` whose condition mentions one of ``condition_idents``.

        Returns ``(if_index, start, end)`` triples covering both the then-
        and else-branches, since both are rank dependent.
        """
        toks = self.tokens
        lo, hi = (within.body_start, within.body_end) if within else (0, len(toks))
        regions = []
        for i in range(lo, hi):
            if toks[i].text != "if" or i + 1 >= len(toks) or toks[i + 1].text != "(":
                continue
            cond_end = self.match(i + 1)
            if cond_end is None:
                continue
            cond = {t.text for t in toks[i + 2:cond_end]}
            if not cond & condition_idents:
                continue
            end = self._statement_end(cond_end + 1)
            if end + 1 < len(toks) and toks[end + 1].text == "else":
                end = self._statement_end(end + 2)
            regions.append((i, cond_end + 1, end))
        return regions

    def _statement_end(self, start: int) -> int:
        toks = self.tokens
        if start >= len(toks):
            return len(toks) - 1
        if toks[start].text == "{":
            close = self.match(start)
            return close if close is not None else len(toks) - 1
        if toks[start].text == "if":
            cond_end = self.match(start + 1) if start + 1 < len(toks) else None
            if cond_end is not None:
                end = self._statement_end(cond_end + 1)
                if end + 1 < len(toks) and toks[end + 1].text == "else":
                    end = self._statement_end(end + 2)
                return end
        depth = 0
        for j in range(start, len(toks)):
            t = toks[j].text
            if t in "([{":
                depth += 1
            elif t in ")]}":
                depth -= 1
                if depth < 0:
                    return j - 1
            elif t == ";" and depth == 0:
                return j
        return len(toks) - 1
