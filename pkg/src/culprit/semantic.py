"""Detection of semantics-preserving commits by syntactic fingerprinting.

Source files are lexed with a small C-family lexer, comments and whitespace are
dropped, a few behaviour-neutral normalisations are applied, and the remaining
token stream is hashed. A commit is semantics-preserving only when every
failure-relevant file it touched has equal, comparable fingerprints before and
after. Anything the lexer or normaliser cannot handle makes the file
non-comparable, which keeps the commit.
"""

from __future__ import annotations

import hashlib
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

from .model import CommitId, ElementId, EvolveRelation

log = logging.getLogger(__name__)


class LexError(ValueError):
    pass


class NormalisationError(ValueError):
    pass


class Token(NamedTuple):
    kind: str  # ident | number | string | char | op | directive
    text: str
    line: int


_OPERATORS = sorted(
    """>>>= <<= >>= >>> ... -> :: ++ -- << >> <= >= == != && || += -= *= /= %= &= |= ^=
    ## + - * / % = < > ! ~ ? : ; , . ( ) [ ] { } & | ^ @ # \\""".split(),
    key=len,
    reverse=True,
)
_IDENT = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_NUMBER = re.compile(
    r"0[xX][0-9a-fA-F_]+[lLuU]*|0[bB][01_]+[lLuU]*"
    r"|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlLuU]*"
)
_SPACE = re.compile(r"[ \t\r\n\f\v]+")


def tokenize(text: str) -> list[Token]:
    """Lex C-family source. Comments and whitespace are dropped.

    Raises LexError on unterminated comments, strings or character literals
    and on characters the lexer does not know.
    """
    tokens: list[Token] = []
    i, n, line = 0, len(text), 1
    while i < n:
        ch = text[i]
        m = _SPACE.match(text, i)
        if m:
            line += text.count("\n", i, m.end())
            i = m.end()
            continue
        if ch == "#" and not text[text.rfind("\n", 0, i) + 1 : i].strip():
            # preprocessor directive: one verbatim token, continuations included
            j = i
            while True:
                j = text.find("\n", j)
                if j < 0 or text[j - 1] != "\\":
                    break
                j += 1
            j = n if j < 0 else j
            tokens.append(Token("directive", text[i:j].rstrip(), line))
            line += text.count("\n", i, j)
            i = j
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise LexError(f"line {line}: unterminated block comment")
            line += text.count("\n", i, j)
            i = j + 2
            continue
        if text.startswith('"""', i):
            j = text.find('"""', i + 3)
            while j > 0 and _escaped(text, j):
                j = text.find('"""', j + 1)
            if j < 0:
                raise LexError(f"line {line}: unterminated text block")
            tokens.append(Token("string", text[i : j + 3], line))
            line += text.count("\n", i, j)
            i = j + 3
            continue
        if ch in "\"'":
            j = i + 1
            while j < n and text[j] != ch:
                if text[j] == "\n":
                    break
                j += 2 if text[j] == "\\" else 1
            kind = "string" if ch == '"' else "char"
            if j >= n or text[j] != ch:
                raise LexError(f"line {line}: unterminated {kind} literal")
            tokens.append(Token(kind, text[i : j + 1], line))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUMBER.match(text, i)
            tokens.append(Token("number", m.group(), line))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(), line))
            i = m.end()
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token("op", op, line))
                i += len(op)
                break
        else:
            raise LexError(f"line {line}: unexpected character {ch!r}")
    return tokens


def _escaped(text: str, j: int) -> bool:
    k, count = j - 1, 0
    while k >= 0 and text[k] == "\\":
        count += 1
        k -= 1
    return count % 2 == 1


_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {v: k for k, v in _OPEN.items()}


def match_brackets(tokens: list[Token]) -> dict[int, int]:
    """Index of the partner of every bracket token. Raises on imbalance."""
    stack: list[int] = []
    match: dict[int, int] = {}
    for i, tok in enumerate(tokens):
        if tok.kind != "op":
            continue
        if tok.text in _OPEN:
            stack.append(i)
        elif tok.text in _CLOSE:
            if not stack or tokens[stack[-1]].text != _CLOSE[tok.text]:
                raise NormalisationError(f"line {tok.line}: unbalanced {tok.text!r}")
            j = stack.pop()
            match[i], match[j] = j, i
    if stack:
        raise NormalisationError(f"line {tokens[stack[-1]].line}: unclosed {tokens[stack[-1]].text!r}")
    return match


class _Normaliser:
    """Brace insertion around single-statement ``if``/``else``/``for``/``while`` bodies.

    The statement grammar understood here is deliberately small; anything it
    cannot delimit with certainty raises NormalisationError.
    """

    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.match = match_brackets(tokens)

    def _is(self, i: int, text: str) -> bool:
        return i < len(self.toks) and self.toks[i].text == text and self.toks[i].kind in ("op", "ident")

    def _expect(self, i: int, text: str) -> None:
        if not self._is(i, text):
            got = self.toks[i].text if i < len(self.toks) else "end of file"
            raise NormalisationError(f"expected {text!r}, got {got!r}")

    def _paren_end(self, i: int) -> int:
        self._expect(i, "(")
        return self.match[i] + 1

    def _block_end(self, i: int) -> int:
        self._expect(i, "{")
        return self.match[i] + 1

    def stmt_end(self, i: int) -> int:
        """Index one past the end of the statement starting at ``i``."""
        toks = self.toks
        if i >= len(toks):
            raise NormalisationError("statement expected, got end of file")
        tok = toks[i]
        word = tok.text if tok.kind in ("ident", "op") else None
        if word == "{":
            return self.match[i] + 1
        if word == ";":
            return i + 1
        if word == "if":
            j = self.stmt_end(self._paren_end(i + 1))
            if self._is(j, "else"):
                j = self.stmt_end(j + 1)
            return j
        if word in ("for", "while"):
            return self.stmt_end(self._paren_end(i + 1))
        if word in ("switch", "synchronized"):
            return self._block_end(self._paren_end(i + 1))
        if word == "do":
            j = self.stmt_end(i + 1)
            self._expect(j, "while")
            j = self._paren_end(j + 1)
            self._expect(j, ";")
            return j + 1
        if word == "try":
            j = i + 1
            if self._is(j, "("):
                j = self._paren_end(j)
            j = self._block_end(j)
            while self._is(j, "catch"):
                j = self._block_end(self._paren_end(j + 1))
            if self._is(j, "finally"):
                j = self._block_end(j + 1)
            return j
        if tok.kind == "ident" and self._is(i + 1, ":"):
            return self.stmt_end(i + 2)
        if word in ("else", "case", "default", "catch", "finally"):
            raise NormalisationError(f"line {tok.line}: {word!r} cannot start a statement here")
        j = i
        while j < len(toks):
            t = toks[j]
            if t.kind == "op":
                if t.text in _OPEN:
                    j = self.match[j] + 1
                    continue
                if t.text in _CLOSE:
                    break
                if t.text == ";":
                    return j + 1
            j += 1
        raise NormalisationError(f"line {tok.line}: statement has no terminating ';'")

    def seq(self, i: int, end: int) -> list[Token]:
        out: list[Token] = []
        while i < end:
            tok = self.toks[i]
            if tok.kind == "ident" and tok.text in ("if", "for", "while", "do"):
                j = self.stmt_end(i)
                if j > end:
                    raise NormalisationError(f"line {tok.line}: statement overruns its block")
                out.extend(self.control(i, j))
                i = j
            else:
                out.append(tok)
                i += 1
        return out

    def body(self, i: int) -> tuple[list[Token], int]:
        j = self.stmt_end(i)
        if self._is(i, "{"):
            return self.seq(i, j), j
        line = self.toks[i].line
        return [Token("op", "{", line), *self.seq(i, j), Token("op", "}", line)], j

    def control(self, i: int, end: int) -> list[Token]:
        toks = self.toks
        word = toks[i].text
        if word == "do":
            out, j = self.body(i + 1)
            out.insert(0, toks[i])
            # `while (cond) ;` tail of do-while
            out.append(toks[j])
            out.extend(self.seq(j + 1, end))
            return out
        cond_end = self._paren_end(i + 1)
        out = [toks[i], *self.seq(i + 1, cond_end)]
        body, j = self.body(cond_end)
        out.extend(body)
        if word == "if" and self._is(j, "else"):
            out.append(toks[j])
            # `else if` chains are braced too: `else { if ... }`
            body, k = self.body(j + 1)
            out.extend(body)
            if k != end:
                raise NormalisationError("else branch does not end the statement")
        elif j != end:
            raise NormalisationError(f"line {toks[i].line}: inconsistent statement extent")
        return out


def _collapse_semicolons(tokens: list[Token]) -> list[Token]:
    out: list[Token] = []
    depth = 0
    for tok in tokens:
        if tok.kind == "op":
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
            elif tok.text == ";" and depth == 0 and out and out[-1].kind == "op" and out[-1].text == ";":
                continue
        out.append(tok)
    return out


def normalise(tokens: list[Token]) -> list[Token]:
    """Apply the canonical rewrites: braces around single-statement bodies, then
    collapse of repeated ``;`` outside parentheses."""
    norm = _Normaliser(tokens)
    return _collapse_semicolons(norm.seq(0, len(tokens)))


@dataclass(frozen=True)
class SyntacticFingerprint:
    token_hash: int
    token_count: int
    comparable: bool = True
    reason: str = ""

    def matches(self, other: "SyntacticFingerprint") -> bool:
        return (
            self.comparable
            and other.comparable
            and self.token_hash == other.token_hash
            and self.token_count == other.token_count
        )


def _digest(tokens: Iterable[Token]) -> tuple[int, int]:
    h = hashlib.blake2b(digest_size=8)
    count = 0
    for tok in tokens:
        h.update(tok.kind.encode())
        h.update(b"\x00")
        h.update(tok.text.encode("utf-8", "surrogatepass"))
        h.update(b"\x01")
        count += 1
    return int.from_bytes(h.digest(), "big"), count


def fingerprint_file(source_text: str) -> SyntacticFingerprint:
    try:
        tokens = normalise(tokenize(source_text))
    except (LexError, NormalisationError) as exc:
        return SyntacticFingerprint(0, 0, comparable=False, reason=str(exc))
    digest, count = _digest(tokens)
    return SyntacticFingerprint(digest, count)


FileReader = Callable[[CommitId, str, str], "str | None"]
"""``(commit, path, side)`` -> source text, where side is ``"before"`` or ``"after"``.

Returning None or raising marks the file unreadable at that side.
"""


def is_semantic_preserving(
    commit: CommitId, failure_relevant_files: Iterable[str], file_reader: FileReader
) -> bool:
    files = sorted(set(failure_relevant_files))
    if not files:
        # nothing to compare; keeping the commit is the sound choice
        return False
    for path in files:
        try:
            before = file_reader(commit, path, "before")
            after = file_reader(commit, path, "after")
        except Exception as exc:  # unreadable side: treat as non-comparable
            log.debug("cannot read %s at %s: %s", path, commit.hash, exc)
            return False
        if before is None or after is None:
            return False
        if not fingerprint_file(before).matches(fingerprint_file(after)):
            return False
    return True


def failure_relevant_files(
    commit: CommitId, e_f: Iterable[ElementId], evolve: EvolveRelation
) -> set[str]:
    """Paths (as of ``commit``) of files holding elements of E_F evolved by ``commit``."""
    return {
        evolve.path_at(e, commit) for e in e_f if evolve.evolves(commit, e)
    }


def filter_commits(
    c_f: Iterable[CommitId],
    e_f: Iterable[ElementId],
    evolve: EvolveRelation,
    file_reader: FileReader,
    jobs: int = 1,
) -> tuple[set[CommitId], set[CommitId]]:
    """Split C_F into ``(C_BIC, C_SP)``."""
    commits = sorted(set(c_f), key=lambda c: c.recency_key)
    e_f = sorted(set(e_f))

    def check(c: CommitId) -> bool:
        return is_semantic_preserving(c, failure_relevant_files(c, e_f, evolve), file_reader)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            verdicts = list(pool.map(check, commits))
    else:
        verdicts = [check(c) for c in commits]
    c_sp = {c for c, sp in zip(commits, verdicts) if sp}
    return set(commits) - c_sp, c_sp
