"""Parse-free C/C++ lexer producing anonymized token sequences.

Each function is reduced to a canonical stream of tokens in which variable
names are replaced by per-function first-appearance indices, string literals
collapse to a single ``str`` token, char literals to ``charlit``, float
literals to ``float``, and integer literals are emitted digit by digit.
The space-separated canonical text of a sequence is the deduplication key
used downstream.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class TokenCategory(Enum):
    KEYWORD = "keyword"
    TYPE = "type"
    API_CALL = "api_call"
    IDENTIFIER = "identifier"
    OPERATOR = "operator"
    NUMBER = "number"
    FLOAT_LITERAL = "float_literal"
    CHAR_LITERAL = "char_literal"
    STRING_LITERAL = "string_literal"
    PREPROCESSOR = "preprocessor"
    PUNCTUATION = "punctuation"


@dataclass(frozen=True)
class Token:
    category: TokenCategory
    text: str

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class FunctionSpan:
    """Location of one function definition inside a source file."""

    path: str
    name: str
    start_line: int
    end_line: int


@dataclass
class TokenSequence:
    function_id: str
    tokens: list[Token]
    span: Optional[FunctionSpan] = None


class LexError(ValueError):
    """Raised for inputs the lexer cannot recover from.

    ``offset`` is the byte offset of the offending construct, ``line`` the
    1-based line number when known.
    """

    def __init__(self, message: str, offset: int | None = None, line: int | None = None):
        self.offset = offset
        self.line = line
        parts = [message]
        if offset is not None:
            parts.append(f"at byte offset {offset}")
        if line is not None:
            parts.append(f"(line {line})")
        super().__init__(" ".join(parts))


# C11 keywords plus the C++14 additions. Built-in type names are listed
# separately and take precedence during classification.
_C_KEYWORDS = """
auto break case const continue default do else enum extern for goto if inline
register restrict return sizeof static struct switch typedef union volatile
while _Alignas _Alignof _Atomic _Bool _Complex _Generic _Imaginary _Noreturn
_Static_assert _Thread_local
"""

_CPP_KEYWORDS = """
alignas alignof and and_eq asm bitand bitor catch char16_t char32_t class
compl constexpr const_cast decltype delete dynamic_cast explicit export false
friend mutable namespace new noexcept not not_eq nullptr operator or or_eq
private protected public reinterpret_cast static_assert static_cast template
this thread_local throw true try typeid typename using virtual wchar_t xor
xor_eq
"""

DEFAULT_KEYWORDS = frozenset(_C_KEYWORDS.split()) | frozenset(_CPP_KEYWORDS.split())

DEFAULT_TYPES = frozenset(
    "int char bool float double void long short unsigned signed size_t".split()
)

# Common libc entry points whose call sites keep their names; any other name
# followed by '(' is reduced to an anonymous call token.
DEFAULT_API_CALLS = frozenset(
    """
    malloc calloc realloc free memcpy memmove memset memcmp
    strcpy strncpy strcat strncat strcmp strncmp strlen strchr strrchr strstr
    strtok strdup sprintf snprintf printf fprintf vsnprintf
    scanf sscanf fscanf gets fgets puts fputs getchar putchar getc putc
    fopen fclose fread fwrite fseek ftell rewind fflush
    exit abort atexit atoi atol atoll atof strtol strtoul strtod
    rand srand qsort bsearch abs labs
    open close read write lseek stat fstat
    socket bind listen accept connect send recv setsockopt
    fork execve waitpid kill signal
    """.split()
)


@dataclass(frozen=True)
class LexerConfig:
    keywords: frozenset[str] = DEFAULT_KEYWORDS
    types: frozenset[str] = DEFAULT_TYPES
    api_calls: frozenset[str] = DEFAULT_API_CALLS

    @staticmethod
    def from_file(path: str) -> "LexerConfig":
        """Load name lists from a JSON file; missing keys keep the defaults."""
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return LexerConfig.from_dict(raw)

    @staticmethod
    def from_dict(raw: dict) -> "LexerConfig":
        return LexerConfig(
            keywords=frozenset(raw.get("keywords", DEFAULT_KEYWORDS)),
            types=frozenset(raw.get("types", DEFAULT_TYPES)),
            api_calls=frozenset(raw.get("api_calls", DEFAULT_API_CALLS)),
        )


DEFAULT_CONFIG = LexerConfig()

_NAME_RE = re.compile(r"[A-Za-z_]\w*")
_FLOAT_RE = re.compile(r"(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?[fFlL]?|\d+[eE][+-]?\d+[fFlL]?")
_HEX_RE = re.compile(r"0[xX][0-9a-fA-F]+[uUlL]*")
_BIN_RE = re.compile(r"0[bB][01]+[uUlL]*")
_INT_RE = re.compile(r"\d+[uUlL]*")

# Multi-character operators first, longest match wins.
_MULTI_OPS = (
    "<<=", ">>=", "->*",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", ".*",
)
_SINGLE_OPS = set("+-*/%=<>!&|^~?:.")
_PUNCTUATION = set("()[]{};,")


def _skip_line_comment(src: str, pos: int) -> int:
    end = src.find("\n", pos)
    return len(src) if end < 0 else end


def _skip_block_comment(src: str, pos: int) -> int:
    end = src.find("*/", pos + 2)
    if end < 0:
        raise LexError("unterminated comment", offset=pos)
    return end + 2


def _skip_literal(src: str, pos: int, quote: str) -> int:
    """Advance past a quoted literal starting at ``pos``; returns end offset."""
    i = pos + 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\\":
            i += 2
            continue
        if c == quote:
            return i + 1
        i += 1
    kind = "string literal" if quote == '"' else "character literal"
    raise LexError(f"unterminated {kind}", offset=pos)


def _skip_trivia(src: str, pos: int) -> int:
    """Skip whitespace and comments; stops (without error) at an unterminated
    comment so the main loop reports it with the right offset."""
    n = len(src)
    while pos < n:
        c = src[pos]
        if c.isspace():
            pos += 1
        elif src.startswith("//", pos):
            pos = _skip_line_comment(src, pos)
        elif src.startswith("/*", pos):
            end = src.find("*/", pos + 2)
            if end < 0:
                return n
            pos = end + 2
        else:
            break
    return pos


def _is_call_site(src: str, pos: int) -> bool:
    pos = _skip_trivia(src, pos)
    return pos < len(src) and src[pos] == "("


def lex(source: str, function_id: str = "<anon>", config: LexerConfig = DEFAULT_CONFIG) -> TokenSequence:
    """Lex one function's source text into its canonical token sequence.

    Comments are dropped. Names become keyword, type, call, or indexed
    variable tokens; literals are anonymized as described in the module
    docstring. Raises :class:`LexError` for a string or comment left open at
    end of input.
    """
    tokens: list[Token] = []
    var_indices: dict[str, int] = {}
    pos = 0
    n = len(source)

    def add(category: TokenCategory, text: str) -> None:
        tokens.append(Token(category, text))

    while pos < n:
        c = source[pos]

        if c.isspace():
            pos += 1
            continue

        if source.startswith("//", pos):
            pos = _skip_line_comment(source, pos)
            continue
        if source.startswith("/*", pos):
            pos = _skip_block_comment(source, pos)
            continue

        if c == '"':
            pos = _skip_literal(source, pos, '"')
            add(TokenCategory.STRING_LITERAL, "str")
            continue
        if c == "'":
            pos = _skip_literal(source, pos, "'")
            add(TokenCategory.CHAR_LITERAL, "charlit")
            continue

        if c == "#":
            # Directive name becomes the token; the rest of the (possibly
            # continued) line is dropped.
            pos += 1
            while pos < n and source[pos] in " \t":
                pos += 1
            m = _NAME_RE.match(source, pos)
            name = m.group() if m else ""
            add(TokenCategory.PREPROCESSOR, f"pp:{name}")
            while pos < n:
                end = source.find("\n", pos)
                if end < 0:
                    pos = n
                    break
                if source[pos:end].rstrip().endswith("\\"):
                    pos = end + 1
                else:
                    pos = end
                    break
            continue

        if c.isdigit() or (c == "." and pos + 1 < n and source[pos + 1].isdigit()):
            m = _FLOAT_RE.match(source, pos)
            if m:
                add(TokenCategory.FLOAT_LITERAL, "float")
                pos = m.end()
                continue
            m = _HEX_RE.match(source, pos) or _BIN_RE.match(source, pos)
            if m:
                text = m.group().rstrip("uUlL")
                add(TokenCategory.NUMBER, f"num:{text[:2].lower()}")
                for digit in text[2:]:
                    add(TokenCategory.NUMBER, f"num:{digit.lower()}")
                pos = m.end()
                continue
            m = _INT_RE.match(source, pos)
            digits = m.group().rstrip("uUlL")
            if digits[0] == "0" and len(digits) > 1:
                # Octal: prefix as one token, remaining digits one by one.
                add(TokenCategory.NUMBER, "num:0")
                digits = digits[1:]
            for digit in digits:
                add(TokenCategory.NUMBER, f"num:{digit}")
            pos = m.end()
            continue

        m = _NAME_RE.match(source, pos)
        if m:
            name = m.group()
            pos = m.end()
            if name in config.types:
                add(TokenCategory.TYPE, f"type:{name}")
            elif name in config.keywords:
                add(TokenCategory.KEYWORD, f"kw:{name}")
            elif _is_call_site(source, pos):
                if name in config.api_calls:
                    add(TokenCategory.API_CALL, f"call:{name}")
                else:
                    add(TokenCategory.API_CALL, "call:<unk>")
            else:
                index = var_indices.setdefault(name, len(var_indices))
                add(TokenCategory.IDENTIFIER, f"var:{index}")
            continue

        if source.startswith("...", pos):
            add(TokenCategory.PUNCTUATION, "punct:...")
            pos += 3
            continue

        for op in _MULTI_OPS:
            if source.startswith(op, pos):
                add(TokenCategory.OPERATOR, f"op:{op}")
                pos += len(op)
                break
        else:
            if c in _PUNCTUATION:
                add(TokenCategory.PUNCTUATION, f"punct:{c}")
            elif c in _SINGLE_OPS:
                add(TokenCategory.OPERATOR, f"op:{c}")
            else:
                # Stray characters (@, $, backslash, ...) are kept as
                # punctuation so every input character lands in a token.
                add(TokenCategory.PUNCTUATION, f"punct:{c}")
            pos += 1

    return TokenSequence(function_id=function_id, tokens=tokens)


# --- translation-unit splitting ------------------------------------------

# Names that can directly precede '(' at top level without starting a
# function definition.
_NOT_FUNCTION_NAMES = frozenset({"if", "for", "while", "switch", "return", "sizeof", "do"})

_TAIL_NAME_RE = re.compile(r"((?:[A-Za-z_]\w*::)*~?[A-Za-z_]\w*)\s*$")


def _line_of(src: str, pos: int) -> int:
    return src.count("\n", 0, pos) + 1


def _match_paren(src: str, pos: int) -> int:
    """Return offset just past the ')' matching the '(' at ``pos``."""
    depth = 0
    n = len(src)
    while pos < n:
        c = src[pos]
        if src.startswith("//", pos):
            pos = _skip_line_comment(src, pos)
            continue
        if src.startswith("/*", pos):
            end = src.find("*/", pos + 2)
            pos = n if end < 0 else end + 2
            continue
        if c in "\"'":
            pos = _skip_literal(src, pos, c)
            continue
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return pos + 1
        pos += 1
    return n


def _match_brace(src: str, pos: int) -> int:
    """Return offset just past the '}' matching the '{' at ``pos``, or -1 at EOF."""
    depth = 0
    n = len(src)
    while pos < n:
        c = src[pos]
        if src.startswith("//", pos):
            pos = _skip_line_comment(src, pos)
            continue
        if src.startswith("/*", pos):
            end = src.find("*/", pos + 2)
            pos = n if end < 0 else end + 2
            continue
        if c in "\"'":
            try:
                pos = _skip_literal(src, pos, c)
            except LexError:
                pos = n
            continue
        if c == "#":
            pos = _skip_line_comment(src, pos)
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return pos + 1
        pos += 1
    return -1


_TRAILER_CHARS = set("-:*&<>,[]")


def _scan_trailer(src: str, pos: int) -> tuple[str, int]:
    """Classify what follows a parameter list: 'function' when a body opens.

    Returns (kind, offset) with kind one of 'function', 'other'; for
    'function' the offset points at the opening '{'.
    """
    n = len(src)
    while True:
        pos = _skip_trivia(src, pos)
        if pos >= n:
            return "other", pos
        c = src[pos]
        if c == "{":
            return "function", pos
        if c in ";=":
            return "other", pos
        if c == "(":
            pos = _match_paren(src, pos)
            continue
        if c in _TRAILER_CHARS:
            pos += 1
            continue
        m = _NAME_RE.match(src, pos)
        if m:
            pos = m.end()
            continue
        return "other", pos


def find_functions(text: str) -> tuple[list[tuple[str, int, int]], list[LexError]]:
    """Locate top-level function definitions by brace matching.

    Returns ``(spans, errors)`` where each span is ``(name, start, end)``
    offsets covering the full definition text. A function whose braces never
    balance produces a :class:`LexError` naming its header line; functions
    found before it are still reported.
    """
    spans: list[tuple[str, int, int]] = []
    errors: list[LexError] = []
    n = len(text)
    pos = 0
    segment_start = 0

    while pos < n:
        c = text[pos]
        if c.isspace():
            pos += 1
            continue
        if text.startswith("//", pos):
            pos = _skip_line_comment(text, pos)
            continue
        if text.startswith("/*", pos):
            end = text.find("*/", pos + 2)
            pos = n if end < 0 else end + 2
            continue
        if c == "#":
            # Directive lines (with continuations) separate top-level items.
            while pos < n:
                end = text.find("\n", pos)
                if end < 0:
                    pos = n
                    break
                if text[pos:end].rstrip().endswith("\\"):
                    pos = end + 1
                else:
                    pos = end + 1
                    break
            segment_start = pos
            continue
        if c in "\"'":
            try:
                pos = _skip_literal(text, pos, c)
            except LexError:
                pos = n
            continue
        if c == ";":
            pos += 1
            segment_start = pos
            continue
        if c == "}":
            pos += 1
            segment_start = pos
            continue
        if c == "(":
            m = _TAIL_NAME_RE.search(text, segment_start, pos)
            name = m.group(1) if m else None
            after = _match_paren(text, pos)
            if name is None or name.split("::")[-1] in _NOT_FUNCTION_NAMES:
                pos = after
                continue
            kind, brace = _scan_trailer(text, after)
            if kind != "function":
                pos = after
                continue
            close = _match_brace(text, brace)
            if close < 0:
                errors.append(
                    LexError(
                        f"unbalanced braces in function '{name}'",
                        offset=brace,
                        line=_line_of(text, pos),
                    )
                )
                break
            start = _skip_trivia(text, segment_start)
            spans.append((name, start, close))
            pos = close
            segment_start = close
            continue
        if c == "{":
            # Struct/enum/namespace body or a brace initializer: skip it.
            close = _match_brace(text, pos)
            if close < 0:
                errors.append(
                    LexError("unbalanced braces", offset=pos, line=_line_of(text, pos))
                )
                break
            pos = close
            segment_start = close
            continue
        pos += 1

    return spans, errors


def lex_file(
    text: str,
    path: str = "<memory>",
    revision: str | None = None,
    config: LexerConfig = DEFAULT_CONFIG,
) -> tuple[list[TokenSequence], list[LexError]]:
    """Split a translation unit into functions and lex each independently.

    Variable indices restart for every function. Global declarations and
    bodies of structs/namespaces are skipped. Returns the sequences in
    source order along with any per-function errors.
    """
    spans, errors = find_functions(text)
    sequences: list[TokenSequence] = []
    for name, start, end in spans:
        start_line = _line_of(text, start)
        end_line = _line_of(text, end - 1)
        function_id = f"{path}:{name}:{start_line}"
        if revision:
            function_id += f"@{revision}"
        try:
            seq = lex(text[start:end], function_id=function_id, config=config)
        except LexError as exc:
            errors.append(
                LexError(f"in function '{name}': {exc}", offset=exc.offset, line=start_line)
            )
            continue
        seq.span = FunctionSpan(path=path, name=name, start_line=start_line, end_line=end_line)
        sequences.append(seq)
    return sequences, errors


# --- serialization --------------------------------------------------------

def serialize_tokens(seq: TokenSequence) -> str:
    """Space-separated canonical token text; the dedup key input."""
    return " ".join(t.text for t in seq.tokens)


def serialize_line(seq: TokenSequence) -> str:
    return f"{seq.function_id}\t{serialize_tokens(seq)}"


_PREFIX_CATEGORY = {
    "kw": TokenCategory.KEYWORD,
    "type": TokenCategory.TYPE,
    "call": TokenCategory.API_CALL,
    "var": TokenCategory.IDENTIFIER,
    "op": TokenCategory.OPERATOR,
    "num": TokenCategory.NUMBER,
    "pp": TokenCategory.PREPROCESSOR,
    "punct": TokenCategory.PUNCTUATION,
}

_BARE_CATEGORY = {
    "str": TokenCategory.STRING_LITERAL,
    "charlit": TokenCategory.CHAR_LITERAL,
    "float": TokenCategory.FLOAT_LITERAL,
}


def token_from_text(text: str) -> Token:
    if text in _BARE_CATEGORY:
        return Token(_BARE_CATEGORY[text], text)
    prefix = text.split(":", 1)[0]
    category = _PREFIX_CATEGORY.get(prefix)
    if category is None:
        raise ValueError(f"not a canonical token: {text!r}")
    return Token(category, text)


def parse_line(line: str) -> TokenSequence:
    function_id, _, rest = line.rstrip("\n").partition("\t")
    tokens = [token_from_text(t) for t in rest.split()] if rest else []
    return TokenSequence(function_id=function_id, tokens=tokens)


def write_token_file(seqs: Iterable[TokenSequence], path: str, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for seq in seqs:
            fh.write(serialize_line(seq) + "\n")


def read_token_file(path: str) -> list[TokenSequence]:
    seqs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            seqs.append(parse_line(line))
    return seqs
