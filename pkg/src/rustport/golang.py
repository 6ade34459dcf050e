"""Tokenizer and declaration-level parser for Go source files.

The pipeline never needs full Go semantics: it partitions files into
top-level declarations, reads signatures, struct fields and interface
method sets, and scans identifier usage. This module provides exactly
that surface, with byte offsets kept throughout so fragment texts are
verbatim slices of the original files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError

GO_KEYWORDS = frozenset(
    """break case chan const continue default defer else fallthrough for func go goto
    if import interface map package range return select struct switch type var""".split()
)

# longest-match first
_OPERATORS = [
    "<<=", ">>=", "&^=", "...",
    "&&", "||", "<-", "++", "--", "==", "!=", "<=", ">=", ":=", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "&^",
    "+", "-", "*", "/", "%", "&", "|", "^", "<", ">", "=", "!", "(", ")",
    "[", "]", "{", "}", ",", ";", ".", ":",
]


@dataclass
class Token:
    kind: str  # ident | keyword | int | float | string | char | op | comment
    text: str
    line: int
    col: int
    offset: int

    @property
    def end(self) -> int:
        return self.offset + len(self.text)


def tokenize(src: str, file: str = "<src>") -> list[Token]:
    """Tokenize Go source. Comments are kept as tokens of kind 'comment'."""
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)

    def err(msg: str) -> ParseError:
        return ParseError(file, (line, col), msg)

    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        start, sl, sc = i, line, col
        if c == "/" and i + 1 < n and src[i + 1] == "/":
            j = src.find("\n", i)
            j = n if j < 0 else j
            toks.append(Token("comment", src[start:j], sl, sc, start))
            col += j - i
            i = j
            continue
        if c == "/" and i + 1 < n and src[i + 1] == "*":
            j = src.find("*/", i + 2)
            if j < 0:
                raise err("unterminated block comment")
            j += 2
            chunk = src[start:j]
            toks.append(Token("comment", chunk, sl, sc, start))
            nl = chunk.count("\n")
            if nl:
                line += nl
                col = len(chunk) - chunk.rfind("\n")
            else:
                col += len(chunk)
            i = j
            continue
        if c == "`":
            j = src.find("`", i + 1)
            if j < 0:
                raise err("unterminated raw string")
            j += 1
            chunk = src[start:j]
            toks.append(Token("string", chunk, sl, sc, start))
            nl = chunk.count("\n")
            if nl:
                line += nl
                col = len(chunk) - chunk.rfind("\n")
            else:
                col += len(chunk)
            i = j
            continue
        if c == '"' or c == "'":
            j = i + 1
            while j < n:
                if src[j] == "\\":
                    j += 2
                    continue
                if src[j] == c:
                    break
                if src[j] == "\n":
                    raise err("newline in string literal")
                j += 1
            if j >= n:
                raise err("unterminated string literal")
            j += 1
            toks.append(Token("string" if c == '"' else "char", src[start:j], sl, sc, start))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            is_float = False
            if src.startswith(("0x", "0X"), i):
                j += 2
                while j < n and (src[j] in "0123456789abcdefABCDEF_"):
                    j += 1
            else:
                while j < n and (src[j].isdigit() or src[j] == "_"):
                    j += 1
                if j < n and src[j] == ".":
                    if not src.startswith("...", j):
                        is_float = True
                        j += 1
                        while j < n and (src[j].isdigit() or src[j] == "_"):
                            j += 1
                if j < n and src[j] in "eE":
                    is_float = True
                    j += 1
                    if j < n and src[j] in "+-":
                        j += 1
                    while j < n and src[j].isdigit():
                        j += 1
            toks.append(Token("float" if is_float else "int", src[start:j], sl, sc, start))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[start:j]
            kind = "keyword" if word in GO_KEYWORDS else "ident"
            toks.append(Token(kind, word, sl, sc, start))
            col += j - i
            i = j
            continue
        for op in _OPERATORS:
            if src.startswith(op, i):
                toks.append(Token("op", op, sl, sc, start))
                col += len(op)
                i += len(op)
                break
        else:
            raise err(f"unexpected character {c!r}")
    return toks


def code_tokens(toks: list[Token]) -> list[Token]:
    return [t for t in toks if t.kind != "comment"]


@dataclass
class GoSignature:
    """Parsed function/interface-method signature."""

    params: list[tuple[str, str]] = field(default_factory=list)  # (name, type text)
    results: list[str] = field(default_factory=list)

    @property
    def returns_error(self) -> bool:
        return bool(self.results) and self.results[-1] == "error"


@dataclass
class GoDecl:
    """One top-level declaration (one fragment-to-be)."""

    kind: str  # global | struct | interface | func | method
    name: str
    start: int  # byte offset into the file
    end: int
    start_line: int
    end_line: int
    receiver_name: str = ""
    receiver_type: str = ""  # base type name, pointer stripped
    receiver_is_pointer: bool = False
    signature: GoSignature | None = None
    struct_fields: list[tuple[str, str]] = field(default_factory=list)
    interface_methods: list[tuple[str, GoSignature]] = field(default_factory=list)
    var_type: str = ""  # declared type text for globals ('' if inferred)
    var_init: str = ""  # initializer expression text ('' if none)
    var_init_is_call: bool = False
    is_const: bool = False
    in_group: bool = False  # entry of a parenthesized var/const/type group


@dataclass
class GoFile:
    path: str
    package: str
    source: str
    decls: list[GoDecl]
    imports: list[str]
    metadata_spans: list[tuple[int, int]]  # retained non-fragment byte ranges


def normalize_type(text: str) -> str:
    """Comparison form of a type expression (whitespace-insensitive).

    Safe for the supported type grammar (named types, pointers, slices,
    arrays, maps); space is preserved only where two words would fuse.
    """
    toks = code_tokens(tokenize(text))
    out: list[str] = []
    for t in toks:
        if out and out[-1][-1].isalnum() and (t.text[0].isalnum() or t.text[0] == "_"):
            out.append(" ")
        out.append(t.text)
    return "".join(out)


class _DeclParser:
    """Splits one file's token stream into top-level declarations."""

    def __init__(self, src: str, toks: list[Token], file: str):
        self.src = src
        self.toks = [t for t in toks if t.kind != "comment"]
        self.file = file
        self.pos = 0

    # -- token helpers -------------------------------------------------
    def peek(self, k: int = 0) -> Token | None:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            raise ParseError(self.file, (0, 0), "unexpected end of file")
        self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            raise ParseError(self.file, (t.line, t.col), f"expected {text!r}, found {t.text!r}")
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text

    def slice(self, a: Token, b: Token) -> str:
        return self.src[a.offset : b.end]

    def skip_balanced(self, open_tok: str, close_tok: str) -> Token:
        """Consume from the current `open_tok` to its matching close; return the close token."""
        t = self.expect(open_tok)
        depth = 1
        while depth:
            t = self.next()
            if t.text == open_tok:
                depth += 1
            elif t.text == close_tok:
                depth -= 1
        return t

    # -- type expressions ----------------------------------------------
    def parse_type(self) -> str:
        """Consume one type expression, returning its source text."""
        start = self.peek()
        if start is None:
            raise ParseError(self.file, (0, 0), "expected type")
        end = self._type_end()
        return self.slice(start, end)

    def _type_end(self) -> Token:
        t = self.next()
        if t.text == "*":
            return self._type_end()
        if t.text == "[":
            # array or slice: [N]T or []T
            while not self.at("]"):
                self.next()
            self.expect("]")
            return self._type_end()
        if t.text == "map":
            self.expect("[")
            depth = 1
            while depth:
                nt = self.next()
                if nt.text == "[":
                    depth += 1
                elif nt.text == "]":
                    depth -= 1
            return self._type_end()
        if t.text == "...":
            return self._type_end()
        if t.text in ("struct", "interface"):
            return self.skip_balanced("{", "}")
        if t.text == "func":
            end = self.skip_balanced("(", ")")
            nxt = self.peek()
            if nxt is not None and nxt.text == "(":
                return self.skip_balanced("(", ")")
            if nxt is not None and (nxt.kind in ("ident",) or nxt.text in ("*", "[", "map")):
                return self._type_end()
            return end
        if t.kind in ("ident", "keyword"):
            # qualified name pkg.Type
            end = t
            while self.at(".") and self.peek(1) is not None and self.peek(1).kind == "ident":
                self.next()
                end = self.next()
            return end
        raise ParseError(self.file, (t.line, t.col), f"unexpected token {t.text!r} in type")

    # -- signatures ------------------------------------------------------
    def parse_params(self) -> list[tuple[str, str]]:
        """Parse a parenthesized parameter list into (name, type) pairs."""
        self.expect("(")
        groups: list[tuple[list[str], str]] = []
        while not self.at(")"):
            names: list[str] = []
            # lookahead: `ident ,` or `ident TYPE` means named params
            t = self.peek()
            if t is not None and t.kind == "ident" and self.peek(1) is not None and self.peek(1).text == ",":
                # could still be a list of unnamed named-types; resolved at group end
                while True:
                    names.append(self.next().text)
                    if self.at(","):
                        self.next()
                        nxt = self.peek()
                        if nxt is not None and nxt.kind == "ident" and self.peek(1) is not None and self.peek(1).text in (",",):
                            continue
                        if nxt is not None and nxt.kind == "ident" and self.peek(1) is not None and self.peek(1).text in (")",):
                            names.append(self.next().text)
                            break
                        continue
                    break
                if self.at(")") or self.at(","):
                    # it was an unnamed list of type names after all
                    groups.extend(([], normalize_type(n)) for n in names)
                    if self.at(","):
                        self.next()
                    continue
                ty = self.parse_type()
                groups.append((names, normalize_type(ty)))
            elif (
                t is not None
                and t.kind == "ident"
                and self.peek(1) is not None
                and (self.peek(1).kind in ("ident", "keyword") or self.peek(1).text in ("*", "[", "map", "...", "func"))
                and self.peek(1).text != "."
            ):
                name = self.next().text
                ty = self.parse_type()
                groups.append(([name], normalize_type(ty)))
            else:
                ty = self.parse_type()
                groups.append(([], normalize_type(ty)))
            if self.at(","):
                self.next()
        self.expect(")")
        params: list[tuple[str, str]] = []
        for names, ty in groups:
            if names:
                params.extend((nm, ty) for nm in names)
            else:
                params.append(("", ty))
        return params

    def parse_results(self) -> list[str]:
        t = self.peek()
        if t is None or t.text in ("{", ";", ")", "}") or t.line != self.toks[self.pos - 1].line:
            return []
        if t.text == "(":
            pairs = self.parse_params()
            return [ty for _, ty in pairs]
        return [normalize_type(self.parse_type())]

    def parse_signature(self) -> GoSignature:
        sig = GoSignature()
        sig.params = self.parse_params()
        sig.results = self.parse_results()
        return sig

    # -- declarations ----------------------------------------------------
    def parse_struct_body(self) -> list[tuple[str, str]]:
        self.expect("{")
        fields: list[tuple[str, str]] = []
        while not self.at("}"):
            names = [self.next().text]
            while self.at(","):
                self.next()
                names.append(self.next().text)
            ty = normalize_type(self.parse_type())
            t = self.peek()
            if t is not None and t.kind == "string":  # field tag
                self.next()
            fields.extend((nm, ty) for nm in names)
            if self.at(";"):
                self.next()
        self.expect("}")
        return fields

    def parse_interface_body(self) -> list[tuple[str, GoSignature]]:
        self.expect("{")
        methods: list[tuple[str, GoSignature]] = []
        while not self.at("}"):
            name = self.next().text
            if self.at("("):
                methods.append((name, self.parse_signature()))
            # embedded interface names are recorded by the dependency scan, not here
            if self.at(";"):
                self.next()
        self.expect("}")
        return methods

    def parse_file(self) -> tuple[str, list[GoDecl], list[str]]:
        package = ""
        decls: list[GoDecl] = []
        imports: list[str] = []
        while self.peek() is not None:
            t = self.peek()
            if t.text == "package":
                self.next()
                package = self.next().text
            elif t.text == "import":
                self.next()
                if self.at("("):
                    self.next()
                    while not self.at(")"):
                        tok = self.next()
                        if tok.kind == "string":
                            imports.append(tok.text.strip('`"'))
                    self.expect(")")
                else:
                    while True:
                        tok = self.next()
                        if tok.kind == "string":
                            imports.append(tok.text.strip('`"'))
                            break
            elif t.text in ("var", "const"):
                decls.extend(self.parse_var_or_const(t.text))
            elif t.text == "type":
                decls.extend(self.parse_type_decl())
            elif t.text == "func":
                decls.append(self.parse_func())
            elif t.text == ";":
                self.next()
            else:
                raise ParseError(self.file, (t.line, t.col), f"unexpected top-level token {t.text!r}")
        return package, decls, imports

    def parse_var_spec(self, is_const: bool, in_group: bool) -> GoDecl:
        start = self.peek()
        name = self.next().text
        var_type = ""
        var_init = ""
        init_is_call = False
        t = self.peek()
        if t is not None and t.text != "=" and not (in_group and t.line != start.line):
            if t.text not in (")", ";"):
                var_type = normalize_type(self.parse_type())
        end = self.toks[self.pos - 1]
        if self.at("="):
            self.next()
            first = self.peek()
            end = self._expr_end()
            var_init = self.slice(first, end)
            init_is_call = self._init_is_call(first, end)
        return GoDecl(
            kind="global",
            name=name,
            start=start.offset,
            end=end.end,
            start_line=start.line,
            end_line=end.line,
            var_type=var_type,
            var_init=var_init,
            var_init_is_call=init_is_call,
            is_const=is_const,
            in_group=in_group,
        )

    def _expr_end(self) -> Token:
        """Consume one expression (up to a top-level newline boundary, `;`, `)` or `,`)."""
        depth = 0
        last = None
        while True:
            t = self.peek()
            if t is None:
                break
            if depth == 0 and last is not None and t.text in (";", ")", "}"):
                break
            if depth == 0 and last is not None and t.line != last.line and not self._continues_expr(last):
                break
            t = self.next()
            if t.text in ("(", "[", "{"):
                depth += 1
            elif t.text in (")", "]", "}"):
                depth -= 1
            last = t
        if last is None:
            raise ParseError(self.file, (0, 0), "expected expression")
        return last

    @staticmethod
    def _continues_expr(last: Token) -> bool:
        return last.kind == "op" and last.text not in (")", "]", "}", "++", "--")

    def _init_is_call(self, first: Token, end: Token) -> bool:
        """True when the initializer is a plain call expression f(...) ending the entry."""
        i = self.toks.index(first)
        j = self.toks.index(end)
        window = self.toks[i : j + 1]
        if len(window) < 3 or window[-1].text != ")":
            return False
        if window[0].kind != "ident":
            return False
        k = 1
        while k < len(window) and window[k].text == "." and window[k - 1].kind == "ident":
            k += 2
        return k < len(window) and window[k].text == "("

    def parse_var_or_const(self, keyword: str) -> list[GoDecl]:
        kw = self.expect(keyword)
        is_const = keyword == "const"
        if self.at("("):
            self.next()
            out = []
            while not self.at(")"):
                if self.at(";"):
                    self.next()
                    continue
                out.append(self.parse_var_spec(is_const, in_group=True))
            self.expect(")")
            return out
        d = self.parse_var_spec(is_const, in_group=False)
        d.start = kw.offset
        d.start_line = kw.line
        return [d]

    def parse_type_spec(self, start: Token) -> GoDecl:
        name_tok = self.next()
        name = name_tok.text
        if self.at("="):  # alias
            self.next()
            end = self._type_end()
            return GoDecl(
                kind="global", name=name, start=start.offset, end=end.end,
                start_line=start.line, end_line=end.line,
                var_type=self.slice(name_tok, end),
            )
        t = self.peek()
        if t is not None and t.text == "struct":
            self.next()
            fields = self.parse_struct_body()
            end = self.toks[self.pos - 1]
            return GoDecl(
                kind="struct", name=name, start=start.offset, end=end.end,
                start_line=start.line, end_line=end.line, struct_fields=fields,
            )
        if t is not None and t.text == "interface":
            self.next()
            methods = self.parse_interface_body()
            end = self.toks[self.pos - 1]
            return GoDecl(
                kind="interface", name=name, start=start.offset, end=end.end,
                start_line=start.line, end_line=end.line, interface_methods=methods,
            )
        # named type over an existing type: treated like a global-kind leaf
        end = self._type_end()
        return GoDecl(
            kind="global", name=name, start=start.offset, end=end.end,
            start_line=start.line, end_line=end.line, var_type=self.slice(t, end),
        )

    def parse_type_decl(self) -> list[GoDecl]:
        kw = self.expect("type")
        if self.at("("):
            self.next()
            out = []
            while not self.at(")"):
                if self.at(";"):
                    self.next()
                    continue
                spec_start = self.peek()
                d = self.parse_type_spec(spec_start)
                d.in_group = True
                out.append(d)
            self.expect(")")
            return out
        return [self.parse_type_spec(kw)]

    def parse_func(self) -> GoDecl:
        kw = self.expect("func")
        receiver_name = receiver_type = ""
        receiver_ptr = False
        if self.at("("):
            self.next()
            rn = self.next()
            if rn.text == "*":
                receiver_ptr = True
                receiver_type = self.next().text
            elif self.at("*"):
                receiver_name = rn.text
                self.next()
                receiver_ptr = True
                receiver_type = self.next().text
            elif self.peek() is not None and self.peek().text == ")":
                receiver_type = rn.text
            else:
                receiver_name = rn.text
                receiver_type = self.next().text
            self.expect(")")
        name = self.next().text
        sig = self.parse_signature()
        end = self.skip_balanced("{", "}")
        return GoDecl(
            kind="method" if receiver_type else "func",
            name=name,
            start=kw.offset,
            end=end.end,
            start_line=kw.line,
            end_line=end.line,
            receiver_name=receiver_name,
            receiver_type=receiver_type,
            receiver_is_pointer=receiver_ptr,
            signature=sig,
        )


def parse_go_file(source: str, path: str = "<src>") -> GoFile:
    toks = tokenize(source, path)
    parser = _DeclParser(source, toks, path)
    package, decls, imports = parser.parse_file()
    spans = sorted((d.start, d.end) for d in decls)
    metadata: list[tuple[int, int]] = []
    cursor = 0
    for a, b in spans:
        if a > cursor:
            metadata.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < len(source):
        metadata.append((cursor, len(source)))
    return GoFile(path=path, package=package, source=source, decls=decls,
                  imports=imports, metadata_spans=metadata)


def identifier_uses(source: str, skip_selectors: bool = True) -> list[str]:
    """All identifier tokens in `source`, excluding field/method selector position
    when `skip_selectors` (an ident immediately preceded by '.')."""
    toks = code_tokens(tokenize(source))
    out = []
    for i, t in enumerate(toks):
        if t.kind != "ident":
            continue
        if skip_selectors and i > 0 and toks[i - 1].text == ".":
            continue
        out.append(t.text)
    return out


def selector_uses(source: str) -> list[str]:
    """Identifiers appearing in selector position (`x.Name`)."""
    toks = code_tokens(tokenize(source))
    return [t.text for i, t in enumerate(toks)
            if t.kind == "ident" and i > 0 and toks[i - 1].text == "."]
