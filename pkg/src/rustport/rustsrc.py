"""Item-level parser for generated Rust code.

Rule conclusions are decided by parsing alone, so this module only has to
recognize item structure (statics, structs, enums, traits, impls, free
functions, use declarations) and function signatures. Bodies are carried
as verbatim text so post-processors can rewrite item headers without
touching a single body byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseViolation

RUST_KEYWORDS = frozenset(
    """as break const continue crate dyn else enum extern false fn for if impl in let
    loop match mod move mut pub ref return self Self static struct super trait true
    type unsafe use where while async await""".split()
)

_OPERATORS = [
    "..=", "...", "<<=", ">>=",
    "::", "->", "=>", "..", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>",
    "+", "-", "*", "/", "%", "&", "|", "^", "<", ">", "=", "!", "(", ")",
    "[", "]", "{", "}", ",", ";", ".", ":", "#", "?", "@", "'", "$",
]


@dataclass
class RTok:
    kind: str  # ident | keyword | num | string | char | lifetime | op
    text: str
    line: int
    offset: int

    @property
    def end(self) -> int:
        return self.offset + len(self.text)


def tokenize_rust(src: str) -> list[RTok]:
    toks: list[RTok] = []
    i, line = 0, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            continue
        start, sl = i, line
        if c == "/" and src.startswith("//", i):
            j = src.find("\n", i)
            i = n if j < 0 else j
            continue
        if c == "/" and src.startswith("/*", i):
            j = src.find("*/", i + 2)
            if j < 0:
                raise ParseViolation("unterminated block comment")
            line += src.count("\n", i, j + 2)
            i = j + 2
            continue
        if c == "r" and src.startswith(('r"', "r#"), i):
            j = i + 1
            hashes = 0
            while j < n and src[j] == "#":
                hashes += 1
                j += 1
            if j < n and src[j] == '"':
                closer = '"' + "#" * hashes
                k = src.find(closer, j + 1)
                if k < 0:
                    raise ParseViolation("unterminated raw string")
                k += len(closer)
                line += src.count("\n", i, k)
                toks.append(RTok("string", src[start:k], sl, start))
                i = k
                continue
        if c == '"':
            j = i + 1
            while j < n:
                if src[j] == "\\":
                    j += 2
                    continue
                if src[j] == '"':
                    break
                j += 1
            if j >= n:
                raise ParseViolation("unterminated string literal")
            j += 1
            line += src.count("\n", i, j)
            toks.append(RTok("string", src[start:j], sl, start))
            i = j
            continue
        if c == "'":
            # char literal vs lifetime
            if i + 1 < n and src[i + 1] == "\\":
                j = src.find("'", i + 2)
                if j < 0:
                    raise ParseViolation("unterminated char literal")
                toks.append(RTok("char", src[start : j + 1], sl, start))
                i = j + 1
                continue
            if i + 2 < n and src[i + 2] == "'":
                toks.append(RTok("char", src[start : i + 3], sl, start))
                i += 3
                continue
            j = i + 1
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(RTok("lifetime", src[start:j], sl, start))
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and (src[j].isalnum() or src[j] in "._"):
                if src[j] == "." and not (j + 1 < n and (src[j + 1].isdigit() or src[j + 1] == "_")):
                    break
                j += 1
            toks.append(RTok("num", src[start:j], sl, start))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[start:j]
            toks.append(RTok("keyword" if word in RUST_KEYWORDS else "ident", word, sl, start))
            i = j
            continue
        for op in _OPERATORS:
            if src.startswith(op, i):
                toks.append(RTok("op", op, sl, start))
                i += len(op)
                break
        else:
            raise ParseViolation(f"unexpected character {c!r} at line {line}")
    return toks


def normalize_rust(text: str) -> str:
    """Whitespace/comment-insensitive comparison form of a Rust snippet."""
    toks = tokenize_rust(text)
    out: list[str] = []
    for t in toks:
        if out and (out[-1][-1].isalnum() or out[-1][-1] == "_") and (t.text[0].isalnum() or t.text[0] == "_"):
            out.append(" ")
        out.append(t.text)
    return "".join(out)


@dataclass
class RustFn:
    name: str
    self_param: str  # '', 'self', '&self', '&mut self'
    params: list[tuple[str, str]]  # (pattern, type text)
    ret: str  # return type text, '' for unit
    body: str  # verbatim body including braces
    header: str  # text from (pub) fn to the opening brace (exclusive)
    vis: str = ""

    def signature_text(self) -> str:
        parts = [p for p in [self.self_param] if p]
        parts += [f"{n}: {t}" if n else t for n, t in self.params]
        ret = f" -> {self.ret}" if self.ret else ""
        return f"fn {self.name}({', '.join(parts)}){ret}"

    def normalized_signature(self) -> str:
        return normalize_rust(self.signature_text())


@dataclass
class RustItem:
    kind: str  # use | static | const | struct | enum | trait | impl | fn | mod | macro
    name: str = ""
    vis: str = ""
    text: str = ""  # verbatim item text (attributes included)
    start: int = 0
    end: int = 0
    # static/const
    type_text: str = ""
    init_text: str = ""
    # struct
    fields: list[tuple[str, str, str]] = field(default_factory=list)  # (name, type, vis)
    derives: list[str] = field(default_factory=list)
    # trait
    bounds: list[str] = field(default_factory=list)
    trait_methods: list[RustFn] = field(default_factory=list)
    has_body_items: bool = False
    generics: str = ""
    # impl
    trait_path: str = ""  # '' for inherent impls
    impl_type: str = ""
    fns: list[RustFn] = field(default_factory=list)
    # fn
    fn: RustFn | None = None


class _ItemParser:
    def __init__(self, src: str):
        self.src = src
        self.toks = tokenize_rust(src)
        self.pos = 0

    def peek(self, k: int = 0) -> RTok | None:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> RTok:
        t = self.peek()
        if t is None:
            raise ParseViolation("unexpected end of code")
        self.pos += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text

    def expect(self, text: str) -> RTok:
        t = self.next()
        if t.text != text:
            raise ParseViolation(f"expected {text!r}, found {t.text!r} at line {t.line}")
        return t

    def skip_balanced(self, open_tok: str, close_tok: str) -> RTok:
        t = self.expect(open_tok)
        depth = 1
        while depth:
            t = self.next()
            if t.text == open_tok:
                depth += 1
            elif t.text == close_tok:
                depth -= 1
        return t

    def skip_generics(self) -> str:
        """Consume a <...> group if present; returns its text."""
        if not self.at("<"):
            return ""
        first = self.expect("<")
        depth = 1
        last = first
        while depth:
            t = self.next()
            if t.text == "<":
                depth += 1
            elif t.text == ">":
                depth -= 1
            elif t.text == ">>":
                depth -= 2
            last = t
        return self.src[first.offset : last.end]

    def consume_type(self, stops: tuple[str, ...]) -> str:
        """Consume a type expression until a top-level stop token."""
        first = self.peek()
        depth_angle = depth_paren = 0
        last = None
        while True:
            t = self.peek()
            if t is None:
                break
            if depth_angle == 0 and depth_paren == 0 and t.text in stops:
                break
            t = self.next()
            if t.text == "<":
                depth_angle += 1
            elif t.text == ">":
                depth_angle -= 1
            elif t.text == ">>":
                depth_angle -= 2
            elif t.text in ("(", "["):
                depth_paren += 1
            elif t.text in (")", "]"):
                depth_paren -= 1
            last = t
        if first is None or last is None:
            return ""
        return self.src[first.offset : last.end]

    def parse_attrs(self) -> tuple[int, list[str]]:
        """Consume leading attributes; returns (start offset, derive names)."""
        start = None
        derives: list[str] = []
        while self.at("#"):
            h = self.next()
            if start is None:
                start = h.offset
            if self.at("!"):
                self.next()
            open_b = self.peek()
            close = self.skip_balanced("[", "]")
            attr_text = self.src[open_b.offset : close.end]
            if attr_text.startswith("[derive"):
                inner = attr_text[attr_text.find("(") + 1 : attr_text.rfind(")")]
                derives.extend(p.strip() for p in inner.split(",") if p.strip())
        return (start if start is not None else -1, derives)

    def parse_vis(self) -> str:
        if not self.at("pub"):
            return ""
        t = self.next()
        vis = t.text
        if self.at("("):
            close = self.skip_balanced("(", ")")
            vis = self.src[t.offset : close.end]
        return vis

    def parse_fn(self, attr_start: int, vis: str) -> RustFn:
        kw = self.expect("fn")
        name = self.next().text
        self.skip_generics()
        open_p = self.peek()
        close_p = self.skip_balanced("(", ")")
        params_text = self.src[open_p.offset + 1 : close_p.offset]
        ret = ""
        if self.at("->"):
            self.next()
            ret = self.consume_type(("{", ";", "where"))
        if self.at("where"):
            self.consume_type(("{", ";"))
        header_start = attr_start if attr_start >= 0 else kw.offset
        if self.at(";"):
            semi = self.next()
            header = self.src[header_start : semi.offset]
            fn = _parse_params_into(RustFn(name, "", [], ret.strip(), "", header, vis), params_text)
            return fn
        open_b = self.peek()
        close_b = self.skip_balanced("{", "}")
        header = self.src[header_start : open_b.offset]
        body = self.src[open_b.offset : close_b.end]
        return _parse_params_into(RustFn(name, "", [], ret.strip(), body, header, vis), params_text)

    def parse_items(self) -> list[RustItem]:
        items: list[RustItem] = []
        while self.peek() is not None:
            if self.at(";"):
                self.next()
                continue
            attr_start, derives = self.parse_attrs()
            vis_tok = self.peek()
            vis = self.parse_vis()
            t = self.peek()
            if t is None:
                break
            start = attr_start if attr_start >= 0 else (vis_tok.offset if vis else t.offset)
            if t.text == "use":
                self.next()
                path = self.consume_type((";",))
                end = self.expect(";")
                items.append(RustItem("use", name=path.strip(), vis=vis,
                                      text=self.src[start : end.end], start=start, end=end.end))
            elif t.text in ("static", "const"):
                kind = self.next().text
                if self.at("mut"):
                    self.next()
                name = self.next().text
                self.expect(":")
                type_text = self.consume_type(("=", ";"))
                init = ""
                if self.at("="):
                    self.next()
                    init = self.consume_type((";",))
                end = self.expect(";")
                items.append(RustItem(kind, name=name, vis=vis, type_text=type_text.strip(),
                                      init_text=init.strip(), text=self.src[start : end.end],
                                      start=start, end=end.end))
            elif t.text == "struct":
                self.next()
                name = self.next().text
                generics = self.skip_generics()
                fields: list[tuple[str, str, str]] = []
                if self.at(";"):
                    end = self.next()
                elif self.at("("):
                    end = self.skip_balanced("(", ")")
                    if self.at(";"):
                        end = self.next()
                else:
                    self.expect("{")
                    while not self.at("}"):
                        f_attr, _ = self.parse_attrs()
                        f_vis = self.parse_vis()
                        f_name = self.next().text
                        self.expect(":")
                        f_type = self.consume_type((",", "}"))
                        if self.at(","):
                            self.next()
                        fields.append((f_name, f_type.strip(), f_vis))
                    end = self.expect("}")
                items.append(RustItem("struct", name=name, vis=vis, fields=fields,
                                      derives=derives, generics=generics,
                                      text=self.src[start : end.end], start=start, end=end.end))
            elif t.text == "enum":
                self.next()
                name = self.next().text
                self.skip_generics()
                end = self.skip_balanced("{", "}")
                items.append(RustItem("enum", name=name, vis=vis, derives=derives,
                                      text=self.src[start : end.end], start=start, end=end.end))
            elif t.text == "trait":
                self.next()
                name = self.next().text
                generics = self.skip_generics()
                bounds: list[str] = []
                if self.at(":"):
                    self.next()
                    bound_text = self.consume_type(("{", "where"))
                    bounds = [normalize_rust(b) for b in _split_top(bound_text, "+")]
                self.expect("{")
                methods: list[RustFn] = []
                while not self.at("}"):
                    m_attr, _ = self.parse_attrs()
                    m_vis = self.parse_vis()
                    methods.append(self.parse_fn(m_attr, m_vis))
                end = self.expect("}")
                items.append(RustItem("trait", name=name, vis=vis, bounds=bounds,
                                      trait_methods=methods, generics=generics,
                                      text=self.src[start : end.end], start=start, end=end.end))
            elif t.text == "impl":
                self.next()
                generics = self.skip_generics()
                first_path = self.consume_type(("for", "{", "where"))
                trait_path = ""
                impl_type = first_path.strip()
                if self.at("for"):
                    self.next()
                    trait_path = first_path.strip()
                    impl_type = self.consume_type(("{", "where")).strip()
                if self.at("where"):
                    self.consume_type(("{",))
                self.expect("{")
                fns: list[RustFn] = []
                while not self.at("}"):
                    f_attr, _ = self.parse_attrs()
                    f_vis = self.parse_vis()
                    fns.append(self.parse_fn(f_attr, f_vis))
                end = self.expect("}")
                items.append(RustItem("impl", name=impl_type, vis=vis, trait_path=trait_path,
                                      impl_type=impl_type, fns=fns, generics=generics,
                                      text=self.src[start : end.end], start=start, end=end.end))
            elif t.text == "fn" or (t.text in ("async", "unsafe") and self.peek(1) is not None):
                while self.peek().text in ("async", "unsafe", "extern"):
                    self.next()
                fn = self.parse_fn(attr_start if attr_start >= 0 else start, vis)
                item_end = fn.header is not None and (start + len(self.src[start:])) or 0
                end_off = self.toks[self.pos - 1].end
                items.append(RustItem("fn", name=fn.name, vis=vis, fn=fn,
                                      text=self.src[start:end_off], start=start, end=end_off))
            elif t.text == "mod":
                self.next()
                name = self.next().text
                if self.at(";"):
                    end = self.next()
                else:
                    end = self.skip_balanced("{", "}")
                items.append(RustItem("mod", name=name, vis=vis,
                                      text=self.src[start : end.end], start=start, end=end.end))
            elif t.text == "type":
                self.next()
                name = self.next().text
                self.skip_generics()
                self.expect("=")
                self.consume_type((";",))
                end = self.expect(";")
                items.append(RustItem("typealias", name=name, vis=vis,
                                      text=self.src[start : end.end], start=start, end=end.end))
            else:
                raise ParseViolation(f"unexpected item token {t.text!r} at line {t.line}")
        return items


def _split_top(text: str, sep: str) -> list[str]:
    """Split on `sep` at zero bracket/angle depth."""
    toks = tokenize_rust(text)
    parts: list[list[str]] = [[]]
    depth = 0
    for t in toks:
        if t.text in ("<", "(", "["):
            depth += 1
        elif t.text in (">", ")", "]"):
            depth -= 1
        elif t.text == ">>":
            depth -= 2
        if t.text == sep and depth == 0:
            parts.append([])
            continue
        parts[-1].append(t.text)
    return [" ".join(p) for p in parts if p]


def _parse_params_into(fn: RustFn, params_text: str) -> RustFn:
    if not params_text.strip():
        return fn
    for raw in _split_params(params_text):
        raw = raw.strip()
        if not raw:
            continue
        norm = normalize_rust(raw)
        if norm in ("self", "&self", "&mut self", "mut self"):
            fn.self_param = norm if norm != "mut self" else "self"
            continue
        if ":" in raw:
            colon = _top_level_colon(raw)
            name = raw[:colon].strip()
            ty = raw[colon + 1 :].strip()
            fn.params.append((name.removeprefix("mut ").strip(), ty))
        else:
            fn.params.append(("", raw))
    return fn


def _split_params(text: str) -> list[str]:
    toks = tokenize_rust(text)
    parts: list[str] = []
    depth = 0
    start = 0
    for t in toks:
        if t.text in ("<", "(", "["):
            depth += 1
        elif t.text in (">", ")", "]"):
            depth -= 1
        elif t.text == ">>":
            depth -= 2
        elif t.text == "," and depth == 0:
            parts.append(text[start : t.offset])
            start = t.end
    parts.append(text[start:])
    return parts


def _top_level_colon(text: str) -> int:
    toks = tokenize_rust(text)
    depth = 0
    for t in toks:
        if t.text in ("<", "(", "["):
            depth += 1
        elif t.text in (">", ")", "]"):
            depth -= 1
        elif t.text == ":" and depth == 0:
            return t.offset
    raise ParseViolation(f"parameter {text!r} has no type annotation")


def parse_items(code: str) -> list[RustItem]:
    """Parse a fragment of Rust code into items.

    Raises ParseViolation when the text is not item-structured.
    """
    return _ItemParser(code).parse_items()


def parses(code: str) -> bool:
    try:
        parse_items(code)
        return True
    except ParseViolation:
        return False


def strip_fn_bodies(code: str) -> str:
    """Replace every function body with ';' (signature summary form)."""
    items = parse_items(code)
    out = code
    spans: list[tuple[int, int]] = []

    def collect(fn_body: str, within: str, item_start: int):
        idx = within.find(fn_body)
        while idx >= 0:
            spans.append((item_start + idx, item_start + idx + len(fn_body)))
            idx = within.find(fn_body, idx + 1)

    for item in items:
        if item.kind == "fn" and item.fn and item.fn.body:
            collect(item.fn.body, code[item.start : item.end], item.start)
        elif item.kind in ("impl", "trait"):
            for fn in item.fns or item.trait_methods:
                if fn.body:
                    collect(fn.body, code[item.start : item.end], item.start)
    for a, b in sorted(set(spans), reverse=True):
        out = out[:a] + ";" + out[b:]
    return out


_VIS_KEYWORDS = ("fn", "struct", "enum", "trait", "static", "const", "type", "mod")


def set_item_visibility(code: str, item_name: str, vis: str, public_fields: bool = False) -> str:
    """Return `code` with the named item's visibility set to `vis`.

    Already-public items keep their stronger visibility ('pub' beats
    'pub(crate)'). Impl blocks have no visibility of their own. With
    `public_fields`, struct fields are made `pub` as well.
    """
    items = parse_items(code)
    edits: list[tuple[int, int, str]] = []
    for item in items:
        if item.kind in ("impl", "use", "mod") or item.name != item_name:
            continue
        toks = tokenize_rust(item.text)
        kw_idx = None
        has_pub = False
        for i, t in enumerate(toks):
            if t.text == "pub":
                has_pub = True
                break
            if t.text in _VIS_KEYWORDS:
                kw_idx = i
                break
        if has_pub:
            if item.vis == "pub" or vis != "pub":
                pass
            else:
                # upgrade pub(crate) -> pub
                p = item.text.find(item.vis)
                edits.append((item.start + p, item.start + p + len(item.vis), "pub"))
        elif kw_idx is not None:
            pos = item.start + toks[kw_idx].offset
            edits.append((pos, pos, vis + " "))
        if item.kind == "struct" and public_fields:
            for f_name, f_type, f_vis in item.fields:
                if f_vis:
                    continue
                # locate "name :" at field position inside the item text
                pat_idx = _find_field_offset(item.text, f_name)
                if pat_idx >= 0:
                    pos = item.start + pat_idx
                    edits.append((pos, pos, "pub "))
    out = code
    for a, b, repl in sorted(set(edits), reverse=True):
        out = out[:a] + repl + out[b:]
    return out


def _find_field_offset(struct_text: str, field_name: str) -> int:
    toks = tokenize_rust(struct_text)
    depth = 0
    for i, t in enumerate(toks):
        if t.text == "{":
            depth += 1
        elif t.text == "}":
            depth -= 1
        elif (
            depth == 1
            and t.kind == "ident"
            and t.text == field_name
            and i + 1 < len(toks)
            and toks[i + 1].text == ":"
        ):
            return t.offset
    return -1


def find_fn(code: str, name: str | None = None) -> RustFn | None:
    """First function in `code` (free or inside an impl), optionally by name."""
    for item in parse_items(code):
        if item.kind == "fn" and item.fn and (name is None or item.fn.name == name):
            return item.fn
        if item.kind == "impl":
            for fn in item.fns:
                if name is None or fn.name == name:
                    return fn
    return None
