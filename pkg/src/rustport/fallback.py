"""Deterministic offline translation provider.

Covers the simplified source subset (straight-line bodies: arithmetic,
slice operations, nil checks, range loops, if/return, the err-check idiom)
and emits target code that satisfies the matched rules' conclusions by
construction, so end-to-end pipeline runs are possible without any model.
Anything outside the subset raises UnsupportedConstruct.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import UnsupportedConstruct
from .fragments import (
    FREE_FUNCTION,
    GLOBAL_VAR,
    INTERFACE_DEF,
    METHOD,
    STRUCT_DEF,
    SourceFragment,
    SourceProject,
    SourceSignature,
    interface_methods,
)
from .golang import Token, code_tokens, tokenize


def snake_case(name: str) -> str:
    out = re.sub(r"(.)([A-Z][a-z]+)", r"\1_\2", name)
    out = re.sub(r"([a-z0-9])([A-Z])", r"\1_\2", out)
    return out.lower()


# ---------------------------------------------------------------------------
# types

INT_KINDS = {"int": "i64", "int64": "i64", "int32": "i32", "uint32": "u32", "byte": "u8"}


@dataclass
class GoType:
    kind: str  # int|float|string|bool|slice|ptr|struct|iface|error|unit
    name: str = ""  # named types
    elem: "GoType | None" = None
    int_repr: str = "i64"

    @property
    def is_copy(self) -> bool:
        return self.kind in ("int", "float", "bool")

    @property
    def nullable(self) -> bool:
        return self.kind in ("slice", "ptr")


UNIT = GoType("unit")
ERROR = GoType("error")
INT = GoType("int")
FLOAT = GoType("float")
STRING = GoType("string")
BOOL = GoType("bool")


class ProjectIndex:
    """Cross-fragment lookups the translator needs: signatures, struct
    fields, globals, and which receivers get mutated."""

    def __init__(self, project: SourceProject):
        self.project = project
        self.structs: dict[str, SourceFragment] = {}
        self.interfaces: dict[str, SourceFragment] = {}
        self.functions: dict[str, SourceFragment] = {}
        self.methods: dict[tuple[str, str], SourceFragment] = {}
        self.globals: dict[str, SourceFragment] = {}
        for f in project.fragments:
            if f.kind == STRUCT_DEF:
                self.structs[f.name] = f
            elif f.kind == INTERFACE_DEF:
                self.interfaces[f.name] = f
            elif f.kind == FREE_FUNCTION:
                self.functions[f.name] = f
            elif f.kind == METHOD:
                self.methods[(f.receiver_type, f.name)] = f
            elif f.kind == GLOBAL_VAR:
                self.globals[f.name] = f
        self.iface_sigs = interface_methods(project)
        self._mutators: set[tuple[str, str]] = set()
        for (recv, name), frag in self.methods.items():
            if self._body_mutates_receiver(frag):
                self._mutators.add((recv, name))

    def parse_type(self, text: str) -> GoType:
        text = text.strip()
        if not text:
            return UNIT
        if text == "error":
            return ERROR
        if text in INT_KINDS:
            return GoType("int", int_repr=INT_KINDS[text])
        if text in ("float64", "float32"):
            return FLOAT
        if text == "string":
            return STRING
        if text == "bool":
            return BOOL
        if text.startswith("[]"):
            return GoType("slice", elem=self.parse_type(text[2:]))
        if text.startswith("*"):
            return GoType("ptr", elem=self.parse_type(text[1:]))
        if text in self.interfaces:
            return GoType("iface", name=text)
        if text in self.structs or text[0].isupper() or text.islower():
            return GoType("struct", name=text)
        raise UnsupportedConstruct(f"type {text!r}")

    def struct_field_type(self, struct_name: str, field_name: str) -> GoType:
        frag = self.structs.get(struct_name)
        if frag is None:
            raise UnsupportedConstruct(f"unknown struct {struct_name!r}")
        for fname, ftype in frag.struct_fields:
            if fname == field_name:
                return self.parse_type(ftype)
        raise UnsupportedConstruct(f"{struct_name} has no field {field_name!r}")

    def method_mutates(self, recv: str, name: str) -> bool:
        return (recv, name) in self._mutators

    def interface_method_mutates(self, name: str, sig: SourceSignature) -> bool:
        """An interface method is &mut self when any implementation mutates."""
        for (recv, mname), frag in self.methods.items():
            if mname == name and frag.signature is not None and frag.signature.key() == sig.key():
                if self.method_mutates(recv, mname):
                    return True
        return False

    def _body_mutates_receiver(self, frag: SourceFragment) -> bool:
        recv = frag.receiver_name
        if not recv:
            return False
        toks = code_tokens(tokenize(frag.source_text))
        for i, t in enumerate(toks):
            if t.kind != "ident" or t.text != recv:
                continue
            j = i + 1
            while j + 1 < len(toks) and toks[j].text == "." and toks[j + 1].kind == "ident":
                j += 2
            if j < len(toks) and toks[j].text in ("=", "+=", "-=", "*=", "/=", "%=", "++", "--"):
                if toks[j].text == "=" and j > i and toks[j - 1].kind == "ident":
                    return True
                if toks[j].text != "=":
                    return True
        return False

    def rust_type(self, t: GoType, pos: str = "value") -> str:
        """Target type text; `pos` in value|param|ret|field."""
        if t.kind == "int":
            return t.int_repr
        if t.kind == "float":
            return "f64"
        if t.kind == "string":
            return "String"
        if t.kind == "bool":
            return "bool"
        if t.kind == "slice":
            return f"Option<Vec<{self.rust_type(t.elem, 'field')}>>"
        if t.kind == "ptr":
            inner = self.rust_type(t.elem, "value")
            if pos == "param":
                return f"&{inner}"
            if pos == "field":
                return f"Option<Box<{inner}>>"
            return f"Option<{inner}>"
        if t.kind == "iface":
            if pos == "param":
                return f"&dyn {t.name}"
            raise UnsupportedConstruct(f"interface {t.name} outside parameter position")
        if t.kind == "struct":
            return t.name
        raise UnsupportedConstruct(f"no target type for {t.kind}")

    def zero_value(self, t: GoType) -> str:
        if t.kind == "int":
            return "0"
        if t.kind == "float":
            return "0.0"
        if t.kind == "string":
            return "String::new()"
        if t.kind == "bool":
            return "false"
        if t.kind in ("slice", "ptr"):
            return "None"
        if t.kind == "struct":
            return f"{t.name}::default()"
        raise UnsupportedConstruct(f"no zero value for {t.kind}")


# ---------------------------------------------------------------------------
# Go expression/statement AST (subset)


@dataclass
class Expr:
    pass


@dataclass
class Lit(Expr):
    kind: str  # int|float|string|bool|nil
    text: str


@dataclass
class Ident(Expr):
    name: str


@dataclass
class Selector(Expr):
    base: Expr
    name: str


@dataclass
class Index(Expr):
    base: Expr
    index: Expr


@dataclass
class Call(Expr):
    callee: Expr
    args: list[Expr]


@dataclass
class Unary(Expr):
    op: str
    operand: Expr


@dataclass
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass
class Composite(Expr):
    type_text: str
    fields: list[tuple[str, Expr]]
    elems: list[Expr] = field(default_factory=list)  # slice literals


@dataclass
class AddrOf(Expr):
    operand: Expr


@dataclass
class Stmt:
    pass


@dataclass
class SDecl(Stmt):
    names: list[str]
    exprs: list[Expr]
    type_text: str = ""


@dataclass
class SAssign(Stmt):
    places: list[Expr]
    op: str
    exprs: list[Expr]


@dataclass
class SIncDec(Stmt):
    place: Expr
    op: str


@dataclass
class SExpr(Stmt):
    expr: Expr


@dataclass
class SReturn(Stmt):
    exprs: list[Expr]


@dataclass
class SIf(Stmt):
    cond: Expr
    then: list[Stmt]
    otherwise: "list[Stmt] | SIf | None" = None
    init: Stmt | None = None


@dataclass
class SForRange(Stmt):
    index: str
    value: str
    seq: Expr
    body: list[Stmt]


@dataclass
class SForClassic(Stmt):
    init: Stmt | None
    cond: Expr | None
    post: Stmt | None
    body: list[Stmt]


@dataclass
class SBreak(Stmt):
    pass


@dataclass
class SContinue(Stmt):
    pass


_BIN_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4, "|": 4, "^": 4,
    "*": 5, "/": 5, "%": 5, "<<": 5, ">>": 5, "&": 5,
}


class BodyParser:
    """Recursive-descent parser for the supported statement subset."""

    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self, k: int = 0) -> Token | None:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            raise UnsupportedConstruct("unexpected end of body")
        self.pos += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            raise UnsupportedConstruct(f"expected {text!r}, found {t.text!r} (line {t.line})")
        return t

    def skip_semis(self):
        while self.at(";"):
            self.next()

    # -- statements -----------------------------------------------------
    def parse_block(self) -> list[Stmt]:
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.at("}"):
            self.skip_semis()
            if self.at("}"):
                break
            stmts.append(self.parse_stmt())
            self.skip_semis()
        self.expect("}")
        return stmts

    def parse_stmt(self) -> Stmt:
        t = self.peek()
        if t.text == "return":
            self.next()
            exprs: list[Expr] = []
            nxt = self.peek()
            if nxt is not None and nxt.text not in ("}", ";") and nxt.line == t.line:
                exprs.append(self.parse_expr())
                while self.at(","):
                    self.next()
                    exprs.append(self.parse_expr())
            return SReturn(exprs)
        if t.text == "if":
            return self.parse_if()
        if t.text == "for":
            return self.parse_for()
        if t.text == "break":
            self.next()
            return SBreak()
        if t.text == "continue":
            self.next()
            return SContinue()
        if t.text == "var":
            self.next()
            name = self.next().text
            type_text = ""
            if not self.at("="):
                type_text = self._type_text()
            exprs = []
            if self.at("="):
                self.next()
                exprs = [self.parse_expr()]
            return SDecl([name], exprs, type_text)
        if t.text in ("go", "defer", "select", "switch", "goto", "chan", "func"):
            raise UnsupportedConstruct(f"{t.text} statement")
        return self.parse_simple_stmt()

    def parse_simple_stmt(self) -> Stmt:
        first = self.parse_expr()
        t = self.peek()
        if t is not None and t.text == "," :
            places = [first]
            while self.at(","):
                self.next()
                places.append(self.parse_expr())
            op = self.next().text
            if op not in (":=", "="):
                raise UnsupportedConstruct(f"multi-assign with {op!r}")
            exprs = [self.parse_expr()]
            while self.at(","):
                self.next()
                exprs.append(self.parse_expr())
            if op == ":=":
                return SDecl([_ident_name(p) for p in places], exprs)
            return SAssign(places, "=", exprs)
        if t is not None and t.text == ":=":
            self.next()
            return SDecl([_ident_name(first)], [self.parse_expr()])
        if t is not None and t.text in ("=", "+=", "-=", "*=", "/=", "%="):
            op = self.next().text
            return SAssign([first], op, [self.parse_expr()])
        if t is not None and t.text in ("++", "--"):
            self.next()
            return SIncDec(first, t.text)
        return SExpr(first)

    def parse_if(self) -> SIf:
        self.expect("if")
        init = None
        cond = self.parse_expr(no_composite=True)
        if self.at(";"):
            # the cond we parsed was actually an init simple-stmt start
            raise UnsupportedConstruct("if with init statement other than `x := e; cond`")
        if self.at(":="):
            self.next()
            rhs = self.parse_expr(no_composite=True)
            init = SDecl([_ident_name(cond)], [rhs])
            self.expect(";")
            cond = self.parse_expr(no_composite=True)
        then = self.parse_block()
        otherwise: list[Stmt] | SIf | None = None
        if self.at("else"):
            self.next()
            if self.at("if"):
                otherwise = self.parse_if()
            else:
                otherwise = self.parse_block()
        return SIf(cond, then, otherwise, init)

    def parse_for(self) -> Stmt:
        self.expect("for")
        if self.at("{"):  # infinite loop
            raise UnsupportedConstruct("for without condition")
        # range form: `for i, v := range seq {` or `for _, v := range ...`
        save = self.pos
        try:
            names = [self.next().text]
            if self.at(","):
                self.next()
                names.append(self.next().text)
            if self.at(":=") and self.peek(1) is not None and self.peek(1).text == "range":
                self.next()
                self.next()
                seq = self.parse_expr(no_composite=True)
                body = self.parse_block()
                if len(names) == 1:
                    return SForRange(names[0], "_", seq, body)
                return SForRange(names[0], names[1], seq, body)
        except UnsupportedConstruct:
            pass
        self.pos = save
        if self.at("range"):
            raise UnsupportedConstruct("bare range loop")
        # classic: init; cond; post  / while: cond
        first_semi = self._scan_for_semi()
        if first_semi:
            init = self.parse_simple_or_decl()
            self.expect(";")
            cond = None if self.at(";") else self.parse_expr(no_composite=True)
            self.expect(";")
            post = None if self.at("{") else self.parse_simple_or_decl()
            body = self.parse_block()
            return SForClassic(init, cond, post, body)
        cond = self.parse_expr(no_composite=True)
        body = self.parse_block()
        return SForClassic(None, cond, None, body)

    def parse_simple_or_decl(self) -> Stmt:
        return self.parse_simple_stmt()

    def _scan_for_semi(self) -> bool:
        depth = 0
        for k in range(self.pos, len(self.toks)):
            t = self.toks[k]
            if t.text in ("(", "[", "{") and depth >= 0:
                if t.text == "{" and depth == 0:
                    return False
                depth += 1
            elif t.text in (")", "]", "}"):
                depth -= 1
            elif t.text == ";" and depth == 0:
                return True
        return False

    def _type_text(self) -> str:
        parts = []
        while not self.at("=") and not self.at(";"):
            t = self.peek()
            if t is None or t.text in ("{", "}"):
                break
            parts.append(self.next().text)
        return "".join(parts)

    # -- expressions -----------------------------------------------------
    def parse_expr(self, min_prec: int = 1, no_composite: bool = False) -> Expr:
        left = self.parse_unary(no_composite)
        while True:
            t = self.peek()
            if t is None or t.text not in _BIN_PRECEDENCE:
                return left
            prec = _BIN_PRECEDENCE[t.text]
            if prec < min_prec:
                return left
            op = self.next().text
            right = self.parse_expr(prec + 1, no_composite)
            left = Binary(op, left, right)

    def parse_unary(self, no_composite: bool) -> Expr:
        t = self.peek()
        if t.text in ("-", "!"):
            self.next()
            return Unary(t.text, self.parse_unary(no_composite))
        if t.text == "&":
            self.next()
            return AddrOf(self.parse_unary(no_composite))
        if t.text == "*":
            raise UnsupportedConstruct("explicit pointer dereference")
        return self.parse_postfix(self.parse_primary(no_composite), no_composite)

    def parse_primary(self, no_composite: bool) -> Expr:
        t = self.next()
        if t.kind == "int":
            return Lit("int", t.text)
        if t.kind == "float":
            return Lit("float", t.text)
        if t.kind == "string":
            return Lit("string", t.text)
        if t.text in ("true", "false"):
            return Lit("bool", t.text)
        if t.text == "nil":
            return Lit("nil", "nil")
        if t.text == "(":
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.text == "[":  # slice literal type prefix []T{...}
            self.expect("]")
            elem = self._type_text_until_brace()
            self.expect("{")
            elems = []
            while not self.at("}"):
                elems.append(self.parse_expr())
                if self.at(","):
                    self.next()
            self.expect("}")
            return Composite("[]" + elem, [], elems)
        if t.kind == "ident" or t.kind == "keyword":
            name = t.text
            if not no_composite and self.at("{") and name[0].isupper():
                return self._composite(name)
            if no_composite and self.at("{") and self._looks_like_composite():
                return self._composite(name)
            return Ident(name)
        raise UnsupportedConstruct(f"expression token {t.text!r} (line {t.line})")

    def _looks_like_composite(self) -> bool:
        # `Name{` followed by `Field:` or `}` is a composite literal even in
        # condition position (corpus avoids this ambiguity anyway)
        nxt = self.peek(1)
        nxt2 = self.peek(2)
        if nxt is not None and nxt.text == "}":
            return True
        return nxt is not None and nxt.kind == "ident" and nxt2 is not None and nxt2.text == ":"

    def _composite(self, name: str) -> Expr:
        self.expect("{")
        fields: list[tuple[str, Expr]] = []
        while not self.at("}"):
            fname = self.next().text
            self.expect(":")
            fields.append((fname, self.parse_expr()))
            if self.at(","):
                self.next()
        self.expect("}")
        return Composite(name, fields)

    def _type_text_until_brace(self) -> str:
        parts = []
        while not self.at("{"):
            parts.append(self.next().text)
        return "".join(parts)

    def parse_postfix(self, e: Expr, no_composite: bool) -> Expr:
        while True:
            t = self.peek()
            if t is None:
                return e
            if t.text == ".":
                self.next()
                name = self.next().text
                e = Selector(e, name)
            elif t.text == "(":
                self.next()
                args = []
                while not self.at(")"):
                    args.append(self.parse_expr())
                    if self.at(","):
                        self.next()
                self.expect(")")
                e = Call(e, args)
            elif t.text == "[":
                self.next()
                idx = self.parse_expr()
                self.expect("]")
                e = Index(e, idx)
            else:
                return e


def _ident_name(e: Expr) -> str:
    if isinstance(e, Ident):
        return e.name
    raise UnsupportedConstruct("expected an identifier")


# ---------------------------------------------------------------------------
# rendering


@dataclass
class RValue:
    code: str
    type: GoType
    place: bool = False  # borrowable place expression (ident/field/index)
    ptr_ref: bool = False  # pointer values held as plain references (&T params)


@dataclass
class VarInfo:
    type: GoType
    render: str
    cast: str = ""  # render wrapper, e.g. usize loop counters render as (i as i64)
    ptr_ref: bool = False


class FnRenderer:
    """Renders one function body with a typed environment."""

    def __init__(self, index: ProjectIndex, fragment: SourceFragment):
        self.index = index
        self.frag = fragment
        self.env: list[dict[str, VarInfo]] = [{}]
        self.lines: list[str] = []
        self.indent = 1
        sig = fragment.signature
        self.results = [index.parse_type(t) for t in sig.results] if sig else []
        self.returns_error = bool(sig and sig.returns_error)
        self.value_results = self.results[:-1] if self.returns_error else self.results

    # -- environment ------------------------------------------------------
    def lookup(self, name: str) -> VarInfo | None:
        for scope in reversed(self.env):
            if name in scope:
                return scope[name]
        return None

    def declare(self, name: str, info: VarInfo):
        self.env[-1][name] = info

    def push(self):
        self.env.append({})

    def pop(self):
        self.env.pop()

    def emit(self, line: str):
        self.lines.append("    " * self.indent + line)

    # -- expressions -------------------------------------------------------
    def render(self, e: Expr) -> RValue:
        if isinstance(e, Lit):
            return self._lit(e)
        if isinstance(e, Ident):
            return self._ident(e.name)
        if isinstance(e, Selector):
            return self._selector(e)
        if isinstance(e, Index):
            return self._index(e)
        if isinstance(e, Call):
            return self._call(e)
        if isinstance(e, Unary):
            v = self.render(e.operand)
            return RValue(f"{e.op}{self._group(v.code)}", v.type)
        if isinstance(e, Binary):
            return self._binary(e)
        if isinstance(e, Composite):
            return self._composite(e)
        if isinstance(e, AddrOf):
            inner = self.render(e.operand)
            return RValue(f"Some({self.owned(inner)})", GoType("ptr", elem=inner.type))
        raise UnsupportedConstruct(f"expression {type(e).__name__}")

    def _lit(self, e: Lit) -> RValue:
        if e.kind == "int":
            return RValue(e.text.replace("_", ""), INT)
        if e.kind == "float":
            return RValue(e.text, FLOAT)
        if e.kind == "string":
            return RValue(f"{e.text}.to_string()", STRING)
        if e.kind == "bool":
            return RValue(e.text, BOOL)
        if e.kind == "nil":
            return RValue("None", GoType("ptr", elem=UNIT))
        raise UnsupportedConstruct(f"literal {e.kind}")

    def _str_arg(self, e: Expr) -> str:
        """Render a string-typed expression as a &str-pattern argument."""
        if isinstance(e, Lit) and e.kind == "string":
            return e.text
        v = self.render(e)
        if v.place:
            return f"&{v.code}"
        return f"&{self._group(v.code)}"

    def _ident(self, name: str) -> RValue:
        info = self.lookup(name)
        if info is not None:
            return RValue(info.render, info.type, place=not info.cast, ptr_ref=info.ptr_ref)
        g = self.index.globals.get(name)
        if g is not None:
            ty = self._global_type(g)
            if g.var_init_is_call:
                return RValue(f"(*{snake_case(name)})", ty, place=True)
            return RValue(snake_case(name), ty, place=True)
        if name in self.index.functions or name in self.index.structs:
            return RValue(name, GoType("struct", name=name))
        raise UnsupportedConstruct(f"unresolved identifier {name!r}")

    def _global_type(self, g: SourceFragment) -> GoType:
        if g.var_type:
            return self.index.parse_type(g.var_type)
        if g.var_init_is_call:
            callee = g.var_init.split("(", 1)[0].strip()
            fn = self.index.functions.get(callee)
            if fn is not None and fn.signature and fn.signature.results:
                return self.index.parse_type(fn.signature.results[0])
        if g.var_init:
            toks = code_tokens(tokenize(g.var_init))
            if toks and toks[0].kind == "int":
                return INT
            if toks and toks[0].kind == "float":
                return FLOAT
            if toks and toks[0].kind == "string":
                return STRING
            if toks and toks[0].text in ("true", "false"):
                return BOOL
        raise UnsupportedConstruct(f"cannot type global {g.name}")

    def _selector(self, e: Selector) -> RValue:
        base = self.render(e.base)
        base_code = base.code
        if base.type.kind == "ptr" and base.type.elem is not None:
            # &T pointers are transparent; Option-held pointers unwrap first
            if not base.ptr_ref:
                base_code = f"{base.code}.as_ref().unwrap()"
            base_ty = base.type.elem
        else:
            base_ty = base.type
        if base_ty.kind != "struct":
            raise UnsupportedConstruct(f"field access on {base_ty.kind}")
        fty = self.index.struct_field_type(base_ty.name, e.name)
        code = f"{base_code}.{snake_case(e.name)}"
        return RValue(code, fty, place=True)

    def _index(self, e: Index) -> RValue:
        base = self.render(e.base)
        idx = self.render(e.index)
        if base.type.kind == "slice":
            elem = base.type.elem
            code = f"{base.code}.as_ref().unwrap()[{self._usize(idx)}]"
            return RValue(code, elem, place=True)
        raise UnsupportedConstruct(f"indexing a {base.type.kind}")

    def _usize(self, idx: RValue) -> str:
        if idx.type.kind != "int":
            raise UnsupportedConstruct("non-integer index")
        if idx.code.isdigit():
            return idx.code
        return f"({idx.code}) as usize"

    def _binary(self, e: Binary) -> RValue:
        # nil comparisons on nullable values become Option checks
        if e.op in ("==", "!=") and isinstance(e.right, Lit) and e.right.kind == "nil":
            left = self.render(e.left)
            if left.type.kind == "error":
                # handled by the err-idiom peephole; a bare use is unsupported
                raise UnsupportedConstruct("error comparison outside the err-check idiom")
            method = "is_none" if e.op == "==" else "is_some"
            return RValue(f"{left.code}.{method}()", BOOL)
        if e.op in ("==", "!=") and isinstance(e.left, Lit) and e.left.kind == "nil":
            return self._binary(Binary(e.op, e.right, e.left))
        left = self.render(e.left)
        right = self.render(e.right)
        lc, rc = left.code, right.code
        ty = left.type
        if left.type.kind == "int" and right.type.kind == "float":
            lc = self._to_float(e.left, left)
            ty = FLOAT
        elif left.type.kind == "float" and right.type.kind == "int":
            rc = self._to_float(e.right, right)
            ty = FLOAT
        if e.op in ("==", "!=", "<", "<=", ">", ">=", "&&", "||"):
            result = BOOL
        else:
            result = ty
        if e.op in ("&&", "||"):
            lc, rc = self._group(lc), self._group(rc)
        if left.type.kind == "string" and e.op == "+":
            return RValue(f'format!("{{}}{{}}", {lc}, {rc})', STRING)
        return RValue(f"{self._arith_group(lc)} {e.op} {self._arith_group(rc)}", result)

    def _to_float(self, expr: Expr, rv: RValue) -> str:
        if isinstance(expr, Lit) and expr.kind == "int":
            return rv.code + ".0"
        return f"({rv.code}) as f64"

    @staticmethod
    def _group(code: str) -> str:
        if " " in code and not _fully_parenthesized(code):
            return f"({code})"
        return code

    _arith_group = _group

    def owned(self, rv: RValue) -> str:
        if rv.place and not rv.type.is_copy:
            return f"{rv.code}.clone()"
        return rv.code

    # -- calls --------------------------------------------------------------
    def _call(self, e: Call) -> RValue:
        if isinstance(e.callee, Ident):
            name = e.callee.name
            if name == "len":
                return self._len(e.args[0])
            if name == "append":
                raise UnsupportedConstruct("append outside `x = append(x, v)` form")
            if name in ("int", "int64"):
                v = self.render(e.args[0])
                return RValue(f"({v.code}) as i64", INT)
            if name == "float64":
                v = self.render(e.args[0])
                return RValue(f"({v.code}) as f64", FLOAT)
            fn = self.index.functions.get(name)
            if fn is not None:
                return self._project_call(fn, e.args, f"{snake_case(name)}")
            raise UnsupportedConstruct(f"call to unknown function {name!r}")
        if isinstance(e.callee, Selector):
            sel = e.callee
            if isinstance(sel.base, Ident) and self.lookup(sel.base.name) is None \
                    and sel.base.name not in self.index.globals:
                return self._std_call(sel.base.name, sel.name, e.args)
            recv = self.render(sel.base)
            recv_code = recv.code
            if recv.type.kind == "ptr" and not recv.ptr_ref:
                recv_code = f"{recv.code}.as_ref().unwrap()"
            recv_ty = recv.type.elem if recv.type.kind == "ptr" else recv.type
            if recv_ty.kind == "struct":
                m = self.index.methods.get((recv_ty.name, sel.name))
                if m is None:
                    raise UnsupportedConstruct(f"{recv_ty.name} has no method {sel.name}")
                return self._project_call(m, e.args, f"{recv_code}.{snake_case(sel.name)}")
            if recv_ty.kind == "iface":
                iface = self.index.interfaces.get(recv_ty.name)
                sig = None
                for mname, msig in iface.interface_methods if iface else []:
                    if mname == sel.name:
                        sig = msig
                if sig is None:
                    raise UnsupportedConstruct(f"{recv_ty.name} has no method {sel.name}")
                return self._sig_call(sig, e.args, f"{recv.code}.{snake_case(sel.name)}")
        raise UnsupportedConstruct("unsupported call form")

    def _len(self, arg: Expr) -> RValue:
        v = self.render(arg)
        if v.type.kind == "slice":
            return RValue(f"({v.code}.as_ref().map_or(0, |v| v.len()) as i64)", INT)
        if v.type.kind == "string":
            return RValue(f"({v.code}.len() as i64)", INT)
        raise UnsupportedConstruct(f"len of {v.type.kind}")

    def _project_call(self, frag: SourceFragment, args: list[Expr], callee_code: str) -> RValue:
        return self._sig_call(frag.signature, args, callee_code, frag=frag)

    def _sig_call(self, sig: SourceSignature, args: list[Expr], callee_code: str,
                  frag: SourceFragment | None = None) -> RValue:
        rendered: list[str] = []
        for (pname, ptype_text), arg in zip(sig.params, args):
            ptype = self.index.parse_type(ptype_text)
            rendered.append(self._call_arg(ptype, arg, frag, pname))
        result = self._sig_result_type(sig)
        return RValue(f"{callee_code}({', '.join(rendered)})", result)

    def _sig_result_type(self, sig: SourceSignature) -> GoType:
        results = [self.index.parse_type(t) for t in sig.results]
        if sig.returns_error:
            inner = results[:-1]
            t = GoType("result")
            t.elem = inner[0] if len(inner) == 1 else None
            t.name = "result"
            t.extra = inner  # type: ignore[attr-defined]
            return t
        if not results:
            return UNIT
        if len(results) == 1:
            return results[0]
        t = GoType("tuple")
        t.extra = results  # type: ignore[attr-defined]
        return t

    def _call_arg(self, ptype: GoType, arg: Expr, callee: SourceFragment | None, pname: str) -> str:
        if ptype.kind == "ptr":
            mutated = callee is not None and fn_mutates_param(callee, pname)
            if isinstance(arg, AddrOf):
                inner = self.render(arg.operand)
                return f"&mut {inner.code}" if mutated else f"&{inner.code}"
            v = self.render(arg)
            if v.type.kind == "ptr":
                if v.ptr_ref:
                    return v.code  # already a reference
                return f"{v.code}.as_deref().unwrap()"
            return f"&mut {v.code}" if mutated else f"&{v.code}"
        if ptype.kind == "iface":
            v = self.render(arg)
            return f"&{v.code}" if v.place else v.code
        v = self.render(arg)
        if ptype.kind == "float" and isinstance(arg, Lit) and arg.kind == "int":
            return v.code + ".0"
        return self.owned(v)

    def _std_call(self, pkg: str, name: str, args: list[Expr]) -> RValue:
        key = f"{pkg}.{name}"
        if key == "errors.New":
            msg = self.render(args[0])
            lit = args[0].text if isinstance(args[0], Lit) else None
            inner = lit if lit else self.owned(msg)
            return RValue(f"anyhow::anyhow!({inner})", ERROR)
        if key in ("fmt.Errorf", "fmt.Sprintf"):
            fmt_lit = args[0]
            if not isinstance(fmt_lit, Lit) or fmt_lit.kind != "string":
                raise UnsupportedConstruct(f"{key} needs a literal format string")
            fmt_text = convert_format(fmt_lit.text)
            rendered = [self.owned(self.render(a)) for a in args[1:]]
            joined = ", ".join([fmt_text] + rendered)
            if key == "fmt.Errorf":
                return RValue(f"anyhow::anyhow!({joined})", ERROR)
            return RValue(f"format!({joined})", STRING)
        if key == "math.Sqrt":
            return RValue(f"({self.render(args[0]).code}).sqrt()", FLOAT)
        if key == "math.Abs":
            return RValue(f"({self.render(args[0]).code}).abs()", FLOAT)
        if key == "math.Floor":
            return RValue(f"({self.render(args[0]).code}).floor()", FLOAT)
        if key == "math.Ceil":
            return RValue(f"({self.render(args[0]).code}).ceil()", FLOAT)
        if key == "strings.ToUpper":
            return RValue(f"{self.render(args[0]).code}.to_uppercase()", STRING)
        if key == "strings.ToLower":
            return RValue(f"{self.render(args[0]).code}.to_lowercase()", STRING)
        if key == "strings.TrimSpace":
            return RValue(f"{self.render(args[0]).code}.trim().to_string()", STRING)
        if key == "strings.HasPrefix":
            return RValue(f"{self.render(args[0]).code}.starts_with({self._str_arg(args[1])})", BOOL)
        if key == "strings.HasSuffix":
            return RValue(f"{self.render(args[0]).code}.ends_with({self._str_arg(args[1])})", BOOL)
        if key == "strings.Contains":
            return RValue(f"{self.render(args[0]).code}.contains({self._str_arg(args[1])})", BOOL)
        if key == "strings.Repeat":
            n = self.render(args[1])
            return RValue(f"{self.render(args[0]).code}.repeat(({n.code}) as usize)", STRING)
        if key == "strings.Fields":
            base = self.render(args[0])
            return RValue(
                f"Some({base.code}.split_whitespace().map(|w| w.to_string()).collect::<Vec<String>>())",
                GoType("slice", elem=STRING),
            )
        if key == "strings.Split":
            base = self.render(args[0])
            return RValue(
                f"Some({base.code}.split({self._str_arg(args[1])}).map(|w| w.to_string()).collect::<Vec<String>>())",
                GoType("slice", elem=STRING),
            )
        if key == "strings.Join":
            xs = self.render(args[0])
            return RValue(
                f"{xs.code}.as_ref().map_or(String::new(), |v| v.join({self._str_arg(args[1])}))",
                STRING,
            )
        if key == "strconv.Itoa":
            return RValue(f'format!("{{}}", {self.render(args[0]).code})', STRING)
        if key in ("sort.Float64s", "sort.Ints", "sort.Strings"):
            xs = self.render(args[0])
            if key == "sort.Float64s":
                body = "v.sort_by(|a, b| a.partial_cmp(b).unwrap())"
            else:
                body = "v.sort()"
            return RValue(f"if let Some(v) = {xs.code}.as_mut() {{ {body}; }}", UNIT)
        raise UnsupportedConstruct(f"standard library call {key}")

    def _composite(self, e: Composite) -> RValue:
        if e.type_text.startswith("[]"):
            elem = self.index.parse_type(e.type_text[2:])
            parts = [self.owned(self.render(x)) for x in e.elems]
            return RValue(f"Some(vec![{', '.join(parts)}])", GoType("slice", elem=elem))
        name = e.type_text
        frag = self.index.structs.get(name)
        if frag is None:
            raise UnsupportedConstruct(f"composite literal of unknown type {name!r}")
        parts = []
        given = {fname for fname, _ in e.fields}
        for fname, fexpr in e.fields:
            fty = self.index.struct_field_type(name, fname)
            if fty.kind == "ptr":
                if isinstance(fexpr, Lit) and fexpr.kind == "nil":
                    parts.append(f"{snake_case(fname)}: None")
                elif isinstance(fexpr, AddrOf):
                    inner = self.render(fexpr.operand)
                    parts.append(f"{snake_case(fname)}: Some(Box::new({self.owned(inner)}))")
                else:
                    v = self.render(fexpr)
                    parts.append(f"{snake_case(fname)}: {self.owned(v)}")
            elif fty.kind == "float":
                if isinstance(fexpr, Lit) and fexpr.kind == "int":
                    parts.append(f"{snake_case(fname)}: {fexpr.text}.0")
                else:
                    parts.append(f"{snake_case(fname)}: {self.owned(self.render(fexpr))}")
            else:
                v = self.render(fexpr)
                if isinstance(fexpr, Lit) and fexpr.kind == "nil":
                    parts.append(f"{snake_case(fname)}: None")
                else:
                    parts.append(f"{snake_case(fname)}: {self.owned(v)}")
        if len(given) < len(frag.struct_fields):
            parts.append("..Default::default()")
        return RValue(f"{name} {{ {', '.join(parts)} }}", GoType("struct", name=name))

    # -- statements -----------------------------------------------------
    def render_block(self, stmts: list[Stmt]):
        self.push()
        i = 0
        while i < len(stmts):
            consumed = self._try_err_idiom(stmts, i)
            if consumed:
                i += consumed
                continue
            self.render_stmt(stmts[i])
            i += 1
        self.pop()

    def _try_err_idiom(self, stmts: list[Stmt], i: int) -> int:
        """`v, err := f(...)` + `if err != nil { return ..., err }` -> `let v = f(...)?;`"""
        s = stmts[i]
        if not isinstance(s, SDecl) or not s.exprs or not isinstance(s.exprs[0], Call):
            return 0
        if not s.names or s.names[-1] != "err":
            return 0
        if i + 1 >= len(stmts):
            return 0
        nxt = stmts[i + 1]
        if not isinstance(nxt, SIf) or nxt.init is not None or nxt.otherwise is not None:
            return 0
        cond = nxt.cond
        if not (
            isinstance(cond, Binary) and cond.op == "!="
            and isinstance(cond.left, Ident) and cond.left.name == "err"
            and isinstance(cond.right, Lit) and cond.right.kind == "nil"
        ):
            return 0
        if len(nxt.then) != 1 or not isinstance(nxt.then[0], SReturn):
            return 0
        ret = nxt.then[0]
        if not ret.exprs:
            return 0
        propagates = isinstance(ret.exprs[-1], Ident) and ret.exprs[-1].name == "err"
        if propagates and not self.returns_error:
            return 0
        if not propagates and any(_uses_err(e) for e in ret.exprs):
            return 0
        call = self.render(s.exprs[0])
        value_names = s.names[:-1]
        results = getattr(call.type, "extra", None) or ([call.type.elem] if call.type.elem else [])
        if propagates:
            if not value_names:
                self.emit(f"{call.code}?;")
                return 2
            if len(value_names) == 1:
                name = value_names[0]
                self.declare(name, VarInfo(results[0] if results else UNIT, name))
                self.emit(f"let mut {name} = {call.code}?;")
            else:
                for name, ty in zip(value_names, results):
                    self.declare(name, VarInfo(ty, name))
                pattern = ", ".join(f"mut {n}" for n in value_names)
                self.emit(f"let ({pattern}) = {call.code}?;")
            return 2
        # non-propagating: the Err arm returns concrete values instead
        err_arm = FnRenderer(self.index, self.frag)
        err_arm.env = [dict(scope) for scope in self.env]
        err_arm.indent = self.indent + 1
        err_arm.render_stmt(ret)
        err_body = "\n".join(err_arm.lines)
        if not value_names:
            self.emit(f"if let Err(_) = {call.code} {{")
            self.lines.append(err_body)
            self.emit("}")
            return 2
        if len(value_names) == 1:
            name = value_names[0]
            self.declare(name, VarInfo(results[0] if results else UNIT, name))
            pattern = f"mut {name}"
        else:
            for name, ty in zip(value_names, results):
                self.declare(name, VarInfo(ty, name))
            pattern = "(" + ", ".join(f"mut {n}" for n in value_names) + ")"
        self.emit(f"let {pattern} = match {call.code} {{")
        self.emit("    Ok(__v) => __v,")
        self.emit("    Err(_) => {")
        for line in err_arm.lines:
            self.lines.append("    " + line)
        self.emit("    }")
        self.emit("};")
        return 2

    def render_stmt(self, s: Stmt):
        if isinstance(s, SDecl):
            self._render_decl(s)
        elif isinstance(s, SAssign):
            self._render_assign(s)
        elif isinstance(s, SIncDec):
            place = self.render(s.place)
            self.emit(f"{place.code} {'+=' if s.op == '++' else '-='} 1;")
        elif isinstance(s, SExpr):
            v = self.render(s.expr)
            if v.type.kind == "result":
                self.emit(f"let _ = {v.code};")  # Go drops unchecked errors
            else:
                self.emit(v.code + (";" if not v.code.endswith("}") else ""))
        elif isinstance(s, SReturn):
            self._render_return(s)
        elif isinstance(s, SIf):
            self._render_if(s)
        elif isinstance(s, SForRange):
            self._render_range(s)
        elif isinstance(s, SForClassic):
            self._render_classic(s)
        elif isinstance(s, SBreak):
            self.emit("break;")
        elif isinstance(s, SContinue):
            self.emit("continue;")
        else:
            raise UnsupportedConstruct(f"statement {type(s).__name__}")

    def _render_decl(self, s: SDecl):
        if len(s.names) != 1 or len(s.exprs) > 1:
            raise UnsupportedConstruct("multi-variable declaration outside the err-check idiom")
        name = s.names[0]
        if s.exprs:
            v = self.render(s.exprs[0])
            ty = self.index.parse_type(s.type_text) if s.type_text else v.type
            if ty.kind == "float" and isinstance(s.exprs[0], Lit) and s.exprs[0].kind == "int":
                self.declare(name, VarInfo(ty, name))
                self.emit(f"let mut {name} = {v.code}.0;")
                return
            if isinstance(s.exprs[0], Lit) and s.exprs[0].kind == "nil":
                rust = self.index.rust_type(ty)
                self.declare(name, VarInfo(ty, name))
                self.emit(f"let mut {name}: {rust} = None;")
                return
            self.declare(name, VarInfo(ty, name))
            self.emit(f"let mut {name} = {self.owned(v)};")
        else:
            ty = self.index.parse_type(s.type_text)
            self.declare(name, VarInfo(ty, name))
            self.emit(f"let mut {name}: {self.index.rust_type(ty)} = {self.index.zero_value(ty)};")

    def _render_assign(self, s: SAssign):
        if len(s.places) != 1 or len(s.exprs) != 1:
            raise UnsupportedConstruct("parallel assignment")
        place_expr, value_expr = s.places[0], s.exprs[0]
        # x = append(x, v)
        if (
            s.op == "="
            and isinstance(value_expr, Call)
            and isinstance(value_expr.callee, Ident)
            and value_expr.callee.name == "append"
        ):
            target = self.render(place_expr)
            if len(value_expr.args) != 2:
                raise UnsupportedConstruct("append with more than one element")
            base = value_expr.args[0]
            if _expr_text(base) != _expr_text(place_expr):
                raise UnsupportedConstruct("append target differs from assignment target")
            elem_ty = target.type.elem if target.type.kind == "slice" else None
            elem = self.render(value_expr.args[1])
            code = self.owned(elem)
            if elem_ty is not None and elem_ty.kind == "float" and isinstance(value_expr.args[1], Lit) \
                    and value_expr.args[1].kind == "int":
                code = elem.code + ".0"
            self.emit(f"{target.code}.get_or_insert_with(Vec::new).push({code});")
            return
        if isinstance(place_expr, Index):
            base = self.render(place_expr.base)
            idx = self.render(place_expr.index)
            v = self.render(value_expr)
            if base.type.kind != "slice":
                raise UnsupportedConstruct("index assignment on non-slice")
            self.emit(f"{base.code}.as_mut().unwrap()[{self._usize(idx)}] {s.op} {self.owned(v)};")
            return
        place = self.render(place_expr)
        if isinstance(value_expr, Lit) and value_expr.kind == "nil":
            self.emit(f"{place.code} {s.op} None;")
            return
        v = self.render(value_expr)
        code = self.owned(v)
        if place.type.kind == "float" and isinstance(value_expr, Lit) and value_expr.kind == "int":
            code = v.code + ".0"
        if place.type.kind == "ptr" and isinstance(value_expr, AddrOf):
            # pointer-typed fields store boxed values
            inner = self.render(value_expr.operand)
            code = f"Some(Box::new({self.owned(inner)}))"
        self.emit(f"{place.code} {s.op} {code};")

    def _render_return(self, s: SReturn):
        if not self.returns_error:
            if not s.exprs:
                self.emit("return;")
                return
            parts = []
            for expr, ty in zip(s.exprs, self.value_results):
                v = self.render(expr)
                if ty.kind == "float" and isinstance(expr, Lit) and expr.kind == "int":
                    parts.append(v.code + ".0")
                elif ty.kind in ("slice", "ptr") and isinstance(expr, Lit) and expr.kind == "nil":
                    parts.append("None")
                else:
                    parts.append(self.owned(v))
            self.emit(f"return {parts[0] if len(parts) == 1 else '(' + ', '.join(parts) + ')'};")
            return
        # error-returning function
        err_expr = s.exprs[-1] if s.exprs else None
        value_exprs = s.exprs[:-1]
        if len(s.exprs) == 1 and isinstance(err_expr, Call):
            callee = err_expr.callee
            if isinstance(callee, Ident) and callee.name in self.index.functions \
                    and self.index.functions[callee.name].signature.returns_error:
                v = self.render(err_expr)
                self.emit(f"return {v.code};")
                return
            if isinstance(callee, Selector):
                v = self.render(err_expr)
                if v.type.kind == "error":
                    self.emit(f"return Err({v.code});")
                    return
                self.emit(f"return {v.code};")
                return
        if err_expr is not None and isinstance(err_expr, Lit) and err_expr.kind == "nil":
            parts = []
            for expr, ty in zip(value_exprs, self.value_results):
                v = self.render(expr)
                if ty.kind == "float" and isinstance(expr, Lit) and expr.kind == "int":
                    parts.append(v.code + ".0")
                elif ty.kind in ("slice", "ptr") and isinstance(expr, Lit) and expr.kind == "nil":
                    parts.append("None")
                else:
                    parts.append(self.owned(v))
            inner = "()" if not parts else (parts[0] if len(parts) == 1 else "(" + ", ".join(parts) + ")")
            self.emit(f"return Ok({inner});")
            return
        # non-nil error value
        if isinstance(err_expr, Ident) and err_expr.name == "err":
            self.emit("return Err(err);")
            return
        rendered = self.render(err_expr)
        if rendered.type.kind == "error":
            self.emit(f"return Err({rendered.code});")
            return
        # a custom error value (struct literal or pointer to one)
        if isinstance(err_expr, AddrOf):
            inner = self.render(err_expr.operand)
            self.emit(f"return Err(anyhow::anyhow!({self.owned(inner)}));")
            return
        self.emit(f"return Err(anyhow::anyhow!({self.owned(rendered)}));")

    def _render_if(self, s: SIf):
        if s.init is not None:
            raise UnsupportedConstruct("if with init statement outside the err-check idiom")
        cond = self.render(s.cond)
        self.emit(f"if {cond.code} {{")
        self.indent += 1
        self.render_block(s.then)
        self.indent -= 1
        if s.otherwise is None:
            self.emit("}")
        elif isinstance(s.otherwise, SIf):
            self.emit("} else {")
            self.indent += 1
            self.render_stmt(s.otherwise)
            self.indent -= 1
            self.emit("}")
        else:
            self.emit("} else {")
            self.indent += 1
            self.render_block(s.otherwise)
            self.indent -= 1
            self.emit("}")

    def _render_range(self, s: SForRange):
        seq = self.render(s.seq)
        if seq.type.kind != "slice":
            raise UnsupportedConstruct(f"range over {seq.type.kind}")
        elem = seq.type.elem
        iter_code = f"{seq.code}.as_deref().unwrap_or(&[]).iter()"
        if not elem.is_copy:
            iter_code += ".cloned()"  # owned per-iteration values, like Go's copy
        self.push()
        if s.value == "_" and s.index == "_":
            self.emit(f"for _ in {iter_code} {{")
        elif s.index == "_":
            pat = f"&{s.value}" if elem.is_copy else s.value
            self.declare(s.value, VarInfo(elem, s.value))
            self.emit(f"for {pat} in {iter_code} {{")
        elif s.value == "_":
            self.declare(s.index, VarInfo(INT, f"({s.index} as i64)", cast="usize"))
            self.emit(f"for {s.index} in 0..{seq.code}.as_ref().map_or(0, |v| v.len()) {{")
        else:
            pat = f"&{s.value}" if elem.is_copy else s.value
            self.declare(s.index, VarInfo(INT, f"({s.index} as i64)", cast="usize"))
            self.declare(s.value, VarInfo(elem, s.value))
            self.emit(f"for ({s.index}, {pat}) in {iter_code}.enumerate() {{")
        self.indent += 1
        self.render_block(s.body)
        self.indent -= 1
        self.emit("}")
        self.pop()

    def _render_classic(self, s: SForClassic):
        if _contains_continue(s.body):
            raise UnsupportedConstruct("continue inside a classic for loop")
        self.push()
        if s.init is not None:
            self.render_stmt(s.init)
        cond_code = self.render(s.cond).code if s.cond is not None else "true"
        self.emit(f"while {cond_code} {{")
        self.indent += 1
        self.render_block(s.body)
        if s.post is not None:
            self.render_stmt(s.post)
        self.indent -= 1
        self.emit("}")
        self.pop()


def _fully_parenthesized(code: str) -> bool:
    """True when the leading '(' closes at the very end of the expression."""
    if not (code.startswith("(") and code.endswith(")")):
        return False
    depth = 0
    for i, c in enumerate(code):
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return i == len(code) - 1
    return False


def _uses_err(e: Expr) -> bool:
    if isinstance(e, Ident):
        return e.name == "err"
    if isinstance(e, Binary):
        return _uses_err(e.left) or _uses_err(e.right)
    if isinstance(e, Unary):
        return _uses_err(e.operand)
    if isinstance(e, Call):
        return any(_uses_err(a) for a in e.args)
    if isinstance(e, Selector):
        return _uses_err(e.base)
    if isinstance(e, Index):
        return _uses_err(e.base) or _uses_err(e.index)
    return False


def _contains_continue(stmts: list[Stmt]) -> bool:
    for s in stmts:
        if isinstance(s, SContinue):
            return True
        if isinstance(s, SIf):
            if _contains_continue(s.then):
                return True
            if isinstance(s.otherwise, list) and _contains_continue(s.otherwise):
                return True
            if isinstance(s.otherwise, SIf) and _contains_continue([s.otherwise]):
                return True
    return False


def _expr_text(e: Expr) -> str:
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Selector):
        return f"{_expr_text(e.base)}.{e.name}"
    return repr(e)


def fn_mutates_param(frag: SourceFragment, param_name: str) -> bool:
    toks = code_tokens(tokenize(frag.source_text))
    for i, t in enumerate(toks):
        if t.kind != "ident" or t.text != param_name:
            continue
        j = i + 1
        while j + 1 < len(toks) and toks[j].text == "." and toks[j + 1].kind == "ident":
            j += 2
        if j < len(toks) and j > i + 1 and toks[j].text in ("=", "+=", "-=", "*=", "/=", "++", "--"):
            if toks[j].text == "=" and toks[j - 1].kind == "ident":
                return True
            if toks[j].text != "=":
                return True
    return False


def convert_format(go_literal: str) -> str:
    """Go fmt verbs -> Rust format syntax, returned as a Rust string literal."""
    body = go_literal[1:-1]
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "{":
            out.append("{{")
            i += 1
            continue
        if c == "}":
            out.append("}}")
            i += 1
            continue
        if c == "%" and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt == "%":
                out.append("%")
                i += 2
                continue
            m = re.match(r"%(\.\d+)?([dsvfq])", body[i:])
            if m:
                prec, verb = m.groups()
                if verb == "q":
                    out.append("{:?}")
                elif prec and verb == "f":
                    out.append("{:" + prec + "}")
                else:
                    out.append("{}")
                i += m.end()
                continue
            raise UnsupportedConstruct(f"format verb at {body[i:i+4]!r}")
        out.append(c)
        i += 1
    return '"' + "".join(out) + '"'


# ---------------------------------------------------------------------------
# fragment emitters


def _body_tokens(frag: SourceFragment) -> list[Token]:
    toks = code_tokens(tokenize(frag.source_text))
    depth = 0
    for i, t in enumerate(toks):
        if t.text in ("(", "["):
            depth += 1
        elif t.text in (")", "]"):
            depth -= 1
        elif t.text == "{" and depth == 0:
            return toks[i:]
    raise UnsupportedConstruct(f"{frag.id}: no body found")


def _param_entries(frag: SourceFragment, index: ProjectIndex) -> list[tuple[str, GoType, str]]:
    """(go name, go type, rust param text) per parameter."""
    out = []
    for pname, ptext in frag.signature.params:
        if not pname:
            raise UnsupportedConstruct(f"{frag.id}: unnamed parameter")
        ptype = index.parse_type(ptext)
        rust_name = snake_case(pname)
        if ptype.kind == "ptr":
            mut = "mut " if fn_mutates_param(frag, pname) else ""
            rust = f"{rust_name}: &{mut}{index.rust_type(ptype.elem)}"
        else:
            rust = f"{rust_name}: {index.rust_type(ptype, 'param')}"
        out.append((pname, ptype, rust))
    return out


def _return_type_text(frag: SourceFragment, index: ProjectIndex) -> str:
    sig = frag.signature
    results = [index.parse_type(t) for t in sig.results]
    if sig.returns_error:
        inner = results[:-1]
        if not inner:
            body = "()"
        elif len(inner) == 1:
            body = index.rust_type(inner[0], "ret")
        else:
            body = "(" + ", ".join(index.rust_type(t, "ret") for t in inner) + ")"
        return f" -> Result<{body}, anyhow::Error>"
    if not results:
        return ""
    if len(results) == 1:
        return f" -> {index.rust_type(results[0], 'ret')}"
    return " -> (" + ", ".join(index.rust_type(t, "ret") for t in results) + ")"


def _setup_env(r: FnRenderer, frag: SourceFragment, index: ProjectIndex):
    if frag.kind == METHOD and frag.receiver_name and frag.receiver_name != "_":
        recv_ty = GoType("struct", name=frag.receiver_type)
        r.declare(frag.receiver_name, VarInfo(recv_ty, "self"))
    for pname, ptype, _ in _param_entries(frag, index):
        rv = VarInfo(ptype, snake_case(pname), ptr_ref=ptype.kind == "ptr")
        r.env[0][pname] = rv


def _render_body(frag: SourceFragment, index: ProjectIndex) -> list[str]:
    stmts = BodyParser(_body_tokens(frag)).parse_block()
    r = FnRenderer(index, frag)
    _setup_env(r, frag, index)
    r.render_block(stmts)
    return r.lines


def translate_function(frag: SourceFragment, index: ProjectIndex) -> str:
    params = ", ".join(p for _, _, p in _param_entries(frag, index))
    header = f"fn {snake_case(frag.name)}({params}){_return_type_text(frag, index)} {{"
    return "\n".join([header] + _render_body(frag, index) + ["}"]) + "\n"


def translate_method(frag: SourceFragment, index: ProjectIndex) -> str:
    mutates = index.method_mutates(frag.receiver_type, frag.name)
    recv = "&mut self" if mutates else "&self"
    entries = _param_entries(frag, index)
    params = ", ".join([recv] + [p for _, _, p in entries])
    header = f"    fn {snake_case(frag.name)}({params}){_return_type_text(frag, index)} {{"
    body = ["    " + line for line in _render_body(frag, index)]
    return "\n".join([f"impl {frag.receiver_type} {{", header] + body + ["    }", "}"]) + "\n"


def translate_custom_error(frag: SourceFragment, index: ProjectIndex) -> str:
    stmts = BodyParser(_body_tokens(frag)).parse_block()
    if len(stmts) != 1 or not isinstance(stmts[0], SReturn) or len(stmts[0].exprs) != 1:
        raise UnsupportedConstruct(f"{frag.id}: Error() body must be a single return")
    r = FnRenderer(index, frag)
    _setup_env(r, frag, index)
    msg = r.render(stmts[0].exprs[0])
    ty = frag.receiver_type
    return (
        f"impl std::fmt::Display for {ty} {{\n"
        "    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {\n"
        f'        write!(f, "{{}}", {msg.code})\n'
        "    }\n"
        "}\n"
        f"impl std::fmt::Debug for {ty} {{\n"
        "    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {\n"
        '        write!(f, "{}", self)\n'
        "    }\n"
        "}\n"
        f"impl std::error::Error for {ty} {{}}\n"
    )


def translate_struct(frag: SourceFragment, index: ProjectIndex) -> str:
    has_error_method = (frag.name, "Error") in index.methods
    derives = ["Clone", "Default", "PartialEq", "serde::Serialize", "serde::Deserialize"]
    if not has_error_method:
        derives.insert(0, "Debug")
    lines = [f"#[derive({', '.join(derives)})]", f"struct {frag.name} {{"]
    for fname, ftext in frag.struct_fields:
        ftype = index.parse_type(ftext)
        lines.append(f'    #[serde(rename = "{fname}")]')
        lines.append(f"    {snake_case(fname)}: {index.rust_type(ftype, 'field')},")
    lines.append("}")
    return "\n".join(lines) + "\n"


def translate_global(frag: SourceFragment, index: ProjectIndex) -> str:
    name = snake_case(frag.name)
    r = FnRenderer(index, frag)
    if frag.var_type:
        ty = index.parse_type(frag.var_type)
    else:
        ty = r._global_type(frag)
    rust_ty = index.rust_type(ty)
    if frag.var_init_is_call:
        stmts = BodyParser(code_tokens(tokenize("{" + frag.var_init + "}"))).parse_block()
        init = r.render(stmts[0].expr)  # type: ignore[attr-defined]
        return (
            "use once_cell::sync::Lazy;\n"
            f"static {name}: Lazy<{rust_ty}> = Lazy::new(|| {init.code});\n"
        )
    if frag.var_init:
        stmts = BodyParser(code_tokens(tokenize("{" + frag.var_init + "}"))).parse_block()
        init = r.render(stmts[0].expr)  # type: ignore[attr-defined]
        code = init.code
        if ty.kind == "float" and init.type.kind == "int":
            code += ".0"
        keyword = "const" if frag.is_const else "static"
        return f"{keyword} {name}: {rust_ty} = {code};\n"
    return f"static {name}: {rust_ty} = {index.zero_value(ty)};\n"


def translate_interface(frag: SourceFragment, index: ProjectIndex) -> str:
    lines = [f"trait {frag.name} {{"]
    for mname, msig in frag.interface_methods:
        pseudo = SourceFragment(
            id=f"{frag.id}.{mname}", kind=METHOD, name=mname, receiver_type=frag.name,
            signature=msig, source_text="", file=frag.file, package=frag.package, span=frag.span,
        )
        entries = []
        for pname, ptext in msig.params:
            ptype = index.parse_type(ptext)
            nm = snake_case(pname) if pname else f"arg{len(entries)}"
            if ptype.kind == "ptr":
                entries.append(f"{nm}: &{index.rust_type(ptype.elem)}")
            else:
                entries.append(f"{nm}: {index.rust_type(ptype, 'param')}")
        recv = "&mut self" if index.interface_method_mutates(mname, msig) else "&self"
        params = ", ".join([recv] + entries)
        lines.append(f"    fn {snake_case(mname)}({params}){_return_type_text(pseudo, index)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def translate_source(frag: SourceFragment, index: ProjectIndex) -> str:
    if frag.kind == GLOBAL_VAR:
        return translate_global(frag, index)
    if frag.kind == STRUCT_DEF:
        return translate_struct(frag, index)
    if frag.kind == INTERFACE_DEF:
        return translate_interface(frag, index)
    if frag.kind == FREE_FUNCTION:
        return translate_function(frag, index)
    if frag.kind == METHOD:
        if frag.name == "Error" and frag.signature and frag.signature.params == () \
                and frag.signature.results == ("string",):
            return translate_custom_error(frag, index)
        return translate_method(frag, index)
    raise UnsupportedConstruct(f"fragment kind {frag.kind}")


class FallbackProvider:
    """Offline provider: answers every query from the deterministic
    translator; repair queries re-emit the same translation."""

    def __init__(self, project: SourceProject):
        self.project = project
        self.index = ProjectIndex(project)

    def query(self, request) -> str:
        fid = request.fragment_id
        if fid.startswith("import:"):
            return "none"
        frag = self.project.by_id(fid)
        return translate_source(frag, self.index)
