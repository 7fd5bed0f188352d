"""Parser for the line-oriented ``.sir`` text format.

Grammar (one construct per line, ``#`` starts a comment):

    module NAME [instrumented=MODE]
    global @NAME: SHAPE[:KIND] = INT
    extern @NAME [nofree]
    fn NAME(%p: SHAPE[:KIND], ...) [-> SHAPE[:KIND]] [ATTR ...] {
    LABEL:
      %x = alloca SHAPE
      ...
    }
    fn NAME(...) [-> SHAPE[:KIND]] [ATTR ...]          # declaration

Shapes: ``i8 i16 i32 i64 zst fn dyn &T *T {T, ...} union{T, ...} [T; N] [T]``.
Kinds: ``safe raw noptr none``. A missing kind defaults to the shape's ABI kind.

Design decisions:
- Single definition is enforced while parsing, so a redefinition is
  reported at its own line even when the module is never validated.
- Check pseudo-instructions get their anchors from position, exactly like
  modules built by the instrumentation passes.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ..exceptions import SafeIRError
from ..ir.checks import CheckKind, CheckSite
from ..ir.instructions import BINOPS, CMP_PREDICATES, Instruction, Opcode, SourceLocation
from ..ir.module import (
    BasicBlock,
    ExternalDecl,
    FnAttr,
    FunctionDef,
    GlobalDef,
    Param,
    ProgramModule,
)
from ..ir.types import (
    Array,
    FnPtr,
    Int,
    PtrKind,
    RawPtr,
    SafePtr,
    ShapeError,
    Slice,
    Struct,
    TraitObject,
    TypeShape,
    Union,
    ZeroSized,
    shape_kind,
)
from ..ir.validate import Diagnostic, validate_module

logger = logging.getLogger(__name__)


class IRParseError(SafeIRError):
    """Raised on a syntax error; carries the SourceLocation."""

    def __init__(self, message: str, location: SourceLocation):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}")


class ModuleValidationError(SafeIRError):
    """Raised when a parsed module violates IR invariants."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        shown = "; ".join(str(d) for d in self.diagnostics[:3])
        more = f" (+{len(self.diagnostics) - 3} more)" if len(self.diagnostics) > 3 else ""
        super().__init__(f"module failed validation: {shown}{more}")


# ============================================================================
# Tokens
# ============================================================================

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<arrow>->)
  | (?P<local>%[A-Za-z0-9_.$]+)
  | (?P<symbol>@[A-Za-z0-9_.$]+)
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.$]*)
  | (?P<punct>[(){}\[\],:;=&*])
    """,
    re.VERBOSE,
)

_HEADER_RE = re.compile(r"^module\s+([A-Za-z0-9_.$-]+)(?:\s+instrumented=([A-Za-z0-9_-]+))?\s*$")

_KIND_WORDS = {kind.value: kind for kind in PtrKind}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    column: int


class _Cursor:
    """Token stream of a single line."""

    def __init__(self, tokens: list[Token], filename: str, line: int, length: int):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename
        self.line = line
        self.length = length

    def error(self, message: str, token: Token | None = None) -> IRParseError:
        if token is None:
            token = self.peek()
        column = token.column if token is not None else self.length + 1
        return IRParseError(message, SourceLocation(self.filename, self.line, column))

    def peek(self, ahead: int = 0) -> Token | None:
        index = self.pos + ahead
        return self.tokens[index] if index < len(self.tokens) else None

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def next(self, what: str = "token") -> Token:
        token = self.peek()
        if token is None:
            raise self.error(f"expected {what}, found end of line")
        self.pos += 1
        return token

    def accept(self, text: str) -> bool:
        token = self.peek()
        if token is not None and token.text == text and token.kind in ("punct", "ident", "arrow"):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        token = self.peek()
        if token is None or token.text != text:
            found = f"'{token.text}'" if token is not None else "end of line"
            raise self.error(f"expected '{text}', found {found}")
        self.pos += 1
        return token

    def expect_kind(self, kind: str, what: str) -> Token:
        token = self.peek()
        if token is None or token.kind != kind:
            found = f"'{token.text}'" if token is not None else "end of line"
            raise self.error(f"expected {what}, found {found}")
        self.pos += 1
        return token

    def local(self) -> str:
        return self.expect_kind("local", "a value (%name)").text[1:]

    def symbol(self) -> str:
        return self.expect_kind("symbol", "a symbol (@name)").text[1:]

    def ident(self, what: str = "an identifier") -> str:
        return self.expect_kind("ident", what).text

    def integer(self) -> int:
        return int(self.expect_kind("int", "an integer").text)

    def finish(self) -> None:
        if not self.at_end():
            raise self.error(f"unexpected '{self.peek().text}'")


def tokenize(text: str, filename: str = "<string>", line: int = 1) -> list[Token]:
    """Split one line into tokens.

    Raises:
        IRParseError: On a character no token starts with.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise IRParseError(
                f"unexpected character '{text[pos]}'", SourceLocation(filename, line, pos + 1)
            )
        if match.lastgroup != "ws":
            tokens.append(Token(match.lastgroup, match.group(), pos + 1))
        pos = match.end()
    return tokens


# ============================================================================
# Shapes and kinds
# ============================================================================


def _shape_list(cur: _Cursor, close: str) -> list[TypeShape]:
    fields = []
    if cur.accept(close):
        return fields
    while True:
        fields.append(parse_shape(cur))
        if cur.accept(close):
            return fields
        cur.expect(",")


def parse_shape(cur: _Cursor) -> TypeShape:
    token = cur.next("a shape")
    if token.kind == "punct":
        if token.text == "&":
            return SafePtr(parse_shape(cur))
        if token.text == "*":
            return RawPtr(parse_shape(cur))
        if token.text == "{":
            return Struct(_shape_list(cur, "}"))
        if token.text == "[":
            elem = parse_shape(cur)
            if cur.accept(";"):
                count = cur.integer()
                cur.expect("]")
                return Array(elem, count)
            cur.expect("]")
            return Slice(elem)
    elif token.kind == "ident":
        if token.text == "union":
            cur.expect("{")
            return Union(_shape_list(cur, "}"))
        if token.text == "zst":
            return ZeroSized()
        if token.text == "dyn":
            return TraitObject()
        if token.text == "fn":
            return FnPtr()
        if re.fullmatch(r"i\d+", token.text):
            return Int(int(token.text[1:]))
    raise cur.error(f"expected a shape, found '{token.text}'", token)


def _default_kind(cur: _Cursor, shape: TypeShape, token: Token) -> PtrKind:
    try:
        return shape_kind(shape)
    except ShapeError as e:
        raise cur.error(str(e), token) from None


def parse_typed(cur: _Cursor) -> tuple[TypeShape, PtrKind]:
    """SHAPE with an optional ``:kind`` suffix."""
    start = cur.peek()
    shape = parse_shape(cur)
    if cur.accept(":"):
        word = cur.ident("a pointer kind")
        if word not in _KIND_WORDS:
            raise cur.error(f"unknown pointer kind '{word}'", cur.tokens[cur.pos - 1])
        return shape, _KIND_WORDS[word]
    return shape, _default_kind(cur, shape, start)


# ============================================================================
# Parser
# ============================================================================


class _ModuleParser:
    def __init__(self, text: str, filename: str):
        self.text = text
        self.filename = filename
        self.module: ProgramModule | None = None
        self.fn: FunctionDef | None = None
        self.block: BasicBlock | None = None
        self.defined: set[str] = set()

    def location(self, line: int, column: int = 1) -> SourceLocation:
        return SourceLocation(self.filename, line, column)

    def parse(self) -> ProgramModule:
        lineno = 0
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            if self.module is None:
                self.parse_header(line.strip(), lineno)
                continue
            cur = _Cursor(tokenize(line, self.filename, lineno), self.filename, lineno, len(line))
            if self.fn is None:
                self.parse_top_level(cur)
            else:
                self.parse_body_line(cur)
        if self.module is None:
            raise IRParseError("missing 'module' header", self.location(max(lineno, 1)))
        if self.fn is not None:
            raise IRParseError(f"function '{self.fn.name}' is not closed",
                               self.location(max(lineno, 1)))
        self.module.renumber()
        return self.module

    def parse_header(self, line: str, lineno: int):
        match = _HEADER_RE.match(line)
        if match is None:
            raise IRParseError("expected 'module NAME'", self.location(lineno))
        self.module = ProgramModule(name=match.group(1), instrumented=match.group(2))

    # ------------------------------------------------------------------------
    # Top level
    # ------------------------------------------------------------------------

    def parse_top_level(self, cur: _Cursor):
        keyword = cur.ident("'global', 'extern' or 'fn'")
        if keyword == "global":
            name = cur.symbol()
            cur.expect(":")
            start = cur.peek()
            shape = parse_shape(cur)
            kind = PtrKind.SAFE
            if cur.accept(":"):
                word = cur.ident("a pointer kind")
                if word not in _KIND_WORDS:
                    raise cur.error(f"unknown pointer kind '{word}'", start)
                kind = _KIND_WORDS[word]
            init = 0
            if cur.accept("="):
                init = cur.integer()
            cur.finish()
            self.module.globals.append(GlobalDef(name, shape, kind, init))
        elif keyword == "extern":
            name = cur.symbol()
            nofree = cur.accept("nofree")
            cur.finish()
            self.module.externals.append(ExternalDecl(name, nofree))
        elif keyword == "fn":
            self.parse_fn_header(cur)
        else:
            raise cur.error(f"unexpected '{keyword}' at top level", cur.tokens[0])

    def parse_fn_header(self, cur: _Cursor):
        name = cur.ident("a function name")
        cur.expect("(")
        params: list[Param] = []
        if not cur.accept(")"):
            while True:
                pname = cur.local()
                cur.expect(":")
                shape, kind = parse_typed(cur)
                params.append(Param(pname, shape, kind))
                if cur.accept(")"):
                    break
                cur.expect(",")
        ret_shape, ret_kind = None, PtrKind.NONPOINTER
        if cur.peek() is not None and cur.peek().kind == "arrow":
            cur.next()
            ret_shape, ret_kind = parse_typed(cur)
        attrs = set()
        has_body = False
        while not cur.at_end():
            if cur.accept("{"):
                has_body = True
                break
            token = cur.next()
            try:
                attrs.add(FnAttr.from_token(token.text))
            except ValueError as e:
                raise cur.error(str(e), token) from None
        cur.finish()
        fn = FunctionDef(name, params, ret_shape, ret_kind, [], frozenset(attrs))
        self.module.functions.append(fn)
        if has_body:
            self.fn = fn
            self.block = None
            self.defined = {p.name for p in params}

    # ------------------------------------------------------------------------
    # Function bodies
    # ------------------------------------------------------------------------

    def parse_body_line(self, cur: _Cursor):
        tokens = cur.tokens
        if len(tokens) == 1 and tokens[0].text == "}":
            if not self.fn.blocks:
                raise cur.error(f"function '{self.fn.name}' has no blocks", tokens[0])
            self.fn = None
            self.block = None
            return
        if len(tokens) == 2 and tokens[0].kind == "ident" and tokens[1].text == ":":
            self.block = BasicBlock(tokens[0].text)
            self.fn.blocks.append(self.block)
            return
        if self.block is None:
            raise cur.error("instruction outside of a block")
        inst = self.parse_instruction(cur)
        inst.loc = SourceLocation(self.filename, cur.line, tokens[0].column)
        self.block.instructions.append(inst)

    def define(self, cur: _Cursor, name: str, token: Token):
        if name in self.defined:
            raise cur.error(f"%{name} is already defined in '{self.fn.name}'", token)
        self.defined.add(name)

    def parse_instruction(self, cur: _Cursor) -> Instruction:
        result = None
        first = cur.peek()
        if first.kind == "local" and cur.peek(1) is not None and cur.peek(1).text == "=":
            result = cur.local()
            cur.expect("=")
            self.define(cur, result, first)
        op_token = cur.peek()
        mnemonic = cur.ident("an opcode")
        inst = self.parse_operation(cur, mnemonic, op_token, result)
        cur.finish()
        needs_result = inst.opcode not in (
            Opcode.STORE, Opcode.HEAPFREE, Opcode.BR, Opcode.CONDBR, Opcode.RET, Opcode.CHECK,
            Opcode.CALL,
        )
        if needs_result and result is None:
            raise cur.error(f"'{mnemonic}' must define a value", op_token)
        if not needs_result and inst.opcode is not Opcode.CALL and result is not None:
            raise cur.error(f"'{mnemonic}' does not define a value", op_token)
        return inst

    def parse_operation(self, cur: _Cursor, op: str, op_token: Token, result: str | None
                        ) -> Instruction:
        if op == "alloca":
            return Instruction(Opcode.ALLOCA, result, shape=parse_shape(cur))
        if op == "heapalloc":
            return Instruction(Opcode.HEAPALLOC, result, (cur.local(),))
        if op == "heapfree":
            return Instruction(Opcode.HEAPFREE, None, (cur.local(),))
        if op == "load":
            shape = parse_shape(cur)
            cur.expect(",")
            return Instruction(Opcode.LOAD, result, (cur.local(),), shape=shape)
        if op == "store":
            addr = cur.local()
            cur.expect(",")
            return Instruction(Opcode.STORE, None, (addr, cur.local()))
        if op == "gep":
            base = cur.local()
            cur.expect(",")
            token = cur.peek()
            if token is not None and token.kind == "local":
                operands, offset = (base, cur.local()), None
            else:
                operands, offset = (base,), cur.integer()
            cur.expect_kind("arrow", "'->'")
            return Instruction(Opcode.GEP, result, operands, shape=parse_shape(cur), offset=offset)
        if op in ("bitcast", "inttoptr", "castsafe"):
            value = cur.local()
            cur.expect("to")
            opcode = {"bitcast": Opcode.BITCAST, "inttoptr": Opcode.INTTOPTR,
                      "castsafe": Opcode.CASTSAFE}[op]
            return Instruction(opcode, result, (value,), shape=parse_shape(cur))
        if op == "ptrtoint":
            return Instruction(Opcode.PTRTOINT, result, (cur.local(),))
        if op == "phi":
            shape = parse_shape(cur)
            incoming = []
            while True:
                cur.expect("[")
                label = cur.ident("a block label")
                cur.expect(":")
                incoming.append((label, cur.local()))
                cur.expect("]")
                if not cur.accept(","):
                    break
            return Instruction(Opcode.PHI, result, shape=shape, incoming=tuple(incoming))
        if op == "call":
            return self.parse_call(cur, result, op_token)
        if op in BINOPS:
            shape = parse_shape(cur)
            lhs = cur.local()
            cur.expect(",")
            return Instruction(Opcode.BINOP, result, (lhs, cur.local()), shape=shape, binop=op)
        if op == "cmp":
            pred = cur.ident("a comparison predicate")
            if pred not in CMP_PREDICATES:
                raise cur.error(f"unknown predicate '{pred}'")
            lhs = cur.local()
            cur.expect(",")
            return Instruction(Opcode.CMP, result, (lhs, cur.local()), binop=pred)
        if op == "const":
            shape = parse_shape(cur)
            return Instruction(Opcode.CONST, result, shape=shape, imm=cur.integer())
        if op == "globaladdr":
            shape = parse_shape(cur)
            return Instruction(Opcode.GLOBALADDR, result, shape=shape, callee=cur.symbol())
        if op == "br":
            return Instruction(Opcode.BR, targets=(cur.ident("a block label"),))
        if op == "condbr":
            cond = cur.local()
            cur.expect(",")
            if_true = cur.ident("a block label")
            cur.expect(",")
            return Instruction(Opcode.CONDBR, operands=(cond,),
                               targets=(if_true, cur.ident("a block label")))
        if op == "ret":
            operands = () if cur.at_end() else (cur.local(),)
            return Instruction(Opcode.RET, operands=operands)
        if op in ("check", "ensure"):
            value = cur.local()
            cur.expect(",")
            size = cur.integer()
            kind = CheckKind.DEREF if op == "check" else CheckKind.CAST
            if op == "ensure" and not cur.at_end():
                token = cur.next()
                try:
                    kind = CheckKind.from_token(token.text)
                except ValueError as e:
                    raise cur.error(str(e), token) from None
            return Instruction(Opcode.CHECK, operands=(value,),
                               site=CheckSite(kind, "", value, size))
        raise cur.error(f"unknown opcode '{op}'", op_token)

    def parse_call(self, cur: _Cursor, result: str | None, op_token: Token) -> Instruction:
        shape = None
        token = cur.peek()
        if token is None:
            raise cur.error("expected a callee")
        if token.kind not in ("symbol", "local"):
            shape = parse_shape(cur)
        if result is not None and shape is None:
            raise cur.error("a call that defines a value needs a result shape", op_token)
        token = cur.next("a callee")
        if token.kind == "symbol":
            callee, operands = token.text[1:], []
        elif token.kind == "local":
            callee, operands = None, [token.text[1:]]
        else:
            raise cur.error("expected @function or %pointer callee", token)
        cur.expect("(")
        if not cur.accept(")"):
            while True:
                operands.append(cur.local())
                if cur.accept(")"):
                    break
                cur.expect(",")
        return Instruction(Opcode.CALL, result, tuple(operands), shape=shape, callee=callee)


def parse_module(text: str, filename: str = "<string>", validate: bool = True) -> ProgramModule:
    """Parse ``.sir`` text into a ProgramModule.

    Args:
        text: Module source.
        filename: Name recorded in every SourceLocation.
        validate: Run validate_module and raise on diagnostics.

    Returns:
        The module, with uids assigned and check anchors bound.

    Raises:
        IRParseError: On a syntax error or a redefined value.
        ModuleValidationError: If ``validate`` and the module has diagnostics.

    Example:
        >>> m = parse_module("module demo\\nfn main() {\\nentry:\\n  ret\\n}\\n")
        >>> m.functions[0].name
        'main'
    """
    module = _ModuleParser(text, filename).parse()
    if validate:
        diagnostics = validate_module(module)
        if diagnostics:
            raise ModuleValidationError(diagnostics)
    logger.debug("parsed %s: %d functions", module.name, len(module.functions))
    return module
