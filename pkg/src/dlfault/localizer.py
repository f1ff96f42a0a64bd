"""Map diagnosed fault types to source lines of a Keras-style training script.

A bracket-aware tokenizer plus a small statement grammar cover the API shapes
the localization rules touch (layer constructors, ``model.add``,
``Sequential([...])``, ``compile``, ``fit``, optimizer constructors, simple
``name = expr`` assignments with one hop of indirection). Statements outside
the grammar are skipped with a warning; only malformed brackets or strings are
fatal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import ParseError
from .labels import FAULT_ORDER, FaultLabelSet, FaultType
from .mutation import (
    EpochSpec,
    LayerSpec,
    LossSpec,
    ModelSpec,
    OptimizerSpec,
    categorize_loss,
)

# ---------------------------------------------------------------------------
# tokenizer

NAME, NUMBER, STRING, OP = "NAME", "NUMBER", "STRING", "OP"

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {v: k for k, v in _OPEN.items()}
_TWO_CHAR_OPS = {"==", "!=", "<=", ">=", "**", "//", "->", "+=", "-=", "*=", "/="}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int


def tokenize(source: str) -> list[list[Token]]:
    """Split source into logical lines of tokens (newlines inside brackets and
    after backslashes continue the statement)."""
    statements: list[list[Token]] = []
    current: list[Token] = []
    stack: list[tuple[str, int]] = []
    i, n = 0, len(source)
    line = 1

    def flush():
        if current:
            statements.append(list(current))
            current.clear()

    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            i += 1
            if not stack:
                flush()
            continue
        if ch in " \t\r":
            i += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch == "\\" and i + 1 < n and source[i + 1] == "\n":
            line += 1
            i += 2
            continue
        if ch in "'\"":
            start_line = line
            triple = source[i : i + 3] in (ch * 3,)
            quote = ch * 3 if triple else ch
            i += len(quote)
            buf = []
            while True:
                if i >= n:
                    raise ParseError(start_line, "unterminated string literal")
                if source.startswith(quote, i):
                    i += len(quote)
                    break
                if source[i] == "\\" and i + 1 < n:
                    buf.append(source[i + 1])
                    if source[i + 1] == "\n":
                        line += 1
                    i += 2
                    continue
                if source[i] == "\n":
                    if not triple:
                        raise ParseError(start_line, "unterminated string literal")
                    line += 1
                buf.append(source[i])
                i += 1
            current.append(Token(STRING, "".join(buf), start_line))
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] in ".eE"):
                if source[j] in "eE" and j + 1 < n and source[j + 1] in "+-":
                    j += 2
                else:
                    j += 1
            current.append(Token(NUMBER, source[i:j], line))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            current.append(Token(NAME, source[i:j], line))
            i = j
            continue
        if ch in _OPEN:
            stack.append((ch, line))
            current.append(Token(OP, ch, line))
            i += 1
            continue
        if ch in _CLOSE:
            if not stack or stack[-1][0] != _CLOSE[ch]:
                raise ParseError(line, f"unbalanced {ch!r}")
            stack.pop()
            current.append(Token(OP, ch, line))
            i += 1
            continue
        two = source[i : i + 2]
        if two in _TWO_CHAR_OPS:
            current.append(Token(OP, two, line))
            i += 2
            continue
        current.append(Token(OP, ch, line))
        i += 1
    if stack:
        raise ParseError(stack[-1][1], f"unclosed {stack[-1][0]!r}")
    flush()
    return statements


# ---------------------------------------------------------------------------
# expression nodes and a tolerant recursive-descent parser

@dataclass(frozen=True)
class NameExpr:
    id: str
    line: int


@dataclass(frozen=True)
class AttrExpr:
    base: object
    attr: str
    line: int


@dataclass(frozen=True)
class StrExpr:
    value: str
    line: int


@dataclass(frozen=True)
class NumExpr:
    value: float
    line: int


@dataclass(frozen=True)
class ListExpr:
    items: tuple
    line: int


@dataclass(frozen=True)
class CallExpr:
    func: object
    args: tuple
    kwargs: dict  # name -> expr node
    line: int


@dataclass(frozen=True)
class OpaqueExpr:
    line: int


class _ExprParser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    def peek(self) -> Optional[Token]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def advance(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at_op(self, text) -> bool:
        t = self.peek()
        return t is not None and t.kind == OP and t.text == text

    def parse(self):
        node = self.primary()
        # binary operators and the like: swallow the rest of the operand chain,
        # keeping any calls discoverable by re-parsing the right side
        while self.peek() is not None and not self.at_op(",") and not self.at_op(")") \
                and not self.at_op("]") and not self.at_op("}"):
            t = self.advance()
            if t.kind == OP:
                continue
            # re-anchor on names so nested calls in arithmetic are still seen
            if t.kind == NAME:
                self.pos -= 1
                self.primary()
        return node

    def primary(self):
        t = self.peek()
        if t is None:
            return OpaqueExpr(0)
        if t.kind == STRING:
            self.advance()
            return StrExpr(t.text, t.line)
        if t.kind == NUMBER:
            self.advance()
            try:
                return NumExpr(float(t.text), t.line)
            except ValueError:
                return OpaqueExpr(t.line)
        if t.kind == OP and t.text == "-":
            self.advance()
            inner = self.primary()
            if isinstance(inner, NumExpr):
                return NumExpr(-inner.value, inner.line)
            return OpaqueExpr(t.line)
        if t.kind == OP and t.text == "[":
            self.advance()
            items = []
            while not self.at_op("]"):
                if self.peek() is None:
                    return ListExpr(tuple(items), t.line)
                items.append(self.parse())
                if self.at_op(","):
                    self.advance()
            self.advance()
            return self.trailers(ListExpr(tuple(items), t.line))
        if t.kind == OP and t.text == "(":
            self.advance()
            inner = OpaqueExpr(t.line)
            first = True
            while not self.at_op(")"):
                if self.peek() is None:
                    return inner
                node = self.parse()
                if first:
                    inner = node
                    first = False
                if self.at_op(","):
                    self.advance()
            self.advance()
            return self.trailers(inner)
        if t.kind == NAME:
            self.advance()
            return self.trailers(NameExpr(t.text, t.line))
        self.advance()
        return OpaqueExpr(t.line)

    def trailers(self, node):
        while True:
            if self.at_op("."):
                dot = self.advance()
                t = self.peek()
                if t is not None and t.kind == NAME:
                    self.advance()
                    node = AttrExpr(node, t.text, t.line)
                else:
                    return node
            elif self.at_op("("):
                open_tok = self.advance()
                args = []
                kwargs = {}
                while not self.at_op(")"):
                    if self.peek() is None:
                        break
                    t = self.peek()
                    nxt = self.toks[self.pos + 1] if self.pos + 1 < len(self.toks) else None
                    if (
                        t.kind == NAME
                        and nxt is not None
                        and nxt.kind == OP
                        and nxt.text == "="
                    ):
                        self.advance()
                        self.advance()
                        kwargs[t.text] = self.parse()
                    else:
                        args.append(self.parse())
                    if self.at_op(","):
                        self.advance()
                if self.at_op(")"):
                    self.advance()
                node = CallExpr(node, tuple(args), kwargs, _node_line(node, open_tok.line))
            elif self.at_op("["):
                depth = 0
                while self.peek() is not None:
                    t = self.advance()
                    if t.kind == OP and t.text == "[":
                        depth += 1
                    elif t.kind == OP and t.text == "]":
                        depth -= 1
                        if depth == 0:
                            break
            else:
                return node


def _node_line(node, fallback):
    return getattr(node, "line", fallback)


_SKIP_KEYWORDS = {
    "import", "from", "def", "class", "for", "while", "if", "elif", "else",
    "try", "except", "finally", "with", "return", "pass", "break", "continue",
    "raise", "assert", "global", "nonlocal", "del", "lambda", "yield", "print",
}


@dataclass(frozen=True)
class Statement:
    target: Optional[str]  # assignment LHS name, if any
    expr: object
    line: int


def parse_statements(source: str) -> tuple[list[Statement], list[str]]:
    statements = []
    warnings = []
    for toks in tokenize(source):
        first = toks[0]
        if first.kind == NAME and first.text in _SKIP_KEYWORDS:
            warnings.append(f"line {first.line}: skipped {first.text!r} statement")
            continue
        target = None
        body = toks
        if (
            len(toks) >= 3
            and toks[0].kind == NAME
            and toks[1].kind == OP
            and toks[1].text == "="
        ):
            target = toks[0].text
            body = toks[2:]
        parser = _ExprParser(body)
        expr = parser.parse()
        if isinstance(expr, OpaqueExpr) and target is None:
            warnings.append(f"line {first.line}: unrecognized statement skipped")
            continue
        statements.append(Statement(target=target, expr=expr, line=first.line))
    return statements, warnings


# ---------------------------------------------------------------------------
# program model

LAYER_CTORS = {
    "Dense", "Conv1D", "Conv2D", "Conv3D", "LSTM", "GRU", "SimpleRNN",
    "Activation", "Dropout", "Flatten", "MaxPooling1D", "MaxPooling2D",
    "AveragePooling1D", "AveragePooling2D", "Embedding", "BatchNormalization",
    "GlobalAveragePooling2D",
}
OPTIMIZER_CTORS = {"SGD", "RMSprop", "Adam", "Adadelta", "Adagrad"}
_OPTIMIZER_ALIASES = {
    "sgd": "SGD",
    "rmsprop": "RMSprop",
    "adam": "Adam",
    "adadelta": "Adadelta",
    "adagrad": "Adagrad",
}


def _tail_name(func) -> Optional[str]:
    if isinstance(func, NameExpr):
        return func.id
    if isinstance(func, AttrExpr):
        return func.attr
    return None


@dataclass(frozen=True)
class Construct:
    kind: str  # LayerCall | CompileCall | FitCall | OptimizerCtor | Assignment
    line: int
    call: Optional[CallExpr]
    name: Optional[str] = None  # ctor/tail name or assignment target


@dataclass
class ProgramModel:
    source: str
    constructs: list[Construct]
    binding_table: dict  # name -> (expr node, definition line)
    warnings: list[str]
    derived_spec: Optional[ModelSpec] = None

    def resolve(self, node):
        """One hop of variable indirection; returns (node, definition_line)."""
        if isinstance(node, NameExpr) and node.id in self.binding_table:
            bound, line = self.binding_table[node.id]
            return bound, line
        return node, _node_line(node, 0)

    def constructs_of(self, kind):
        return [c for c in self.constructs if c.kind == kind]


def _walk_calls(node):
    if isinstance(node, CallExpr):
        yield node
        for a in node.args:
            yield from _walk_calls(a)
        for v in node.kwargs.values():
            yield from _walk_calls(v)
        yield from _walk_calls(node.func)
    elif isinstance(node, ListExpr):
        for item in node.items:
            yield from _walk_calls(item)
    elif isinstance(node, AttrExpr):
        yield from _walk_calls(node.base)


def parse_program(source: str) -> ProgramModel:
    statements, warnings = parse_statements(source)
    constructs: list[Construct] = []
    bindings: dict = {}
    for st in statements:
        if st.target is not None:
            bindings[st.target] = (st.expr, st.line)
            constructs.append(Construct("Assignment", st.line, None, name=st.target))
        for call in _walk_calls(st.expr):
            tail = _tail_name(call.func)
            if tail is None:
                continue
            if tail in LAYER_CTORS:
                constructs.append(Construct("LayerCall", call.line, call, name=tail))
            elif tail in OPTIMIZER_CTORS:
                constructs.append(Construct("OptimizerCtor", call.line, call, name=tail))
            elif tail == "compile":
                constructs.append(Construct("CompileCall", call.line, call, name=tail))
            elif tail == "fit":
                constructs.append(Construct("FitCall", call.line, call, name=tail))
    pm = ProgramModel(
        source=source, constructs=constructs, binding_table=bindings, warnings=warnings
    )
    pm.derived_spec = _derive_spec(pm)
    return pm


def _compile_kwarg(call: CallExpr, name: str, positional_index: Optional[int] = None):
    if name in call.kwargs:
        return call.kwargs[name]
    if positional_index is not None and len(call.args) > positional_index:
        return call.args[positional_index]
    return None


def _layer_activation(call: CallExpr, ctor: str):
    """(activation name, line) for a layer call, or (None, None)."""
    if ctor == "Activation" and call.args and isinstance(call.args[0], StrExpr):
        return call.args[0].value, call.args[0].line
    act = call.kwargs.get("activation")
    if isinstance(act, StrExpr):
        return act.value, act.line
    return None, None


def _optimizer_from_node(pm: ProgramModel, node):
    """Resolve a compile() optimizer argument to (name, lr, lr_line, def_line)."""
    resolved, def_line = pm.resolve(node)
    if isinstance(resolved, StrExpr):
        name = _OPTIMIZER_ALIASES.get(resolved.value.lower())
        return name, None, None, resolved.line
    if isinstance(resolved, CallExpr):
        tail = _tail_name(resolved.func)
        if tail in OPTIMIZER_CTORS:
            lr_node = resolved.kwargs.get("lr") or resolved.kwargs.get("learning_rate")
            lr = lr_node.value if isinstance(lr_node, NumExpr) else None
            lr_line = lr_node.line if isinstance(lr_node, NumExpr) else None
            line = def_line if isinstance(node, NameExpr) else resolved.line
            return tail, lr, lr_line, line
    return None, None, None, None


def _derive_spec(pm: ProgramModel) -> Optional[ModelSpec]:
    layers = []
    for c in pm.constructs_of("LayerCall"):
        units = None
        if c.call.args and isinstance(c.call.args[0], NumExpr):
            units = int(c.call.args[0].value)
        act, _ = _layer_activation(c.call, c.name)
        layers.append(
            LayerSpec(kind=c.name, units=units, activation=act, source_line=c.line)
        )

    compiles = pm.constructs_of("CompileCall")
    fits = pm.constructs_of("FitCall")
    if not compiles:
        return None
    call = compiles[0].call
    loss_node = _compile_kwarg(call, "loss", positional_index=1)
    loss_node, loss_line = pm.resolve(loss_node) if loss_node is not None else (None, None)
    if not isinstance(loss_node, StrExpr):
        return None
    try:
        categorize_loss(loss_node.value)
    except Exception:
        return None
    loss = LossSpec(loss_node.value, loss_line if loss_line else loss_node.line)

    opt_node = _compile_kwarg(call, "optimizer", positional_index=0)
    if opt_node is None:
        return None
    name, lr, _lr_line, line = _optimizer_from_node(pm, opt_node)
    if name is None:
        return None
    optimizer = OptimizerSpec(name=name, learning_rate=lr, source_line=line)

    epochs_value, epochs_line = 1, None
    batch_size = None
    if fits:
        fit_call = fits[0].call
        ep = fit_call.kwargs.get("epochs") or fit_call.kwargs.get("nb_epoch")
        if isinstance(ep, NumExpr):
            epochs_value, epochs_line = max(1, int(ep.value)), ep.line
        else:
            epochs_line = fits[0].line
        bs = fit_call.kwargs.get("batch_size")
        if isinstance(bs, NumExpr):
            batch_size = int(bs.value)
    return ModelSpec(
        layers=tuple(layers),
        loss=loss,
        optimizer=optimizer,
        epochs=EpochSpec(epochs_value, epochs_line),
        batch_size=batch_size,
    )


# ---------------------------------------------------------------------------
# localization

@dataclass
class LocalizationReport:
    faults: dict  # fault name -> sorted list of lines
    unresolved: list  # [{"fault": name, "reason": str}]
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"faults": self.faults, "unresolved": self.unresolved, "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def localize(pm: ProgramModel, faults: FaultLabelSet) -> LocalizationReport:
    """Map each diagnosed fault type to the source lines defining it."""
    out: dict = {}
    unresolved = []
    notes = []
    compiles = pm.constructs_of("CompileCall")
    fits = pm.constructs_of("FitCall")

    def emit(ft: FaultType, lines, reason_if_empty: str):
        lines = sorted(set(lines))
        if lines:
            out[ft.value] = lines
        else:
            unresolved.append({"fault": ft.value, "reason": reason_if_empty})

    for ft in FAULT_ORDER:
        if ft not in faults:
            continue
        if ft is FaultType.LOSS:
            lines = []
            for c in compiles:
                node = _compile_kwarg(c.call, "loss", positional_index=1)
                if node is None:
                    continue
                resolved, def_line = pm.resolve(node)
                lines.append(def_line if def_line else _node_line(node, c.line))
            emit(ft, lines, "no compile call with a loss argument found")
        elif ft is FaultType.OPTIMIZER:
            lines = []
            for c in compiles:
                node = _compile_kwarg(c.call, "optimizer", positional_index=0)
                if node is None:
                    continue
                name, _lr, _lr_line, line = _optimizer_from_node(pm, node)
                if line is not None:
                    lines.append(line)
                else:
                    lines.append(_node_line(node, c.line))
            if not lines:
                lines = [c.line for c in pm.constructs_of("OptimizerCtor")]
            emit(ft, lines, "no optimizer definition found")
        elif ft is FaultType.LR:
            lines = []
            fallback = []
            for c in compiles:
                node = _compile_kwarg(c.call, "optimizer", positional_index=0)
                if node is None:
                    continue
                name, lr, lr_line, line = _optimizer_from_node(pm, node)
                if lr_line is not None:
                    lines.append(lr_line)
                elif line is not None:
                    fallback.append(line)
            if not lines and not fallback:
                for c in pm.constructs_of("OptimizerCtor"):
                    lr_node = c.call.kwargs.get("lr") or c.call.kwargs.get("learning_rate")
                    if isinstance(lr_node, NumExpr):
                        lines.append(lr_node.line)
                    else:
                        fallback.append(c.line)
            if not lines and fallback:
                lines = fallback
                notes.append("lr: default learning rate in use; reporting optimizer definition line")
            emit(ft, lines, "no optimizer definition found")
        elif ft is FaultType.EPOCH:
            lines = []
            for c in fits:
                ep = c.call.kwargs.get("epochs") or c.call.kwargs.get("nb_epoch")
                lines.append(ep.line if ep is not None else c.line)
            emit(ft, lines, "no fit call found")
        elif ft is FaultType.ACT:
            lines = []
            for c in pm.constructs_of("LayerCall"):
                act, act_line = _layer_activation(c.call, c.name)
                if act is not None:
                    lines.append(act_line if act_line else c.line)
            emit(ft, lines, "no activation found anywhere in the program")
    return LocalizationReport(faults=out, unresolved=unresolved, notes=notes)


def localize_source(source: str, faults: FaultLabelSet) -> LocalizationReport:
    return localize(parse_program(source), faults)
