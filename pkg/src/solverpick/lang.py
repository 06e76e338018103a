"""A small first-order goal language with an s-expression surface syntax.

Documents contain theories, theories contain declarations (goals, lemmas,
axioms and function/predicate symbols), and declaration bodies are terms.
Every term node kind corresponds to exactly one syntactic counter in the
feature extractor, which is the whole reason this language exists.

Grammar (whitespace-separated tokens, ``;`` comments to end of line)::

    document := theory* ;
    theory   := "(" "theory" IDENT decl* ")" ;
    decl     := "(" ("goal"|"lemma"|"axiom") IDENT term ")"
              | "(" ("function"|"predicate") IDENT "(" IDENT* ")" term? ")" ;
    term     := IDENT                      -- var if bound, const-ref otherwise
              | "true" | "false" | "_" | INT | FLOAT
              | "(" "and" term term+ ")" | "(" "or" term term+ ")"
              | "(" "not" term ")"
              | "(" "->" term term ")" | "(" "<->" term term ")"
              | "(" "ite" term term term ")"
              | "(" "let" IDENT term term ")"
              | "(" "as" term IDENT ")"
              | "(" "eps" IDENT term ")"
              | "(" "match" term branch+ ")"   with branch := "(" term term ")"
              | "(" "forall" "(" IDENT+ ")" term ")"
              | "(" "exists" "(" IDENT+ ")" term ")"
              | "(" IDENT term+ ")" ;         -- apply

Inside ``match`` patterns a bare identifier is always a pattern variable
(bound in the branch body), ``_`` is a wildcard, and compound patterns are
constructor applications.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


# Term node kinds. "cast" is the surface form `as`, "const-ref" is an
# unbound zero-arity symbol occurrence, "apply" an applied symbol.
TERM_KINDS = frozenset({
    "and", "or", "not", "imp", "iff", "ite", "let", "cast", "eps", "match",
    "forall", "exists", "apply", "var", "true", "false", "wildcard",
    "int-lit", "float-lit", "const-ref",
})

LEAF_KINDS = frozenset({
    "var", "true", "false", "wildcard", "int-lit", "float-lit", "const-ref",
})

DECL_KINDS = frozenset({"goal", "lemma", "axiom", "function", "predicate"})

RESERVED = frozenset({
    "theory", "goal", "lemma", "axiom", "function", "predicate",
    "and", "or", "not", "ite", "let", "as", "eps", "match",
    "forall", "exists", "true", "false",
})

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_'-]*")
_INT_RE = re.compile(r"[0-9]+")
_FLOAT_RE = re.compile(r"[0-9]+\.[0-9]+")


class LangError(Exception):
    """Error in a document, annotated with a 1-based source position."""

    def __init__(self, message, line=0, column=0):
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.message = message
        self.line = line
        self.column = column


class ParseError(LangError):
    pass


class ValidationError(LangError):
    pass


@dataclass(frozen=True)
class Term:
    """One AST node.

    children holds subterms; for ``match`` it is the scrutinee followed by
    alternating pattern/body pairs. binders holds bound names for
    let/eps/forall/exists. symbol holds the name for var/apply/const-ref and
    the type name for cast. literal holds the source text of int/float
    literals.
    """

    kind: str
    children: tuple["Term", ...] = ()
    binders: tuple[str, ...] = ()
    symbol: str | None = None
    literal: str | None = None

    def branches(self):
        """Match branches as (pattern, body) pairs."""
        assert self.kind == "match"
        rest = self.children[1:]
        return list(zip(rest[0::2], rest[1::2]))


@dataclass(frozen=True)
class Declaration:
    kind: str
    name: str
    params: tuple[str, ...] = ()
    body: Term | None = None


@dataclass(frozen=True)
class Theory:
    name: str
    decls: tuple[Declaration, ...] = ()


@dataclass(frozen=True)
class Document:
    path: str = ""
    theories: tuple[Theory, ...] = ()


# Convenience constructors, mostly for tests and generators.

def t_and(*xs):
    return Term("and", tuple(xs))


def t_or(*xs):
    return Term("or", tuple(xs))


def t_not(x):
    return Term("not", (x,))


def t_imp(a, b):
    return Term("imp", (a, b))


def t_iff(a, b):
    return Term("iff", (a, b))


def t_ite(c, t, e):
    return Term("ite", (c, t, e))


def t_let(name, value, body):
    return Term("let", (value, body), binders=(name,))


def t_cast(x, type_name):
    return Term("cast", (x,), symbol=type_name)


def t_eps(name, body):
    return Term("eps", (body,), binders=(name,))


def t_match(scrutinee, *branches):
    kids = [scrutinee]
    for pat, body in branches:
        kids.extend((pat, body))
    return Term("match", tuple(kids))


def t_forall(names, body):
    return Term("forall", (body,), binders=tuple(names))


def t_exists(names, body):
    return Term("exists", (body,), binders=tuple(names))


def t_apply(symbol, *args):
    return Term("apply", tuple(args), symbol=symbol)


def t_var(name):
    return Term("var", symbol=name)


def t_const(name):
    return Term("const-ref", symbol=name)


def t_int(text):
    return Term("int-lit", literal=text)


def t_float(text):
    return Term("float-lit", literal=text)


TRUE = Term("true")
FALSE = Term("false")
WILDCARD = Term("wildcard")


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

@dataclass
class _Token:
    text: str
    line: int
    column: int


def _tokenize(source):
    tokens = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch == ";":
            while i < n and source[i] != "\n":
                i += 1
        elif ch in "()":
            tokens.append(_Token(ch, line, col))
            col += 1
            i += 1
        else:
            m = (_FLOAT_RE.match(source, i) or _INT_RE.match(source, i)
                 or _IDENT_RE.match(source, i))
            if m is None and source.startswith(("->", "<->"), i):
                m_text = "<->" if source.startswith("<->", i) else "->"
                tokens.append(_Token(m_text, line, col))
                col += len(m_text)
                i += len(m_text)
                continue
            if m is None and ch == "_":
                tokens.append(_Token("_", line, col))
                col += 1
                i += 1
                continue
            if m is None:
                raise ParseError(f"unexpected character {ch!r}", line, col)
            tokens.append(_Token(m.group(), line, col))
            col += len(m.group())
            i = m.end()
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self, what="token"):
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", 1, 1)
            raise ParseError(f"unexpected end of input, expected {what}",
                             last.line, last.column)
        self.pos += 1
        return tok

    def _expect(self, text):
        tok = self._next(repr(text))
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}",
                             tok.line, tok.column)
        return tok

    def _ident(self, what="identifier"):
        tok = self._next(what)
        if not _IDENT_RE.fullmatch(tok.text) or tok.text in RESERVED:
            raise ParseError(f"expected {what}, found {tok.text!r}",
                             tok.line, tok.column)
        return tok

    def document(self, path):
        theories = []
        names = set()
        while self._peek() is not None:
            th, tok = self.theory()
            if th.name in names:
                raise ParseError(f"duplicate theory name {th.name!r}",
                                 tok.line, tok.column)
            names.add(th.name)
            theories.append(th)
        return Document(path=path, theories=tuple(theories))

    def theory(self):
        self._expect("(")
        self._expect("theory")
        name_tok = self._ident("theory name")
        decls = []
        names = set()
        while self._peek() is not None and self._peek().text != ")":
            decl, tok = self.declaration()
            if decl.name in names:
                raise ParseError(f"duplicate declaration name {decl.name!r}"
                                 f" in theory {name_tok.text!r}",
                                 tok.line, tok.column)
            names.add(decl.name)
            decls.append(decl)
        self._expect(")")
        return Theory(name=name_tok.text, decls=tuple(decls)), name_tok

    def declaration(self):
        self._expect("(")
        kind_tok = self._next("declaration kind")
        kind = kind_tok.text
        if kind not in DECL_KINDS:
            raise ParseError(f"expected declaration kind, found {kind!r}",
                             kind_tok.line, kind_tok.column)
        name_tok = self._ident("declaration name")
        if kind in ("goal", "lemma", "axiom"):
            body = self.term(_Scope())
            self._expect(")")
            return Declaration(kind=kind, name=name_tok.text, body=body), name_tok
        # function/predicate: parameter list, then optional body.
        self._expect("(")
        params = []
        while self._peek() is not None and self._peek().text != ")":
            p = self._ident("parameter name")
            if p.text in params:
                raise ParseError(f"duplicate parameter name {p.text!r}",
                                 p.line, p.column)
            params.append(p.text)
        self._expect(")")
        body = None
        if self._peek() is not None and self._peek().text != ")":
            body = self.term(_Scope(params))
        self._expect(")")
        return Declaration(kind=kind, name=name_tok.text,
                           params=tuple(params), body=body), name_tok

    def term(self, scope):
        tok = self._next("term")
        text = tok.text
        if text == "(":
            return self._compound(scope)
        if text == "true":
            return TRUE
        if text == "false":
            return FALSE
        if text == "_":
            return WILDCARD
        if _FLOAT_RE.fullmatch(text):
            return t_float(text)
        if _INT_RE.fullmatch(text):
            return t_int(text)
        if _IDENT_RE.fullmatch(text) and text not in RESERVED:
            if scope.bound(text):
                return t_var(text)
            return t_const(text)
        raise ParseError(f"expected term, found {text!r}", tok.line, tok.column)

    def _compound(self, scope):
        head = self._next("operator or symbol")
        text = head.text
        if text in ("and", "or"):
            args = self._terms_until_rparen(scope)
            if len(args) < 2:
                raise ParseError(f"{text!r} needs at least 2 arguments,"
                                 f" found {len(args)}", head.line, head.column)
            return Term(text, tuple(args))
        if text == "not":
            args = self._terms_until_rparen(scope)
            if len(args) != 1:
                raise ParseError(f"'not' needs exactly 1 argument, found"
                                 f" {len(args)}", head.line, head.column)
            return t_not(args[0])
        if text in ("->", "<->"):
            kind = "imp" if text == "->" else "iff"
            args = self._terms_until_rparen(scope)
            if len(args) != 2:
                raise ParseError(f"{text!r} needs exactly 2 arguments, found"
                                 f" {len(args)}", head.line, head.column)
            return Term(kind, tuple(args))
        if text == "ite":
            args = self._terms_until_rparen(scope)
            if len(args) != 3:
                raise ParseError(f"'ite' needs exactly 3 arguments, found"
                                 f" {len(args)}", head.line, head.column)
            return t_ite(*args)
        if text == "let":
            name = self._ident("let-bound name")
            value = self.term(scope)
            body = self.term(scope.extend([name.text]))
            self._expect(")")
            return t_let(name.text, value, body)
        if text == "as":
            inner = self.term(scope)
            type_name = self._ident("type name")
            self._expect(")")
            return t_cast(inner, type_name.text)
        if text == "eps":
            name = self._ident("eps-bound name")
            body = self.term(scope.extend([name.text]))
            self._expect(")")
            return t_eps(name.text, body)
        if text == "match":
            scrutinee = self.term(scope)
            branches = []
            while self._peek() is not None and self._peek().text != ")":
                branches.append(self._branch(scope))
            rp = self._expect(")")
            if not branches:
                raise ParseError("'match' needs at least 1 branch",
                                 rp.line, rp.column)
            return t_match(scrutinee, *branches)
        if text in ("forall", "exists"):
            self._expect("(")
            names = []
            while self._peek() is not None and self._peek().text != ")":
                names.append(self._ident("bound variable").text)
            self._expect(")")
            if not names:
                raise ParseError(f"{text!r} needs at least 1 bound variable",
                                 head.line, head.column)
            body = self.term(scope.extend(names))
            self._expect(")")
            return Term(text, (body,), binders=tuple(names))
        if _IDENT_RE.fullmatch(text) and text not in RESERVED:
            args = self._terms_until_rparen(scope)
            if not args:
                raise ParseError(f"application of {text!r} needs at least 1"
                                 " argument", head.line, head.column)
            return t_apply(text, *args)
        raise ParseError(f"expected operator or symbol, found {text!r}",
                         head.line, head.column)

    def _terms_until_rparen(self, scope):
        args = []
        while self._peek() is not None and self._peek().text != ")":
            args.append(self.term(scope))
        self._expect(")")
        return args

    def _branch(self, scope):
        self._expect("(")
        pattern, names = self._pattern()
        body = self.term(scope.extend(names))
        self._expect(")")
        return pattern, body

    def _pattern(self):
        """Parse one pattern; returns (term, bound names in order)."""
        tok = self._next("pattern")
        text = tok.text
        if text == "(":
            head = self._ident("constructor name")
            args, names = [], []
            while self._peek() is not None and self._peek().text != ")":
                sub, sub_names = self._pattern()
                args.append(sub)
                names.extend(sub_names)
            self._expect(")")
            if not args:
                raise ParseError(f"constructor pattern {head.text!r} needs at"
                                 " least 1 argument", head.line, head.column)
            return t_apply(head.text, *args), names
        if text == "true":
            return TRUE, []
        if text == "false":
            return FALSE, []
        if text == "_":
            return WILDCARD, []
        if _FLOAT_RE.fullmatch(text):
            return t_float(text), []
        if _INT_RE.fullmatch(text):
            return t_int(text), []
        if _IDENT_RE.fullmatch(text) and text not in RESERVED:
            return t_var(text), [text]
        raise ParseError(f"expected pattern, found {text!r}", tok.line, tok.column)


class _Scope:
    """Immutable stack of bound names."""

    def __init__(self, names=()):
        self._names = frozenset(names)

    def extend(self, names):
        s = _Scope()
        s._names = self._names | frozenset(names)
        return s

    def bound(self, name):
        return name in self._names


def parse_document(source, path=""):
    """Parse source text into a Document; raises ParseError with position."""
    parser = _Parser(_tokenize(source))
    return parser.document(path)


def parse_term(source):
    """Parse a single closed term (helper for tests and tools)."""
    parser = _Parser(_tokenize(source))
    term = parser.term(_Scope())
    if parser._peek() is not None:
        tok = parser._peek()
        raise ParseError(f"unexpected trailing token {tok.text!r}",
                         tok.line, tok.column)
    return term


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def print_term(term):
    k = term.kind
    if k == "true":
        return "true"
    if k == "false":
        return "false"
    if k == "wildcard":
        return "_"
    if k in ("int-lit", "float-lit"):
        return term.literal
    if k in ("var", "const-ref"):
        return term.symbol
    if k in ("and", "or"):
        return f"({k} {' '.join(print_term(c) for c in term.children)})"
    if k == "not":
        return f"(not {print_term(term.children[0])})"
    if k == "imp":
        a, b = term.children
        return f"(-> {print_term(a)} {print_term(b)})"
    if k == "iff":
        a, b = term.children
        return f"(<-> {print_term(a)} {print_term(b)})"
    if k == "ite":
        return f"(ite {' '.join(print_term(c) for c in term.children)})"
    if k == "let":
        value, body = term.children
        return f"(let {term.binders[0]} {print_term(value)} {print_term(body)})"
    if k == "cast":
        return f"(as {print_term(term.children[0])} {term.symbol})"
    if k == "eps":
        return f"(eps {term.binders[0]} {print_term(term.children[0])})"
    if k == "match":
        parts = [print_term(term.children[0])]
        for pat, body in term.branches():
            parts.append(f"({print_term(pat)} {print_term(body)})")
        return f"(match {' '.join(parts)})"
    if k in ("forall", "exists"):
        return (f"({k} ({' '.join(term.binders)})"
                f" {print_term(term.children[0])})")
    if k == "apply":
        return f"({term.symbol} {' '.join(print_term(c) for c in term.children)})"
    raise ValueError(f"unknown term kind {k!r}")


def _print_declaration(decl):
    if decl.kind in ("goal", "lemma", "axiom"):
        return f"  ({decl.kind} {decl.name} {print_term(decl.body)})"
    params = " ".join(decl.params)
    if decl.body is None:
        return f"  ({decl.kind} {decl.name} ({params}))"
    return f"  ({decl.kind} {decl.name} ({params}) {print_term(decl.body)})"


def print_document(doc):
    """Render a Document so that parse_document(print_document(d)) == d.

    Raises ValidationError if the document is not well-formed (the round
    trip law only holds on well-formed documents).
    """
    validate_document(doc)
    chunks = []
    for theory in doc.theories:
        lines = [f"(theory {theory.name}"]
        lines.extend(_print_declaration(d) for d in theory.decls)
        lines.append(")")
        chunks.append("\n".join(lines))
    return "\n".join(chunks) + ("\n" if chunks else "")


# ---------------------------------------------------------------------------
# Well-formedness of hand-built ASTs
# ---------------------------------------------------------------------------

_EXACT_ARITY = {"not": 1, "imp": 2, "iff": 2, "ite": 3, "let": 2,
                "cast": 1, "eps": 1, "forall": 1, "exists": 1}


def _check_name(name, what):
    if not isinstance(name, str) or not _IDENT_RE.fullmatch(name) \
            or name in RESERVED:
        raise ValidationError(f"invalid {what} {name!r}")


def _validate_term(term, bound, in_pattern=False):
    k = term.kind
    if k not in TERM_KINDS:
        raise ValidationError(f"unknown term kind {k!r}")
    if k in LEAF_KINDS and term.children:
        raise ValidationError(f"{k} nodes take no children")
    if k == "var":
        _check_name(term.symbol, "variable name")
        # Pattern variables bind themselves; elsewhere a var must refer to
        # an enclosing binder or it would re-parse as a const-ref.
        if not in_pattern and term.symbol not in bound:
            raise ValidationError(
                f"unbound binder reference {term.symbol!r}")
        return
    if k == "const-ref":
        _check_name(term.symbol, "symbol name")
        if in_pattern:
            raise ValidationError(
                f"const-ref {term.symbol!r} not allowed in a pattern;"
                " bare pattern identifiers are variables")
        if term.symbol in bound:
            raise ValidationError(
                f"const-ref {term.symbol!r} shadowed by a binder;"
                " would re-parse as a variable")
        return
    if k == "int-lit":
        if term.literal is None or not _INT_RE.fullmatch(term.literal):
            raise ValidationError(f"bad int literal {term.literal!r}")
        return
    if k == "float-lit":
        if term.literal is None or not _FLOAT_RE.fullmatch(term.literal):
            raise ValidationError(f"bad float literal {term.literal!r}")
        return
    if k in ("true", "false", "wildcard"):
        return
    if k in _EXACT_ARITY and len(term.children) != _EXACT_ARITY[k]:
        raise ValidationError(
            f"{k} needs exactly {_EXACT_ARITY[k]} children,"
            f" has {len(term.children)}")
    if k in ("and", "or") and len(term.children) < 2:
        raise ValidationError(f"{k} needs at least 2 children")
    if k == "apply":
        _check_name(term.symbol, "applied symbol")
        if not term.children:
            raise ValidationError("apply needs at least 1 argument")
    if k == "cast":
        _check_name(term.symbol, "cast type name")
    if k in ("let", "eps"):
        if len(term.binders) != 1:
            raise ValidationError(f"{k} binds exactly 1 name")
        _check_name(term.binders[0], f"{k}-bound name")
    if k in ("forall", "exists"):
        if not term.binders:
            raise ValidationError(f"{k} needs at least 1 bound name")
        for b in term.binders:
            _check_name(b, "bound variable name")

    if k == "match":
        if len(term.children) < 3 or len(term.children) % 2 == 0:
            raise ValidationError(
                "match needs a scrutinee and at least 1 (pattern, body) pair")
        _validate_term(term.children[0], bound)
        for pat, body in term.branches():
            _validate_pattern(pat)
            names = pattern_variables(pat)
            _validate_term(body, bound | set(names))
        return
    if k == "let":
        value, body = term.children
        _validate_term(value, bound)
        _validate_term(body, bound | {term.binders[0]})
        return
    if k in ("eps", "forall", "exists"):
        _validate_term(term.children[0], bound | set(term.binders))
        return
    for child in term.children:
        _validate_term(child, bound)


def _validate_pattern(pattern):
    k = pattern.kind
    if k in ("var", "wildcard", "true", "false", "int-lit", "float-lit"):
        _validate_term(pattern, frozenset(), in_pattern=True)
        return
    if k == "apply":
        _check_name(pattern.symbol, "constructor name")
        if not pattern.children:
            raise ValidationError("constructor pattern needs at least 1"
                                  " argument")
        for sub in pattern.children:
            _validate_pattern(sub)
        return
    raise ValidationError(f"term kind {k!r} not allowed in a pattern")


def pattern_variables(pattern):
    """Names bound by a pattern, in left-to-right order."""
    if pattern.kind == "var":
        return [pattern.symbol]
    if pattern.kind == "apply":
        names = []
        for sub in pattern.children:
            names.extend(pattern_variables(sub))
        return names
    return []


def validate_document(doc):
    """Check invariants the parser guarantees by construction.

    Needed for hand-built ASTs: arity constraints, name uniqueness, and
    binder discipline (a var must sit under a matching binder, a const-ref
    must not, or printing would not round-trip).
    """
    theory_names = set()
    for theory in doc.theories:
        _check_name(theory.name, "theory name")
        if theory.name in theory_names:
            raise ValidationError(f"duplicate theory name {theory.name!r}")
        theory_names.add(theory.name)
        decl_names = set()
        for decl in theory.decls:
            if decl.kind not in DECL_KINDS:
                raise ValidationError(f"unknown declaration kind {decl.kind!r}")
            _check_name(decl.name, "declaration name")
            if decl.name in decl_names:
                raise ValidationError(
                    f"duplicate declaration name {decl.name!r}"
                    f" in theory {theory.name!r}")
            decl_names.add(decl.name)
            if decl.kind in ("goal", "lemma", "axiom"):
                if decl.body is None:
                    raise ValidationError(
                        f"{decl.kind} {decl.name!r} must carry a body")
                if decl.params:
                    raise ValidationError(
                        f"{decl.kind} {decl.name!r} takes no parameters")
                _validate_term(decl.body, frozenset())
            else:
                for p in decl.params:
                    _check_name(p, "parameter name")
                if len(set(decl.params)) != len(decl.params):
                    raise ValidationError(
                        f"duplicate parameter name in {decl.name!r}")
                if decl.body is not None:
                    _validate_term(decl.body, frozenset(decl.params))
