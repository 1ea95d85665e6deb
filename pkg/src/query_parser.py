"""
Text formats for conjunctive queries and database snapshots.

Query grammar (one query per file, whitespace insignificant, ``%`` starts
a line comment)::

    query  := HEAD ":-" body "."          HEAD := NAME "(" varlist? ")"
    body   := atom ("," atom)*            atom := NAME "(" varlist ")"

Snapshot grammar: one fact per line, ``R a b c``, constants are NAME or
integer tokens; ``%`` comments and blank lines are ignored.
"""

import re
from typing import Iterator, List, NamedTuple, Optional, Tuple

from pydantic import ValidationError

from .query_model import (
    ArityError,
    Atom,
    ConstantPool,
    Database,
    ParseError,
    Query,
    Schema,
)

NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
INTEGER_RE = re.compile(r"-?[0-9]+\Z")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<newline>\n)
  | (?P<comment>%[^\n]*)
  | (?P<implies>:-)
  | (?P<punct>[(),.])
  | (?P<name>[A-Za-z][A-Za-z0-9_]*)
  | (?P<constant>-?[0-9]+|'[^'\n]*'|"[^"\n]*")
    """,
    re.VERBOSE,
)


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"Unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup or ""
        if kind == "newline":
            line += 1
            line_start = match.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, match.group(), line, pos - line_start + 1))
        pos = match.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _QueryParser:
    """Recursive-descent parser over the token list."""

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        token = self.advance()
        if token.kind != kind or (text is not None and token.text != text):
            wanted = text if text is not None else kind
            found = token.text or "end of input"
            raise ParseError(f"Expected {wanted!r}, found {found!r}", token.line, token.column)
        return token

    def varlist(self, allow_empty: bool) -> List[Token]:
        variables: List[Token] = []
        if self.peek().kind == "punct" and self.peek().text == ")":
            if not allow_empty:
                token = self.peek()
                raise ParseError("Atom needs at least one variable", token.line, token.column)
            return variables
        while True:
            token = self.advance()
            if token.kind == "constant":
                raise ParseError(
                    f"Constant {token.text} in an atom position; only variables are allowed",
                    token.line,
                    token.column,
                )
            if token.kind != "name":
                found = token.text or "end of input"
                raise ParseError(f"Expected a variable, found {found!r}", token.line, token.column)
            variables.append(token)
            if self.peek().kind == "punct" and self.peek().text == ",":
                self.advance()
                continue
            return variables

    def atom(self, allow_empty: bool = False) -> Tuple[Token, List[Token]]:
        name = self.expect("name")
        self.expect("punct", "(")
        variables = self.varlist(allow_empty)
        self.expect("punct", ")")
        return name, variables

    def query(self) -> Tuple[Tuple[Token, List[Token]], List[Tuple[Token, List[Token]]]]:
        head = self.atom(allow_empty=True)
        self.expect("implies")
        body = [self.atom()]
        while self.peek().kind == "punct" and self.peek().text == ",":
            self.advance()
            body.append(self.atom())
        self.expect("punct", ".")
        self.expect("eof")
        return head, body


def parse_query(text: str, schema: Optional[Schema] = None) -> Query:
    """
    Parse a query in the rule syntax.

    Args:
        text: Query text, e.g. ``"Q(x) :- E(x,y), T(y)."``
        schema: Optional schema to check atom arities against. When
            omitted, arities are inferred from the atoms.

    Returns:
        The query AST.

    Raises:
        ParseError: On malformed syntax, a duplicate head variable, an
            arity conflict, a head variable missing from the body, or a
            constant in an atom position.
    """
    parser = _QueryParser(text)
    (head_name, head_vars), body = parser.query()

    seen = {}
    for token in head_vars:
        if token.text in seen:
            raise ParseError(f"Duplicate head variable {token.text}", token.line, token.column)
        seen[token.text] = token

    arities = dict(schema.relations) if schema is not None else {}
    atoms = []
    for name, variables in body:
        expected = arities.get(name.text)
        if schema is not None and expected is None:
            raise ParseError(f"Relation {name.text} is not in the schema", name.line, name.column)
        if expected is not None and expected != len(variables):
            raise ParseError(
                f"Arity conflict for {name.text}: expected {expected}, found {len(variables)}",
                name.line,
                name.column,
            )
        arities[name.text] = len(variables)
        atoms.append(Atom(relation=name.text, vars=tuple(token.text for token in variables)))

    body_vars = {var for atom in atoms for var in atom.vars}
    for var, token in seen.items():
        if var not in body_vars:
            raise ParseError(f"Head variable {var} does not occur in the body", token.line, token.column)

    try:
        return Query(
            name=head_name.text,
            head=tuple(token.text for token in head_vars),
            atoms=tuple(atoms),
        )
    except ValidationError as error:
        raise ParseError(error.errors()[0]["msg"], head_name.line, head_name.column) from error


def format_query(q: Query) -> str:
    """Serialise a query back to the rule syntax."""
    return str(q)


def split_fact_line(raw: str, line: int) -> Optional[List[str]]:
    """Tokens of one ``R c1 ... cr`` line, or None for blank/comment lines."""
    content = raw.split("%", 1)[0].strip()
    if not content:
        return None
    parts = content.split()
    for index, part in enumerate(parts):
        if index == 0:
            if not NAME_RE.match(part):
                raise ParseError(f"Invalid relation symbol {part!r}", line)
        elif not (NAME_RE.match(part) or INTEGER_RE.match(part)):
            raise ParseError(f"Invalid constant {part!r}", line)
    return parts


def iter_facts(text: str) -> Iterator[Tuple[int, str, Tuple[str, ...]]]:
    """Yield ``(line, relation, constants)`` for every fact line."""
    for number, raw in enumerate(text.splitlines(), start=1):
        parts = split_fact_line(raw, number)
        if parts is None:
            continue
        if len(parts) < 2:
            raise ParseError(f"Fact {parts[0]} has no constants", number)
        yield number, parts[0], tuple(parts[1:])


def parse_database(
    text: str,
    schema: Optional[Schema] = None,
    constants: Optional[ConstantPool] = None,
) -> Database:
    """Parse a snapshot file into a Database; arity mismatches are ParseErrors."""
    database = Database(schema, constants)
    for line, relation, values in iter_facts(text):
        try:
            database.insert(relation, values)
        except ArityError as error:
            raise ParseError(str(error), line) from error
    return database


def format_database(database: Database) -> str:
    """Serialise a database to the snapshot grammar, in insertion order."""
    lines = [" ".join((relation,) + values) for relation, values in database.facts()]
    return "\n".join(lines) + ("\n" if lines else "")
