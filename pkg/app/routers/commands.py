import logging
import shlex
import time
from dataclasses import asdict, dataclass
from typing import Callable, Optional

from app.core.exception_handlers import handle_exception
from app.core.exceptions import ConfigError
from app.docs.commands import (
    SQL_DELTA_GRAMMAR,
    CommandDoc,
    bench_doc,
    browse_doc,
    explain_doc,
    graphs_doc,
    help_doc,
    load_graph_doc,
    load_table_doc,
    ontology_doc,
    open_doc,
    query_doc,
    save_doc,
    set_doc,
    stats_doc,
    tables_doc,
    update_doc,
    validate_doc,
)
from app.services.bench import BenchService
from app.services.output import format_rows, render_value
from app.services.session import Session

logger = logging.getLogger(__name__)

Handler = Callable[[Session, str], str]


def _args(rest: str) -> list[str]:
    try:
        return shlex.split(rest)
    except ValueError as e:
        raise ConfigError(f"cannot split arguments: {e}") from e


@dataclass
class CommandResult:
    output: str
    exit_code: int = 0


@dataclass
class Route:
    handler: Handler
    doc: CommandDoc
    min_args: int
    max_args: Optional[int]


class CommandRouter:
    """Dot-command registry; every other line is routed to the query handler."""

    def __init__(self):
        self.routes: dict[str, Route] = {}
        self.query: Optional[Handler] = None

    def command(self, name: str, doc: CommandDoc, min_args: int = 0, max_args: Optional[int] = 0):
        """
        Registers a handler taking the session and the raw argument text.

        Args:
            name (str): The command, dot included.
            doc (CommandDoc): Usage line and summary shown by `.help`.
            min_args (int): Fewest whitespace-separated arguments accepted.
            max_args (Optional[int]): Most arguments accepted; None means the rest of
                the line is one free-form argument.
        """

        def register(handler: Handler) -> Handler:
            self.routes[name] = Route(handler, doc, min_args, max_args)
            return handler

        return register

    def dispatch(self, session: Session, line: str) -> str:
        text = line.strip()
        if not text.startswith("."):
            return self.query(session, text)
        name, _, rest = text.partition(" ")
        route = self.routes.get(name.lower())
        if route is None:
            raise ConfigError(f"unknown command {name}; try .help")
        if route.max_args is not None:
            count = len(_args(rest))
            if not route.min_args <= count <= route.max_args:
                raise ConfigError(f"usage: {route.doc.usage}")
        elif not rest.strip():
            raise ConfigError(f"usage: {route.doc.usage}")
        return route.handler(session, rest.strip())


router = CommandRouter()


def _query(session: Session, sql: str) -> str:
    start = time.perf_counter()
    result = session.query(sql)
    elapsed = time.perf_counter() - start
    text = format_rows(result.columns, result.rows, session.output_format)
    if session.timing:
        text += f"\n-- {len(result.rows)} rows in {elapsed:.3f}s"
    return text


router.query = _query


@router.command(".load_graph", load_graph_doc, 3, 3)
def load_graph(session: Session, rest: str) -> str:
    name, vertices, edges = _args(rest)
    rg = session.load_graph(name, vertices, edges)
    return f"loaded graph {name}: {rg.vertex_count()} vertices, {len(rg.edges)} edges"


@router.command(".load_table", load_table_doc, 2, 2)
def load_table(session: Session, rest: str) -> str:
    name, path = _args(rest)
    return f"loaded table {name}: {session.load_table(name, path)} rows"


@router.command(".stats", stats_doc, 1, 1)
def stats(session: Session, rest: str) -> str:
    return format_rows(["item", "value"], session.stats(_args(rest)[0]), session.output_format)


@router.command(".explain", explain_doc, 1, None)
def explain(session: Session, rest: str) -> str:
    return session.explain(rest)


@router.command(".browse", browse_doc, 2, 3)
def browse(session: Session, rest: str) -> str:
    args = _args(rest)
    try:
        vid = int(args[1])
        depth = int(args[2]) if len(args) > 2 else None
    except ValueError as e:
        raise ConfigError(f"usage: {browse_doc.usage}") from e
    graph = session.browse(args[0], vid, depth)
    rows = [("V", v.vid, v.label, None, None, _attrs(v.attrs)) for v in graph.vertices]
    rows += [("E", e.eid, e.label, e.src, e.dst, _attrs(e.attrs)) for e in graph.edges]
    return format_rows(["kind", "id", "label", "src", "dst", "attrs"], rows, session.output_format)


def _attrs(attrs: dict) -> str:
    return ";".join(f"{k}={render_value(v)}" for k, v in sorted(attrs.items()))


@router.command(".update", update_doc, 2, 2)
def update(session: Session, rest: str) -> str:
    name, path = _args(rest)
    report = asdict(session.update(name, path))
    return format_rows(["counter", "value"], list(report.items()), session.output_format)


@router.command(".bench", bench_doc, 1, 1)
def bench(session: Session, rest: str) -> str:
    report = BenchService(session.settings, session.timing).run(_args(rest)[0])
    return format_rows(report.columns, report.rows, session.output_format)


@router.command(".set", set_doc, 2, 2)
def set_option(session: Session, rest: str) -> str:
    key, value = _args(rest)
    return session.set_option(key, value)


@router.command(".save", save_doc, 1, 1)
def save(session: Session, rest: str) -> str:
    path = _args(rest)[0]
    return f"saved {session.save(path)} bytes to {path}"


@router.command(".open", open_doc, 1, 1)
def open_snapshot(session: Session, rest: str) -> str:
    path = _args(rest)[0]
    session.open(path)
    return f"opened {path}: {len(session.graphs)} graphs, {len(session.tables)} tables"


@router.command(".tables", tables_doc)
def tables(session: Session, rest: str) -> str:
    rows = [(name, session.store.count(name)) for name in sorted(session.tables)]
    return format_rows(["table", "rows"], rows, session.output_format)


@router.command(".graphs", graphs_doc)
def graphs(session: Session, rest: str) -> str:
    rows = [(name, rg.vertex_count(), len(rg.edges)) for name, rg in sorted(session.graphs.items())]
    return format_rows(["graph", "vertices", "edges"], rows, session.output_format)


@router.command(".ontology", ontology_doc, 1, 1)
def ontology(session: Session, rest: str) -> str:
    found = session.ontology(_args(rest)[0])
    rows = [("V", label, " ".join(attrs)) for label, attrs in found.vertex_labels.items()]
    rows += [("E", label, " ".join(attrs)) for label, attrs in found.edge_labels.items()]
    return format_rows(["kind", "label", "attributes"], rows, session.output_format)


@router.command(".validate", validate_doc, 1, 1)
def validate(session: Session, rest: str) -> str:
    report = session.validate(_args(rest)[0])
    if report.ok:
        return "regular form: ok"
    return f"regular form: {report.violations} violations\n" + "\n".join(
        [f"overlap {a} {b}" for a, b in report.overlaps] + [f"heterogeneous {r}.{c}" for r, c in report.heterogeneous]
    )


@router.command(".help", help_doc, 0, 1)
def help_(session: Session, rest: str) -> str:
    args = _args(rest)
    if args and args[0] == "grammar":
        return SQL_DELTA_GRAMMAR.rstrip("\n")
    if args:
        name = args[0] if args[0].startswith(".") else "." + args[0]
        route = router.routes.get(name)
        if route is None:
            raise ConfigError(f"unknown command {args[0]}")
        return f"{route.doc.usage}\n  {route.doc.summary}"
    docs = [route.doc for _, route in sorted(router.routes.items())] + [query_doc]
    width = max(len(d.usage) for d in docs)
    return "\n".join(f"{d.usage.ljust(width)}  {d.summary}" for d in docs)


def run_command(session: Session, line: str) -> CommandResult:
    """
    Runs one shell line. Errors never escape: they come back as an `error:` line with
    the exit code batch mode should use.

    Args:
        session (Session): The session the command runs against.
        line (str): A dot-command or a query.

    Returns:
        CommandResult: Printable output and exit code (0 ok, 1 user error, 2 internal).
    """
    logger.debug(f"command: {line.strip()}")
    try:
        return CommandResult(router.dispatch(session, line))
    except Exception as exc:
        message, code = handle_exception(exc)
        return CommandResult(message, code)
