from pydantic import BaseModel


class CommandDoc(BaseModel):
    usage: str
    summary: str


# .load_graph documentation
load_graph_doc = CommandDoc(
    usage=".load_graph NAME VERTICES.csv EDGES.csv",
    summary="Convert a property graph (vid,label,... and eid,src,dst,label,...) into the store.",
)

# .load_table documentation
load_table_doc = CommandDoc(
    usage=".load_table NAME FILE.csv",
    summary="Load a relation; column types are inferred (int, float, bool, string).",
)

# .stats documentation
stats_doc = CommandDoc(
    usage=".stats NAME",
    summary="Vertex, edge and per-relation counts of a graph, or the row count of a table.",
)

# .explain documentation
explain_doc = CommandDoc(
    usage=".explain QUERY",
    summary="Print the chosen physical plan with estimated cardinalities and cumulative costs.",
)

# .browse documentation
browse_doc = CommandDoc(
    usage=".browse GRAPH VID [DEPTH]",
    summary="Vertices and edges within DEPTH undirected hops of VID (no limit when omitted).",
)

# .update documentation
update_doc = CommandDoc(
    usage=".update GRAPH DELTA.txt",
    summary="Apply a batch of +V/-V/+E/-E lines in place and report the storage movement.",
)

# .bench documentation
bench_doc = CommandDoc(
    usage=".bench triangle|patterns|ablation|memory",
    summary="Run a benchmark preset against scratch data and print its report.",
)

# .set documentation
set_doc = CommandDoc(
    usage=".set KEY VALUE",
    summary=(
        "Change tau, kappa, chunk_size, format, timing, hash_ops, intersective, optimizer, "
        "candidates, stats (override file or off); block_size, segment_threshold, strategy "
        "and ref_mode before anything is loaded."
    ),
)

# .save / .open documentation
save_doc = CommandDoc(usage=".save FILE", summary="Write a snapshot of the store and its catalog.")
open_doc = CommandDoc(usage=".open FILE", summary="Replace the session contents by a snapshot.")

# catalog documentation
tables_doc = CommandDoc(usage=".tables", summary="Loaded relations with their row counts.")
graphs_doc = CommandDoc(usage=".graphs", summary="Loaded graphs with vertex and edge counts.")
ontology_doc = CommandDoc(usage=".ontology GRAPH", summary="Vertex and edge labels with their attributes.")
validate_doc = CommandDoc(usage=".validate GRAPH", summary="Check that the graph's relations are in regular form.")

# .help documentation
help_doc = CommandDoc(usage=".help [COMMAND|grammar]", summary="List commands, one command, or the query grammar.")

query_doc = CommandDoc(
    usage="QUERY",
    summary="Any line not starting with '.' is a query; rows are printed in the output format.",
)

SQL_DELTA_GRAMMAR = """\
query        = select [ ";" ] ;
select       = "select" item { "," item } [ "from" from ] { "match" path { [ "," ] path } }
               [ "where" condition ] ;
item         = "*" | ident "." "*" | operand [ [ "as" ] ident ] ;
from         = from_item { "join" from_item "on" condition
                         | "map" from_item [ "using" matcher ] } ;
from_item    = "(" select ")" [ "as" ] ident | ident [ [ "as" ] ident ] ;
matcher      = "exact" "(" column "=" column ")"
             | "fuzzy" "(" column "~" column [ "," number ] ")" ;
path         = node { edge node } ;
node         = "(" [ ident ] [ ":" ident ] ")" ;
edge         = "->" | "-" "[" [ ident ] [ ":" ident ] "]" "->" ;
condition    = conjunction { "or" conjunction } ;
conjunction  = atom { "and" atom } ;
atom         = "(" condition ")" | operand cmp operand ;
cmp          = "=" | "!=" | "<>" | "<" | "<=" | ">" | ">=" ;
operand      = column | number | "-" number | string | "true" | "false" | "null" ;
column       = ident [ "." ident ] ;
"""
