import random

import networkx as nx

from app.models.schemas import EdgeRecord, PropertyGraph, VertexRecord

GOLDEN_QUERY = (
    "select * from (select v0.id as vid0, v2.id as vid2 from g match "
    "(v2: User)-[e2: Follow]->(v0: User), (v2: User)-[e1: Share]->(v1: Link), "
    "(v0: User)-[e0: Share]->(v1: Link)) as P join D on P.vid0 = D.uid"
)
GOLDEN_ROWS = [(1, 3, 1, "paris"), (1, 4, 1, "paris"), (2, 1, 2, "rome")]


def random_graph(rng: random.Random, n: int, m: int, labels: str = "ABCD", loops: bool = False) -> PropertyGraph:
    """Random directed multigraph, with self-loops only when `loops` is set; labels drawn from `labels`."""
    graph = nx.MultiDiGraph()
    graph.add_nodes_from(range(n))
    while graph.number_of_edges() < m:
        u, v = rng.randrange(n), rng.randrange(n)
        if loops or u != v:
            graph.add_edge(u, v)
    vertices = [
        VertexRecord(vid=v, label=rng.choice(labels), attrs={"w": rng.randint(0, 9)}) for v in graph.nodes
    ]
    edges = [
        EdgeRecord(eid=i, src=u, dst=v, label=rng.choice(labels), attrs={"w": rng.randint(0, 9)})
        for i, (u, v) in enumerate(graph.edges())
    ]
    return PropertyGraph(vertices=vertices, edges=edges)
