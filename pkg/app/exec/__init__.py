from app.exec.chunk import Chunk, Layout, chunked
from app.exec.executor import Executor, QueryResult, execute
from app.exec.operators import ExploreHashCache

__all__ = ["Chunk", "Executor", "ExploreHashCache", "Layout", "QueryResult", "chunked", "execute"]
