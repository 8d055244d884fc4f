import logging
from collections import Counter

from src.models.graphs import OpGraph, OpSequence
from src.models.models import Trajectory

logger = logging.getLogger(__name__)


def build_dag(t: Trajectory) -> OpGraph:
    """
    Aggregate parent/child span links into an operation graph.

    Roots hang off a virtual super-root that contributes no edge.
    Self-edges are kept.
    """
    ops = {span.span_id: span.op for span in t.spans}
    weights: Counter = Counter(
        (ops[span.parent_span_id], span.op)
        for span in t.spans
        if span.parent_span_id is not None
    )
    edges = {edge: weights[edge] for edge in sorted(weights)}
    return OpGraph(trace_id=t.trace_id, nodes=frozenset(ops.values()), edges=edges)


def build_call_stack(t: Trajectory) -> OpSequence:
    """Spans ordered by (start_time, span_id)."""
    ordered = sorted(t.spans, key=lambda span: (span.start_time, span.span_id))
    return OpSequence(
        trace_id=t.trace_id,
        ops=tuple(span.op for span in ordered),
        span_refs=tuple(span.span_id for span in ordered),
    )


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: OpGraph) -> str:
    """Render an OpGraph in DOT; edge labels carry the weights."""
    lines = [f"digraph {_quote(graph.trace_id)} {{"]
    for node in sorted(graph.nodes):
        lines.append(f"  {_quote(node)};")
    for (parent, child), weight in graph.edges.items():
        lines.append(f"  {_quote(parent)} -> {_quote(child)} [label=\"{weight}\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"
