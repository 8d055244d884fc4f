from typing import Dict, FrozenSet, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

Edge = Tuple[str, str]


class OpGraph(BaseModel):
    """
    Operation-level DAG of a trajectory.

    Nodes are operation names; an edge (parent_op, child_op) carries the
    number of parent/child span pairs with those operations.
    """
    model_config = ConfigDict(frozen=True)

    trace_id: str = Field(..., description="Trajectory the graph was built from")
    nodes: FrozenSet[str] = Field(default_factory=frozenset)
    edges: Dict[Edge, int] = Field(
        default_factory=dict,
        description="(parent_op, child_op) -> occurrence count"
    )

    @model_validator(mode='after')
    def check_weights(self) -> "OpGraph":
        for edge, weight in self.edges.items():
            if weight < 1:
                raise ValueError(f"Edge {edge} has weight {weight}, expected >= 1")
        return self

    @property
    def total_weight(self) -> int:
        return sum(self.edges.values())


class OpSequence(BaseModel):
    """Operation names of a trajectory in creation order, with the span ids behind them."""
    model_config = ConfigDict(frozen=True)

    trace_id: str
    ops: Tuple[str, ...] = ()
    span_refs: Tuple[str, ...] = ()

    @model_validator(mode='after')
    def check_parallel(self) -> "OpSequence":
        if len(self.ops) != len(self.span_refs):
            raise ValueError("ops and span_refs must have the same length")
        return self

    def __len__(self) -> int:
        return len(self.ops)
