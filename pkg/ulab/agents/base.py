"""
Base class for all ulab agents.
Each agent wraps one computational module: its operations are plain
functions, and the agent maps an operation name plus a parameter dict onto
them and packages the answer as a DataFrame with a one-line summary.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import pandas as pd

from ulab.core.errors import UnknownOperationError
from ulab.core.tables import FunctionTable, MultSpec, ensure_table


@dataclass
class AgentInput:
    """Structured input passed to an agent."""
    operation: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    context: Optional[str] = None


@dataclass
class AgentOutput:
    """Structured output returned by an agent."""
    agent: str
    operation: str
    params: Dict[str, Any] = field(default_factory=dict)
    data: Optional[pd.DataFrame] = None
    summary: str = ""
    error: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict:
        def clean(v):
            if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
                return None
            if isinstance(v, complex):
                return [v.real, v.imag]
            return v

        records = self.data.to_dict("records") if self.data is not None else []
        return {
            "agent": self.agent,
            "operation": self.operation,
            "params": self.params,
            "data": [{k: clean(v) for k, v in row.items()} for row in records],
            "columns": list(self.data.columns) if self.data is not None else [],
            "row_count": len(self.data) if self.data is not None else 0,
            "summary": self.summary,
            "error": self.error,
            "metadata": self.metadata,
        }


def parse_spec(value: Any) -> MultSpec:
    """Accept a MultSpec, a kind name, or a dict of MultSpec fields."""
    if isinstance(value, MultSpec):
        return value
    if isinstance(value, str):
        return MultSpec(value)
    if isinstance(value, dict):
        params = dict(value)
        kind = params.pop("kind")
        if kind == "custom_prime_map":
            return MultSpec.custom(params.get("prime_values", {}), params.get("default_value", 1.0))
        return MultSpec(kind, **params)
    raise UnknownOperationError(f"cannot interpret function spec {value!r}")


class BaseAgent(ABC):
    """Abstract base for all agents."""

    name: str = "base"
    description: str = ""

    def __init__(self, cache_dir: Optional[str] = None):
        self._cache_dir = cache_dir

    def table(self, spec: Any, start: int, end: int) -> FunctionTable:
        return ensure_table(parse_spec(spec), start, end, self._cache_dir)

    @abstractmethod
    def run(self, agent_input: AgentInput) -> AgentOutput:
        """Execute the agent's operation and return structured output."""
        ...

    def _dispatch(self, agent_input: AgentInput,
                  dispatch: Dict[str, Callable[[dict, Optional[str]], AgentOutput]]) -> AgentOutput:
        op = agent_input.operation.lower().replace("-", "_")
        fn = dispatch.get(op)
        if fn is None:
            raise UnknownOperationError(
                f"{self.name}: unknown operation '{op}'. Supported: {', '.join(sorted(dispatch))}")
        return fn(agent_input.parameters, agent_input.context)

    def _output(self, operation: str, params: dict, data: pd.DataFrame, summary: str,
                **metadata) -> AgentOutput:
        return AgentOutput(agent=self.name, operation=operation, params=dict(params),
                           data=data, summary=summary, metadata=metadata)

    def _fmt(self, val: float) -> str:
        return f"{val:.6g}"
