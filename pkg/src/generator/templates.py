"""
Class templates for synthetic trajectories.

Every template is a supervisor root with a planning llm call, one or more
agent runs (agent -> llm -> tool calls) and a closing step. Lexical
contracts are checked on the finished draft with the builtin embedder;
a draft that misses them is redrawn from the same stream, so the result
is still a pure function of the seed.
"""
import itertools
import logging
from typing import Callable, Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

from src.detectors.semantic import cosine
from src.generator import content
from src.generator.rng import Xoshiro256StarStar
from src.models.corpus import COSINE_BANDS, GeneratorSpec, TraceMetadata
from src.models.errors import GenerationError
from src.models.models import GroundTruthClass, Span, SpanStatus, Trajectory
from src.providers.builtin import builtin_embed

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 64
BASE_TIME_NS = 1_714_521_600_000_000_000  # 2024-05-01T00:00:00Z
TRACE_SPACING_NS = 3_600 * 1_000_000_000
_MS = 1_000_000


class Scenario:
    """User request a trajectory answers."""

    def __init__(self, rng: Xoshiro256StarStar):
        self.ticker, self.company = rng.choice(content.COMPANIES)
        self.category = rng.choice(content.PROMPT_CATEGORIES)
        self.style = rng.choice(content.PROMPT_STYLES)
        self.prompt = content.user_prompt(self.category, self.style, self.ticker, self.company)


class AgentRun(NamedTuple):
    agent_id: str
    llm_id: str
    tool_ids: List[str]


class Outcome(NamedTuple):
    variant: str
    exempt: FrozenSet[str]
    unique_trigrams: bool


class Draft:
    """Mutable span records of one trajectory under construction."""

    def __init__(self, rng: Xoshiro256StarStar, spec: GeneratorSpec, trace_id: str, start_ns: int):
        self.rng = rng
        self.spec = spec
        self.trace_id = trace_id
        self.records: List[dict] = []
        self._index: Dict[str, dict] = {}
        self._clock = start_ns

    def add(
        self,
        role: str,
        parent: Optional[str],
        input: str,
        output: str = "",
        status: SpanStatus = SpanStatus.OK,
        error_type: Optional[str] = None
    ) -> str:
        span_id = self.rng.hex_id()
        while span_id in self._index:
            span_id = self.rng.hex_id()
        self._clock += self.rng.between(1, 250) * _MS
        record = {
            "span_id": span_id,
            "parent_span_id": parent,
            "op": self.spec.role(role),
            "input": input,
            "output": output,
            "start_time": self._clock,
            "duration": self.rng.between(5, 900) * _MS,
            "status": status,
            "error_type": error_type,
        }
        self.records.append(record)
        self._index[span_id] = record
        return span_id

    def update(self, span_id: str, **fields) -> None:
        self._index[span_id].update(fields)

    def fail(self, span_id: str, error_type: str) -> None:
        self.update(span_id, output="", status=SpanStatus.ERROR, error_type=error_type)

    @property
    def ops(self) -> List[str]:
        return [record["op"] for record in self.records]

    @property
    def depth(self) -> int:
        levels: Dict[str, int] = {}
        for record in self.records:
            parent = record["parent_span_id"]
            levels[record["span_id"]] = 1 if parent is None else levels[parent] + 1
        return max(levels.values(), default=0)

    def to_trajectory(self, label: GroundTruthClass) -> Trajectory:
        # children are created after their parent, so a reverse pass sees them first
        latest_child_end: Dict[str, int] = {}
        ends: Dict[str, int] = {}
        for record in reversed(self.records):
            end = record["start_time"] + record["duration"]
            if record["span_id"] in latest_child_end:
                end = max(end, latest_child_end[record["span_id"]] + _MS)
            ends[record["span_id"]] = end
            parent = record["parent_span_id"]
            if parent is not None:
                latest_child_end[parent] = max(latest_child_end.get(parent, 0), end)

        spans = tuple(
            Span(
                trace_id=self.trace_id,
                span_id=record["span_id"],
                parent_span_id=record["parent_span_id"],
                op=record["op"],
                input=record["input"],
                output=record["output"],
                start_time=record["start_time"],
                end_time=ends[record["span_id"]],
                status=record["status"],
                error_type=record["error_type"],
            )
            for record in self.records
        )
        return Trajectory(trace_id=self.trace_id, spans=spans, label=label)


# ============================================================================
# Building blocks
# ============================================================================

def _tool_output(d: Draft, sc: Scenario, tool: str) -> str:
    if tool == "search":
        return content.news_result(d.rng, sc.company)
    if tool == "price":
        return content.price_result(d.rng, sc.ticker)
    return content.timeseries_result(d.rng, sc.ticker, d.rng.between(1, 15), d.rng.between(6, 10))


def _tools_for(rng: Xoshiro256StarStar, agent: str) -> List[str]:
    """1-3 calls; no tool more than twice."""
    if agent == "search_agent":
        return ["search"] * rng.between(1, 2)
    count = rng.choice((1, 2, 2, 3))
    return rng.sample(("price", "timeseries", "search"), count)


def _agents_for(rng: Xoshiro256StarStar, sc: Scenario) -> List[str]:
    if rng.chance(3, 4):
        agents = ["search_agent", "stock_agent"]
        rng.shuffle(agents)
        return agents
    return ["search_agent" if sc.category == "news" else "stock_agent"]


def _agent_run(
    d: Draft,
    sc: Scenario,
    parent: str,
    agent: str,
    tools: Sequence[str],
    failing: FrozenSet[int] = frozenset(),
    agent_fails: bool = False,
    error_type: Optional[str] = None,
    tool_outputs: Optional[Dict[int, str]] = None,
    report: Optional[str] = None,
    routing: Optional[str] = None
) -> AgentRun:
    tool_outputs = tool_outputs or {}
    agent_id = d.add(agent, parent, f"Task for {d.spec.role(agent)}: {sc.prompt}")
    llm_id = d.add(
        "llm",
        agent_id,
        f"Choose tools for {sc.ticker}",
        routing or content.routing_text(d.rng, d.spec.role(tools[0]), sc.ticker),
    )
    tool_ids = []
    for i, tool in enumerate(tools):
        tool_input = content.tool_input(tool, sc.ticker)
        if i in failing:
            tool_ids.append(d.add(tool, llm_id, tool_input, "", SpanStatus.ERROR, error_type))
        else:
            output = tool_outputs.get(i) or _tool_output(d, sc, tool)
            tool_ids.append(d.add(tool, llm_id, tool_input, output))

    if agent_fails:
        d.fail(agent_id, error_type or "tool_exception")
    else:
        d.update(agent_id, output=report or content.agent_report(d.rng, d.spec.role(agent), sc.ticker))
    return AgentRun(agent_id, llm_id, tool_ids)


def _open_root(d: Draft, sc: Scenario) -> str:
    root = d.add("supervisor", None, sc.prompt)
    d.add("llm", root, sc.prompt, content.plan_text(d.rng, sc.category, sc.company))
    return root


def _close_root(d: Draft, sc: Scenario, root: str) -> None:
    d.add("llm", root, "Compose the final answer", content.draft_text(d.rng))
    d.update(root, output=content.final_answer(d.rng, sc.company, sc.ticker))


def _near_duplicates(d: Draft, base: str, r: int) -> List[str]:
    """r noisy copies of ``base``, each close to the base and to every earlier copy."""
    base_vector = builtin_embed(base)
    copies: List[str] = []
    vectors = []
    for _ in range(r):
        chosen = base
        for _ in range(MAX_ATTEMPTS):
            candidate = content.perturb(d.rng, base, d.spec.noise_ppm)
            vector = builtin_embed(candidate)
            if cosine(vector, base_vector) > COSINE_BANDS["cycle_min"] + 0.02 and all(
                cosine(vector, other) > COSINE_BANDS["cycle_min"] for other in vectors
            ):
                chosen = candidate
                break
        copies.append(chosen)
        vectors.append(builtin_embed(chosen))
    return copies


def _repeat_runs(d: Draft, sc: Scenario, root: str, agent: str, tool: str, r: int) -> FrozenSet[str]:
    reports = _near_duplicates(d, content.agent_report(d.rng, d.spec.role(agent), sc.ticker), r)
    routings = _near_duplicates(d, content.routing_text(d.rng, d.spec.role(tool), sc.ticker), r)
    outputs = _near_duplicates(d, _tool_output(d, sc, tool), r)
    repeated = set()
    for i in range(r):
        run = _agent_run(
            d, sc, root, agent, [tool],
            tool_outputs={0: outputs[i]}, report=reports[i], routing=routings[i],
        )
        repeated.update((run.agent_id, run.llm_id, *run.tool_ids))
    return frozenset(repeated)


def _cycle_shape(d: Draft) -> Tuple[str, str, int]:
    agent = d.rng.choice(("search_agent", "stock_agent"))
    tool = "search" if agent == "search_agent" else d.rng.choice(("price", "timeseries"))
    low, high = d.spec.repeat_range
    return agent, tool, d.rng.between(low, high)


# ============================================================================
# Class templates
# ============================================================================

def _productive(d: Draft, sc: Scenario) -> Optional[Outcome]:
    root = _open_root(d, sc)
    for agent in _agents_for(d.rng, sc):
        _agent_run(d, sc, root, agent, _tools_for(d.rng, agent))
    _close_root(d, sc, root)
    return Outcome("standard", frozenset(), True)


def _error(d: Draft, sc: Scenario) -> Optional[Outcome]:
    root = _open_root(d, sc)
    agents = _agents_for(d.rng, sc)
    error_type = d.rng.choice(content.TOOL_ERROR_TYPES)

    if d.rng.chance(1, 2):
        # same agent re-invoked once, fails again, graph gives up
        agent = agents[-1]
        tool = _tools_for(d.rng, agent)[0]
        for _ in range(2):
            _agent_run(d, sc, root, agent, [tool], frozenset({0}), True, error_type)
        outcome = Outcome("retry_exhausted", frozenset(), False)
    else:
        for agent in agents[:-1]:
            _agent_run(d, sc, root, agent, _tools_for(d.rng, agent))
        tools = _tools_for(d.rng, agents[-1])
        _agent_run(d, sc, root, agents[-1], tools, frozenset({len(tools) - 1}), True, error_type)
        outcome = Outcome("late_failure", frozenset(), True)

    d.fail(root, error_type)
    return outcome


def _intermediate_error(d: Draft, sc: Scenario) -> Optional[Outcome]:
    root = _open_root(d, sc)
    agents = _agents_for(d.rng, sc)
    error_type = d.rng.choice(content.TOOL_ERROR_TYPES)

    if d.rng.chance(3, 4):
        target = d.rng.below(len(agents))
        for i, agent in enumerate(agents):
            tools = _tools_for(d.rng, agent)
            if i == target:
                _agent_run(d, sc, root, agent, [tools[0], *tools], frozenset({0}), False, error_type)
            else:
                _agent_run(d, sc, root, agent, tools)
        outcome = Outcome("tool_retry", frozenset(), True)
    else:
        agent = agents[0]
        tool = _tools_for(d.rng, agent)[0]
        _agent_run(d, sc, root, agent, [tool], frozenset({0}), True, error_type)
        _agent_run(d, sc, root, agent, [tool])
        outcome = Outcome("agent_retry", frozenset(), False)

    _close_root(d, sc, root)
    return outcome


def _redundant_step(d: Draft, sc: Scenario) -> Optional[Outcome]:
    hard = d.rng.chance_ppm(round(d.spec.hard_timeseries_ratio * 1_000_000))
    root = _open_root(d, sc)
    agents = _agents_for(d.rng, sc)
    target = "stock_agent" if hard else "search_agent"
    if target not in agents:
        agents.append(target)

    exempt: FrozenSet[str] = frozenset()
    for agent in agents:
        tools = _tools_for(d.rng, agent)
        if agent != target:
            _agent_run(d, sc, root, agent, tools)
            continue
        if hard:
            pair = _timeseries_pair(d, sc)
            others = [tool for tool in tools if tool != "timeseries"]
            tools = others + ["timeseries", "timeseries"]
        else:
            pair = _related_news_pair(d, sc)
            tools = tools + ["search"]
        if pair is None:
            return None
        run = _agent_run(d, sc, root, agent, tools, tool_outputs={len(tools) - 2: pair[0], len(tools) - 1: pair[1]})
        exempt = frozenset(run.tool_ids[-2:])

    _close_root(d, sc, root)
    return Outcome("hard_timeseries" if hard else "extra_call", exempt, True)


def _related_news_pair(d: Draft, sc: Scenario) -> Optional[Tuple[str, str]]:
    """Two headlines sharing topic words, cosine inside the redundant band."""
    words = content.pick_words(d.rng, 8)
    first = content.news_result(d.rng, sc.company, words)
    first_vector = builtin_embed(first)
    fresh_pool = [word for word in content.WORDS if word not in words]
    for _ in range(MAX_ATTEMPTS):
        shared = d.rng.between(3, 6)
        mixed = d.rng.sample(words, shared) + d.rng.sample(fresh_pool, 8 - shared)
        d.rng.shuffle(mixed)
        second = content.news_result(d.rng, sc.company, mixed)
        similarity = cosine(first_vector, builtin_embed(second))
        if COSINE_BANDS["redundant_min"] <= similarity <= COSINE_BANDS["redundant_max"]:
            return first, second
    return None


def _timeseries_pair(d: Draft, sc: Scenario) -> Optional[Tuple[str, str]]:
    """Series for the ticker and a peer over the same dates."""
    peer = d.rng.choice([ticker for ticker, _ in content.COMPANIES if ticker != sc.ticker])
    start, points = d.rng.between(1, 15), d.rng.between(6, 10)
    base = d.rng.between(2_000, 60_000)
    for _ in range(MAX_ATTEMPTS):
        first = content.timeseries_result(d.rng, sc.ticker, start, points, base)
        second = content.timeseries_result(d.rng, peer, start, points, base + d.rng.between(-300, 300))
        if cosine(builtin_embed(first), builtin_embed(second)) > COSINE_BANDS["hard_timeseries_min"]:
            return first, second
    return None


def _silent_cycle(d: Draft, sc: Scenario) -> Optional[Outcome]:
    root = _open_root(d, sc)
    agent, tool, r = _cycle_shape(d)
    repeated = _repeat_runs(d, sc, root, agent, tool, r)
    _close_root(d, sc, root)
    return Outcome(f"repeat_{r}", repeated, False)


def _error_cycle(d: Draft, sc: Scenario) -> Optional[Outcome]:
    root = _open_root(d, sc)
    agent, tool, r = _cycle_shape(d)
    repeated = _repeat_runs(d, sc, root, agent, tool, r)
    d.add(agent, root, f"Task for {d.spec.role(agent)}: {sc.prompt}", "", SpanStatus.ERROR, "recursion_limit")
    d.fail(root, "recursion_limit")
    return Outcome(f"repeat_{r}", repeated, False)


_TEMPLATES: Dict[GroundTruthClass, Callable[[Draft, Scenario], Optional[Outcome]]] = {
    GroundTruthClass.PRODUCTIVE: _productive,
    GroundTruthClass.ERROR: _error,
    GroundTruthClass.INTERMEDIATE_ERROR: _intermediate_error,
    GroundTruthClass.REDUNDANT_STEP: _redundant_step,
    GroundTruthClass.SILENT_CYCLE: _silent_cycle,
    GroundTruthClass.ERROR_CYCLE: _error_cycle,
}


# ============================================================================
# Contract checks
# ============================================================================

def has_unique_trigrams(ops: Sequence[str]) -> bool:
    grams = list(zip(ops, ops[1:], ops[2:]))
    return len(set(grams)) == len(grams)


def pairwise_below(texts: Sequence[str], limit: float) -> bool:
    vectors = [builtin_embed(text) for text in texts]
    return all(cosine(u, v) < limit for u, v in itertools.combinations(vectors, 2))


def meets_contract(d: Draft, outcome: Outcome) -> bool:
    if d.depth > d.spec.depth:
        return False
    if outcome.unique_trigrams and not has_unique_trigrams(d.ops):
        return False
    texts = [
        record["output"] for record in d.records
        if record["span_id"] not in outcome.exempt and record["output"].strip()
    ]
    return pairwise_below(texts, COSINE_BANDS["productive_max"])


def draw_trajectory(
    label: GroundTruthClass,
    rng: Xoshiro256StarStar,
    spec: GeneratorSpec,
    index: int = 0
) -> Tuple[Trajectory, TraceMetadata]:
    """
    Draw one trajectory of ``label`` together with its manifest metadata.

    Raises:
        GenerationError: no draw met the class contract within MAX_ATTEMPTS
    """
    trace_id = rng.hex_id(2)
    scenario = Scenario(rng)
    start_ns = BASE_TIME_NS + index * TRACE_SPACING_NS
    template = _TEMPLATES[label]

    for attempt in range(MAX_ATTEMPTS):
        draft = Draft(rng, spec, trace_id, start_ns)
        outcome = template(draft, scenario)
        if outcome is None or not meets_contract(draft, outcome):
            continue
        if attempt:
            logger.debug(f"{label.value} trajectory {trace_id} accepted after {attempt + 1} draws")
        metadata = TraceMetadata(
            label=label,
            variant=outcome.variant,
            prompt_category=scenario.category,
            prompt_style=scenario.style,
        )
        return draft.to_trajectory(label), metadata

    raise GenerationError(
        f"Could not draw a {label.value} trajectory meeting its contract in {MAX_ATTEMPTS} attempts"
    )


def generate_trajectory(
    label: GroundTruthClass,
    rng: Xoshiro256StarStar,
    spec: GeneratorSpec,
    index: int = 0
) -> Trajectory:
    """Labeled trajectory of the requested class; advances ``rng``."""
    return draw_trajectory(label, rng, spec, index)[0]
