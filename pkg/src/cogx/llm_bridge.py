"""Prompt assembly, chat-completion client, response parsing, and the
LLM-backed reasoner.

Templates live as verbatim text files under data/templates (their typos are
part of the contract: rendered prompts are golden-tested byte for byte).
Backends expose complete(messages, temperature) -> str; the HTTP backend
speaks the de-facto chat-completion shape, and MockBackend answers
deterministically so episodes stay reproducible without a network.
"""

from __future__ import annotations

import random
import re
import time
from dataclasses import dataclass, field
from importlib import resources

import requests

from cogx.errors import (
    BadResponse,
    MissingPlaceholder,
    RateLimited,
    Transport,
    Unparseable,
)
from cogx.explore_graph import GraphPoint, serialize_candidates
from cogx.perception import CameraRig
from cogx.reasoning import (
    AffinityTable,
    DecisionContext,
    GainParams,
    MemoryWindow,
    ReasonerChoice,
    ScriptWeights,
    StateRecord,
    clamp_words,
    scripted_select,
)
from cogx.world import EnvironmentSpec, Pose, visible_from

TEMPLATE_FILES = {
    "VQA_QUESTIONS": "vqa_questions.txt",
    "OBJECT_LABELS": "object_labels.txt",
    "EXPLORE": "explore.txt",
    "COMPRESS": "compress.txt",
    "MODEL_ADDENDUM_A": "addendum_a.txt",
    "MODEL_ADDENDUM_B": "addendum_b.txt",
}

_PLACEHOLDER_RE = re.compile(r"\*(INSERT_[A-Z_]+)\*")

DEFAULT_TEMPERATURE = 0.2
RETRY_BASE_DELAY = 1.0
RETRY_FACTOR = 2.0

CORRECTIVE_SENTENCE = (
    "Your previous answer could not be parsed. Fill out the form exactly, "
    "including the phrase 'point number:' followed by one integer from the list."
)


def load_template(template_id: str) -> str:
    filename = TEMPLATE_FILES[template_id]
    return resources.files("cogx").joinpath("data/templates").joinpath(filename).read_text(
        encoding="utf-8"
    )


def render_prompt(template: str, substitutions: dict[str, str]) -> str:
    """Replace *INSERT_..* placeholders; every one of them must be covered."""
    out = template
    for key, value in substitutions.items():
        out = out.replace(f"*{key}*", value)
    leftover = _PLACEHOLDER_RE.search(out)
    if leftover:
        raise MissingPlaceholder(leftover.group(1))
    return out


def serialize_memory(memory: MemoryWindow) -> str:
    if len(memory) == 0:
        return "No prior states."
    lines = [f"{rec.call_index}. {rec.compressed_text}" for rec in memory]
    return "\n".join(lines)


def render_explore(ctx: DecisionContext, addendum: str = "a") -> str:
    """Assemble the waypoint-selection prompt for one decision round."""
    addendum_text = load_template(
        "MODEL_ADDENDUM_A" if addendum == "a" else "MODEL_ADDENDUM_B"
    ).rstrip("\n")
    labels = "[" + ", ".join(f'"{s}"' for s in ctx.active_labels) + "]"
    subs = {
        "INSERT_QUERY_HERE": ctx.task.query,
        "INSERT_CURRENT_TIME": f"{ctx.sim_seconds:.1f}",
        "INSERT_CURRENT_POSITION": f"({ctx.pose.x:.2f}, {ctx.pose.y:.2f}, 0.0)",
        "INSERT_SCENE_DESCRIPTION": ctx.description,
        "INSERT_OBJECT_LIST": labels,
        "INSERT_FRONTIER_OBJECT_POINT_NUMBERED_LIST": serialize_candidates(
            ctx.candidate_points
        ),
        "INSERT_TOTAL_CALLS": str(ctx.total_calls),
        "INSERT_MEMORY_LENGTH": str(len(ctx.memory)),
        "INSERT_PRIOR_STATES": serialize_memory(ctx.memory),
        "INSERT_INTERRUPT_DESCRIPTION": ctx.interrupt_note,
        "INSERT_SPECIFIC_MODEL_INSTRUCTIONS": addendum_text,
    }
    return render_prompt(load_template("EXPLORE"), subs)


def parse_bracket_list(text: str) -> list[str]:
    """First well-formed bracketed, comma-separated list of quoted strings."""
    for start in range(len(text)):
        if text[start] != "[":
            continue
        items = _try_parse_list(text, start)
        if items is not None:
            return items
    raise Unparseable("no well-formed bracketed list of quoted strings found")


def _try_parse_list(text: str, start: int):
    i = start + 1
    items = []
    n = len(text)
    while True:
        while i < n and text[i] in " \t\r\n":
            i += 1
        if i >= n:
            return None
        if text[i] == "]":
            return items if items else None
        if text[i] not in "\"'":
            return None
        quote = text[i]
        j = text.find(quote, i + 1)
        if j < 0:
            return None
        items.append(text[i + 1:j].strip())
        i = j + 1
        while i < n and text[i] in " \t\r\n":
            i += 1
        if i < n and text[i] == ",":
            i += 1
        elif i < n and text[i] == "]":
            return items
        else:
            return None


@dataclass
class ParsedForm:
    point_number: int
    environment_description: str
    reasoning: str


_POINT_RE = re.compile(r"point\s+number\s*[:\-]?\s*\[?\s*#?\s*(\d+)", re.IGNORECASE)
_DESC_RE = re.compile(r"described\s+as\s*[:\-]?\s*(.*?)(?:\.\s|\.$|$)",
                      re.IGNORECASE | re.DOTALL)
_REASON_RE = re.compile(r"this\s+point\s*[:\-]?\s*(.*)$", re.IGNORECASE | re.DOTALL)


def parse_waypoint_form(text: str) -> ParsedForm:
    """Pull the chosen point id plus free-text fields out of a filled form."""
    m = _POINT_RE.search(text)
    if m is None:
        raise Unparseable("no integer after 'point number'")
    point = int(m.group(1))
    desc = ""
    dm = _DESC_RE.search(text)
    if dm:
        desc = dm.group(1).strip().strip("[]").strip()
    reason = ""
    last = None
    for rm in _REASON_RE.finditer(text):
        last = rm
    if last:
        reason = last.group(1).strip().strip("[]").rstrip(".").strip()
    return ParsedForm(point_number=point, environment_description=desc, reasoning=reason)


@dataclass
class ChatExchange:
    endpoint: str
    model: str
    messages: list[dict]
    temperature: float = DEFAULT_TEMPERATURE
    timeout: float = 30.0
    max_retries: int = 3
    api_key: str | None = None


def call_chat(exchange: ChatExchange, sleep=time.sleep, rng=random) -> str:
    """POST a chat-completion request with exponential backoff on 429/5xx."""
    headers = {}
    if exchange.api_key:
        headers["Authorization"] = f"Bearer {exchange.api_key}"
    body = {
        "model": exchange.model,
        "messages": exchange.messages,
        "temperature": exchange.temperature,
    }
    last_kind = "transport"
    for attempt in range(exchange.max_retries + 1):
        try:
            resp = requests.post(exchange.endpoint, json=body, headers=headers,
                                 timeout=exchange.timeout)
        except requests.RequestException:
            last_kind = "transport"
        else:
            if resp.status_code == 200:
                try:
                    content = resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as e:
                    raise BadResponse(f"no assistant content in response: {e}") from e
                if not isinstance(content, str):
                    raise BadResponse("assistant content is not a string")
                return content
            if resp.status_code == 429 or resp.status_code >= 500:
                last_kind = "rate"
            else:
                raise BadResponse(f"unexpected status {resp.status_code}")
        if attempt == exchange.max_retries:
            break
        delay = RETRY_BASE_DELAY * (RETRY_FACTOR ** attempt)
        sleep(delay + rng.uniform(0.0, 0.1 * delay))
    if last_kind == "rate":
        raise RateLimited(f"gave up after {exchange.max_retries + 1} attempts")
    raise Transport(f"gave up after {exchange.max_retries + 1} attempts")


class HttpBackend:
    """Live chat endpoint speaking the standard completion wire format."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 timeout: float = 30.0, max_retries: int = 3, sleep=time.sleep):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.sleep = sleep

    def complete(self, messages: list[dict], temperature: float) -> str:
        return call_chat(ChatExchange(
            endpoint=self.endpoint, model=self.model, messages=messages,
            temperature=temperature, timeout=self.timeout,
            max_retries=self.max_retries, api_key=self.api_key,
        ), sleep=self.sleep)


class SequenceBackend:
    """Canned completions popped in order; exceptions raise. Test double."""

    def __init__(self, responses: list):
        self.responses = list(responses)
        self.calls: list[list[dict]] = []

    def complete(self, messages: list[dict], temperature: float) -> str:
        self.calls.append(messages)
        if not self.responses:
            raise Transport("mock backend ran out of responses")
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


_MOCK_LINE_RE = re.compile(
    r"^(\d+)\) kind=(graph|frontier|object) label=(\S+) new=([01]) "
    r"x=(-?[\d.]+) y=(-?[\d.]+) z=0.0 dist=(-?[\d.]+) conf=(\S+)$",
    re.MULTILINE,
)


class MockBackend:
    """Deterministic offline stand-in for a chat model.

    Reads its own prompt: for waypoint selection it prefers a detected
    object point, then new frontier points, then any frontier, then the
    lowest-numbered candidate. Labels come from the list it was built with.
    """

    def __init__(self, labels: list[str] | None = None):
        self.labels = labels or ["target"]

    def complete(self, messages: list[dict], temperature: float) -> str:
        prompt = messages[-1]["content"]
        if "create a list of 3 to 5 questions" in prompt:
            return (
                '["Is there an open doorway visible?", '
                '"What type of room is shown in the image?", '
                '"Are there shelves or furniture along the walls?"]'
            )
        if "generate a comprehensive list of all objects" in prompt:
            return "[" + ", ".join(f'"{s}"' for s in self.labels) + "]"
        if "Prior output:" in prompt:
            prior = prompt.split("Prior output:", 1)[1].strip()
            return " ".join(prior.split()[:70])
        return self._fill_form(prompt)

    def _fill_form(self, prompt: str) -> str:
        rows = [
            {
                "id": int(m.group(1)), "kind": m.group(2), "label": m.group(3),
                "new": m.group(4) == "1",
            }
            for m in _MOCK_LINE_RE.finditer(prompt)
        ]
        chosen = None
        for pred in (
            lambda p: p["kind"] == "object",
            lambda p: p["kind"] == "frontier" and p["new"],
            lambda p: p["kind"] == "graph" and p["new"],
            lambda p: p["kind"] == "frontier",
        ):
            matching = [p for p in rows if pred(p)]
            if matching:
                chosen = min(matching, key=lambda p: p["id"])
                break
        if chosen is None and rows:
            chosen = min(rows, key=lambda p: p["id"])
        if chosen is None:
            return "I could not locate the numbered list."
        if chosen["kind"] == "object":
            why = (
                f"is a detected {chosen['label']} and reaching it should complete "
                "the task"
            )
        elif chosen["new"]:
            why = "is newly discovered and should reveal unexplored space"
        else:
            why = "is a frontier bordering unknown space"
        return (
            "I need to select a waypoint from a numbered list of graph points, "
            "frontier points and object points. The point I have selected is "
            f"point number: {chosen['id']}. I am selecting this point because I "
            "believe it makes strategic sense to get me closer to solving my "
            "navigation task. My environment can be described as an indoor space "
            "under active exploration. My reasoning is that this point "
            f"{why}."
        )


def generate_questions(query: str, backend, temperature: float = DEFAULT_TEMPERATURE) -> list[str]:
    """Ask the model for VQA probe questions (3-5 enforced here)."""
    prompt = render_prompt(load_template("VQA_QUESTIONS"), {"INSERT_QUERY_HERE": query})
    text = backend.complete([{"role": "user", "content": prompt}], temperature)
    items = parse_bracket_list(text)
    if not 3 <= len(items) <= 5:
        raise Unparseable(f"expected 3-5 questions, got {len(items)}")
    return items


def generate_labels(query: str, description: str, target: str, backend,
                    temperature: float = DEFAULT_TEMPERATURE) -> list[str]:
    """Ask the model for detector labels; target is forced to come first."""
    prompt = render_prompt(load_template("OBJECT_LABELS"), {
        "INSERT_SCENE_DESCRIPTION": description,
        "INSERT_QUERY_HERE": query,
    })
    text = backend.complete([{"role": "user", "content": prompt}], temperature)
    items = parse_bracket_list(text)
    deduped = []
    for it in items:
        if it and it not in deduped:
            deduped.append(it)
    if target in deduped:
        deduped.remove(target)
    labels = [target] + deduped
    return labels[:5]


def llm_select(ctx: DecisionContext, backend, addendum: str = "a",
               temperature: float = DEFAULT_TEMPERATURE,
               fallback=None) -> tuple[ReasonerChoice, bool, str]:
    """One waypoint decision through the model, with a scripted safety net.

    Returns (choice, used_fallback, raw_completion).
    """
    prompt = render_explore(ctx, addendum)
    messages = [{"role": "user", "content": prompt}]
    valid_ids = {p.id for p in ctx.candidate_points}
    text = ""
    for attempt in range(2):
        try:
            text = backend.complete(messages, temperature)
        except (Transport, RateLimited, BadResponse):
            break
        try:
            form = parse_waypoint_form(text)
        except Unparseable:
            form = None
        if form is not None and form.point_number in valid_ids:
            return (
                ReasonerChoice(
                    point_id=form.point_number,
                    environment_description=form.environment_description,
                    justification=form.reasoning,
                ),
                False,
                text,
            )
        if attempt == 0:
            messages = messages + [
                {"role": "assistant", "content": text},
                {"role": "user", "content": CORRECTIVE_SENTENCE},
            ]
    if fallback is None:
        raise Unparseable("model output unusable and no fallback provided")
    return fallback(), True, text


def llm_compress(prior_output: str, backend,
                 temperature: float = DEFAULT_TEMPERATURE) -> str:
    """Second model call that squeezes the decision into 50-100 words."""
    prompt = render_prompt(load_template("COMPRESS"),
                           {"INSERT_PRIOR_OUTPUT_HERE": prior_output})
    try:
        text = backend.complete([{"role": "user", "content": prompt}], temperature)
    except (Transport, RateLimited, BadResponse):
        text = prior_output  # extractive fallback
    return clamp_words(text)


def generate_descriptions(env: EnvironmentSpec, pose: Pose,
                          rig: CameraRig | None = None) -> str:
    """Deterministic stand-in for the VQA loop: setting, visible rooms,
    visible object classes, in stable label order."""
    rig = rig or CameraRig()
    cams = rig.as_tuples()
    parts = [
        f"The robot is exploring an indoor environment named {env.name} "
        f"covering about {env.area_m2:.0f} square meters."
    ]
    here = env.room_label_at(pose.x, pose.y)
    if here:
        parts.append(f"It is currently in the {here}.")
    else:
        parts.append("It is currently in an unlabeled area.")
    visible_rooms = []
    for room in env.rooms:
        c0, r0, c1, r1 = room.rect
        cx = (c0 + c1) / 2.0 * env.cell_size
        cy = (r0 + r1) / 2.0 * env.cell_size
        if visible_from(env, pose, cx, cy, cams):
            visible_rooms.append(room.label)
    visible_rooms = sorted(set(visible_rooms))
    if visible_rooms:
        parts.append("Visible areas include: " + ", ".join(visible_rooms) + ".")
    visible_objs = sorted({
        o.cls for o in env.objects if visible_from(env, pose, o.x, o.y, cams)
    })
    if visible_objs:
        parts.append("Visible objects include: " + ", ".join(visible_objs) + ".")
    return " ".join(parts)


class LLMReasoner:
    """Waypoint selection through a chat backend, with scripted fallback."""

    name = "llm"

    def __init__(self, backend, affinity: AffinityTable,
                 weights: ScriptWeights | None = None,
                 gain_params: GainParams | None = None,
                 addendum: str = "a",
                 temperature: float = DEFAULT_TEMPERATURE):
        self.backend = backend
        self.affinity = affinity
        self.weights = weights or ScriptWeights()
        self.gain_params = gain_params or GainParams()
        self.addendum = addendum
        self.temperature = temperature
        self.last_fallback = False
        self.last_completion = ""
        self.last_questions: list[str] = []

    def active_labels(self, task, description: str) -> list[str]:
        try:
            self.last_questions = generate_questions(task.query, self.backend,
                                                     self.temperature)
        except (Unparseable, Transport, RateLimited, BadResponse):
            self.last_questions = []
        try:
            return generate_labels(task.query, description, task.target_class,
                                   self.backend, self.temperature)
        except (Unparseable, Transport, RateLimited, BadResponse):
            return self.affinity.top_labels(task.target_class)

    def select(self, ctx: DecisionContext, grid) -> ReasonerChoice:
        choice, used_fallback, text = llm_select(
            ctx, self.backend, self.addendum, self.temperature,
            fallback=lambda: scripted_select(ctx, grid, self.affinity,
                                             self.weights, self.gain_params),
        )
        self.last_fallback = used_fallback
        self.last_completion = text
        return choice

    def compress(self, ctx: DecisionContext, choice: ReasonerChoice,
                 chosen: GraphPoint, pose: Pose, call_index: int,
                 sim_seconds: float) -> StateRecord:
        prior = self.last_completion or (
            f"Chose {chosen.kind} point {chosen.id} at ({chosen.x:.1f}, "
            f"{chosen.y:.1f}). {choice.justification}"
        )
        text = llm_compress(prior, self.backend, self.temperature)
        return StateRecord(
            call_index=call_index,
            pose=(pose.x, pose.y),
            chosen=(chosen.x, chosen.y),
            chosen_kind=chosen.kind,
            compressed_text=text,
            sim_seconds=sim_seconds,
        )
