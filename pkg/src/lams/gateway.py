"""Chat-completion access with token logprobs, plus distribution extraction.

One real HTTP backend (any chat-completions endpoint that returns top-k token
logprobs) and deterministic in-process backends for tests and harness runs.
All mode-switch decisions flow through extract_group_distributions, so every
backend must produce letter tokens with alternatives at the answer positions.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .actions import (
    GROUP_BY_NUMBER,
    PROMPT_TEXT,
    ActionDirection,
    DirectionGroup,
    direction_of,
)


class GatewayError(Exception):
    """Base for all provider-side failures; sessions degrade, never crash."""


class Timeout(GatewayError):
    pass


class AuthFailure(GatewayError):
    pass


class ProviderError(GatewayError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned {status}: {body[:200]}")
        self.status = status
        self.body = body


class ParseError(GatewayError):
    pass


class LetterTokenNotFound(GatewayError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 256
    temperature: float = 0.0
    want_logprobs: bool = False
    top_alternatives: int = 5

    def __post_init__(self):
        if self.want_logprobs and self.top_alternatives < 4:
            raise ValueError("need at least 4 alternatives to cover letters A-D")


@dataclass(frozen=True)
class TokenInfo:
    text: str
    logprob: float
    alternatives: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        probs = [lp for _, lp in self.alternatives]
        if probs != sorted(probs, reverse=True):
            object.__setattr__(
                self, "alternatives",
                tuple(sorted(self.alternatives, key=lambda a: -a[1])),
            )


@dataclass(frozen=True)
class CompletionResult:
    text: str
    tokens: tuple[TokenInfo, ...] = ()


@dataclass(frozen=True)
class GroupDistribution:
    """Per-group probability mass over candidate action directions."""

    group: DirectionGroup
    probs: dict[ActionDirection, float]

    def __post_init__(self):
        bad = set(self.probs) - set(self.group.members)
        if bad:
            raise ValueError(f"directions {bad} not in group {self.group}")
        total = sum(self.probs.values())
        if self.probs and abs(total - 1.0) > 1e-9:
            object.__setattr__(
                self, "probs", {d: p / total for d, p in self.probs.items()}
            )

    def ranked(self) -> list[tuple[ActionDirection, float]]:
        """Directions by descending probability; ties break in letter order."""
        order = {d: i for i, d in enumerate(self.group.members)}
        return sorted(self.probs.items(), key=lambda kv: (-kv[1], order[kv[0]]))

    def to_letter_probs(self) -> dict[str, float]:
        return {
            self.group.letters[self.group.members.index(d)]: p
            for d, p in self.probs.items()
        }


_GROUP_VALUE_RE = {
    n: re.compile(r'"Group\s+%d"\s*:\s*"' % n) for n in (1, 2, 3, 4)
}


def _normalize_letter(token_text: str) -> str | None:
    stripped = token_text.strip().strip('"').strip()
    if not stripped:
        return None
    first = stripped[0].upper()
    return first if first in "ABCD" else None


def extract_group_distributions(result: CompletionResult) -> dict[DirectionGroup, GroupDistribution]:
    """Locate each group's answer letter token and renormalize its alternatives.

    Mass on tokens that do not normalize to a letter valid for the group is
    discarded before renormalization.
    """
    spans = []
    offset = 0
    for tok in result.tokens:
        spans.append((offset, offset + len(tok.text), tok))
        offset += len(tok.text)

    positions: dict[int, int] = {}
    for number in (1, 2, 3, 4):
        m = _GROUP_VALUE_RE[number].search(result.text)
        if not m:
            raise ParseError(f"completion lacks a Group {number} record")
        idx = m.end()
        while idx < len(result.text) and result.text[idx].isspace():
            idx += 1
        if idx >= len(result.text):
            raise ParseError(f"Group {number} record truncated")
        positions[number] = idx

    out: dict[DirectionGroup, GroupDistribution] = {}
    for number, idx in positions.items():
        group = GROUP_BY_NUMBER[number]
        token = None
        for start, end, tok in spans:
            if start <= idx < end:
                token = tok
                break
        if token is None:
            raise LetterTokenNotFound(f"no token covers Group {number} answer position")

        candidates = dict(token.alternatives)
        candidates.setdefault(token.text, token.logprob)
        letter_mass: dict[str, float] = {}
        for text, logprob in candidates.items():
            letter = _normalize_letter(text)
            if letter is None or letter not in group.letters:
                continue
            prob = math.exp(logprob)
            letter_mass[letter] = max(letter_mass.get(letter, 0.0), prob)
        if not letter_mass:
            raise LetterTokenNotFound(
                f"no valid letter alternatives at Group {number} answer position"
            )
        total = sum(letter_mass.values())
        out[group] = GroupDistribution(
            group,
            {direction_of(group, letter): p / total for letter, p in letter_mass.items()},
        )
    return out


def parse_answer_letters(result: CompletionResult) -> dict[DirectionGroup, ActionDirection]:
    """Read the letters literally written in the response text, one per group."""
    out = {}
    for number in (1, 2, 3, 4):
        group = GROUP_BY_NUMBER[number]
        m = _GROUP_VALUE_RE[number].search(result.text)
        if not m:
            raise ParseError(f"completion lacks a Group {number} record")
        idx = m.end()
        while idx < len(result.text) and result.text[idx].isspace():
            idx += 1
        letter = result.text[idx: idx + 1].upper()
        if letter not in group.letters:
            raise ParseError(f"Group {number} answer letter {letter!r} invalid")
        out[group] = direction_of(group, letter)
    return out


def build_completion(letter_probs: dict[int, dict[str, float]]) -> CompletionResult:
    """Construct a completion whose letter tokens carry the given probabilities.

    The written answer per group is the highest-probability letter; its token
    alternatives carry every nonzero letter at log probability.
    """
    text_parts = ["{\n"]
    tokens = [TokenInfo("{\n", 0.0)]
    for number in (1, 2, 3, 4):
        group = GROUP_BY_NUMBER[number]
        probs = {
            letter.upper(): p
            for letter, p in letter_probs[number].items()
            if p > 0.0
        }
        if not probs:
            raise ValueError(f"group {number} has no positive-probability letters")
        for letter in probs:
            if letter not in group.letters:
                raise ValueError(f"letter {letter} invalid for group {number}")
        best = sorted(probs.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        direction = direction_of(group, best)

        head = f'"Group {number}": "'
        tail = f': {PROMPT_TEXT[direction]}",\n' if number < 4 else f': {PROMPT_TEXT[direction]}"\n'
        alternatives = tuple(
            (letter, math.log(p)) for letter, p in sorted(probs.items(), key=lambda kv: -kv[1])
        )
        text_parts += [head, best, tail]
        tokens += [
            TokenInfo(head, 0.0),
            TokenInfo(best, math.log(probs[best]), alternatives),
            TokenInfo(tail, 0.0),
        ]
    text_parts.append("}")
    tokens.append(TokenInfo("}", 0.0))
    return CompletionResult(text="".join(text_parts), tokens=tuple(tokens))


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResult: ...


@dataclass(frozen=True)
class BackendConfig:
    backend: str = "mock"                     # mock | real
    endpoint: str = ""
    model: str = ""
    auth_env: str = "LAMS_API_KEY"
    timeout_s: float = 30.0
    retries: int = 2
    mock_script: str = ""

    def __post_init__(self):
        if self.backend == "real" and not (self.endpoint and self.model):
            raise ValueError("real backend requires endpoint and model")


@dataclass
class ScriptEntry:
    """One scripted response: matched when every substring appears in the prompt."""

    match: list[str]
    groups: dict[int, dict[str, float]] | None = None
    rule_response: str | None = None


class ScriptedMockBackend:
    """Deterministic mock driven by an ordered first-match-wins script.

    Mode-switch calls (want_logprobs) answer from the matching entry's group
    probabilities; rule-generation calls answer with its rule_response text.
    The last entry must match unconditionally (empty match list).
    """

    def __init__(self, entries: list[ScriptEntry], delay_s: float = 0.0):
        if not entries or entries[-1].match:
            raise ValueError("mock script requires a final fallthrough entry")
        self.entries = entries
        self.delay_s = delay_s
        self.calls: list[CompletionRequest] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedMockBackend":
        raw = json.loads(Path(path).read_text())
        entries = [
            ScriptEntry(
                match=list(e.get("match", [])),
                groups={int(k): v for k, v in e["groups"].items()} if "groups" in e else None,
                rule_response=e.get("rule_response"),
            )
            for e in raw["entries"]
        ]
        return cls(entries, delay_s=raw.get("delay_s", 0.0))

    def _find(self, prompt: str, need_groups: bool) -> ScriptEntry:
        for entry in self.entries:
            if need_groups and entry.groups is None:
                continue
            if not need_groups and entry.rule_response is None:
                continue
            if all(s in prompt for s in entry.match):
                return entry
        raise ParseError("mock script has no matching entry for this request kind")

    def complete(self, request: CompletionRequest) -> CompletionResult:
        if self.delay_s:
            time.sleep(self.delay_s)
        self.calls.append(request)
        if request.want_logprobs:
            entry = self._find(request.prompt, need_groups=True)
            return build_completion(entry.groups)
        entry = self._find(request.prompt, need_groups=False)
        return CompletionResult(text=entry.rule_response or "")


NeedProvider = Callable[[], dict[DirectionGroup, ActionDirection]]


def _needs_to_letter_probs(needs: dict[DirectionGroup, ActionDirection]) -> dict[int, dict[str, float]]:
    probs = {}
    for number in (1, 2, 3, 4):
        group = GROUP_BY_NUMBER[number]
        need = needs.get(group)
        letter = group.letters[group.members.index(need)] if need else "A"
        probs[number] = {letter: 1.0}
    return probs


class OracleBackend:
    """Always-correct predictor: answers with whatever the caller says is needed.

    Groups without a stated need default to their first letter. Used by the
    harness to bound scripted-user behavior (zero manual switches expected).
    """

    def __init__(self, need_provider: NeedProvider,
                 rule_response: str = "- No additional rules."):
        self.need_provider = need_provider
        self.rule_response = rule_response

    def complete(self, request: CompletionRequest) -> CompletionResult:
        if not request.want_logprobs:
            return CompletionResult(text=self.rule_response)
        return build_completion(_needs_to_letter_probs(self.need_provider()))


GRIPPER_RULE = (
    'Only map "Open gripper" or "Close gripper" onto the joystick when the task '
    "requires grasping or releasing an object right now."
)
ROTATION_RULE = (
    "When the arm must change its orientation, prefer the rotation actions "
    '("Roll left/right", "Rotate left/right") over translations for the lateral '
    "joystick directions."
)


# Settled correction lines look like `"Group 3": "B: Roll left"`; the prompt
# template's own `"Group 3": "A/B/C: ..."` lines never match.
_VERTICAL_EXAMPLE_RE = re.compile(r'"Group [12]": "[A-D]: ')
_LATERAL_EXAMPLE_RE = re.compile(r'"Group [34]": "[A-C]: ')


class StagedGripperBackend:
    """Mock for the incremental-improvement scenario.

    Without evidence in the prompt it wrongly maps the vertical joystick
    directions to the gripper and the lateral ones to translations. Evidence
    is either the injected rule text or demonstrated corrections (settled
    example lines); one vertical correction fixes the gripper errors, and
    lateral errors persist until enough lateral corrections accumulated.
    Rule generation emits the gripper rule as soon as one example exists and
    the rotation rule at the lateral-correction threshold.
    """

    def __init__(self, need_provider: NeedProvider, rotation_examples_needed: int = 2):
        self.need_provider = need_provider
        self.rotation_examples_needed = rotation_examples_needed

    def complete(self, request: CompletionRequest) -> CompletionResult:
        lateral_examples = len(_LATERAL_EXAMPLE_RE.findall(request.prompt))
        vertical_examples = len(_VERTICAL_EXAMPLE_RE.findall(request.prompt))
        if not request.want_logprobs:
            rules = [f"1. {GRIPPER_RULE}"]
            if lateral_examples >= self.rotation_examples_needed:
                rules.append(f"2. {ROTATION_RULE}")
            return CompletionResult(text="\n\n".join(rules))

        probs = _needs_to_letter_probs(self.need_provider())
        if GRIPPER_RULE not in request.prompt and vertical_examples < 1:
            probs[1] = {"D": 1.0}  # Open gripper
            probs[2] = {"D": 1.0}  # Close gripper
        if ROTATION_RULE not in request.prompt \
                and lateral_examples < self.rotation_examples_needed:
            probs[3] = {"A": 1.0}  # Move left
            probs[4] = {"A": 1.0}  # Move right
        return build_completion(probs)


class ReplayBackend:
    """Answers prompts from recorded responses, FIFO per distinct prompt."""

    def __init__(self):
        self._responses: dict[str, list[CompletionResult]] = {}

    def record(self, prompt: str, result: CompletionResult):
        self._responses.setdefault(prompt, []).append(result)

    def record_letter_probs(self, prompt: str, letter_probs: dict[int, dict[str, float]]):
        self.record(prompt, build_completion(letter_probs))

    def complete(self, request: CompletionRequest) -> CompletionResult:
        queue = self._responses.get(request.prompt)
        if not queue:
            raise ParseError("replay backend has no recorded response for this prompt")
        return queue.pop(0)


class HttpBackend:
    """Chat-completions client with top-k token logprobs and retry/backoff."""

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: CompletionRequest) -> CompletionResult:
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        if request.want_logprobs:
            body["logprobs"] = True
            body["top_logprobs"] = request.top_alternatives

        last_error: GatewayError | None = None
        for attempt in range(self.config.retries + 1):
            try:
                response = self._client.post(
                    self.config.endpoint, json=body, headers=self._headers()
                )
            except httpx.TimeoutException as exc:
                last_error = Timeout(str(exc))
            except httpx.HTTPError as exc:
                last_error = ProviderError(0, str(exc))
            else:
                if response.status_code in (401, 403):
                    raise AuthFailure(f"auth rejected ({response.status_code})")
                if response.status_code >= 500:
                    last_error = ProviderError(response.status_code, response.text)
                elif response.status_code != 200:
                    raise ProviderError(response.status_code, response.text)
                else:
                    return self._parse(response.json())
            if attempt < self.config.retries:
                time.sleep(0.5 * 2 ** attempt)
        assert last_error is not None
        raise last_error

    @staticmethod
    def _parse(payload: dict) -> CompletionResult:
        try:
            choice = payload["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise ParseError(f"malformed completion payload: {exc}")
        tokens = []
        logprobs = (choice.get("logprobs") or {}).get("content") or []
        for item in logprobs:
            alternatives = tuple(
                (alt["token"], alt["logprob"]) for alt in item.get("top_logprobs", [])
            )
            tokens.append(TokenInfo(item["token"], item["logprob"], alternatives))
        return CompletionResult(text=text, tokens=tuple(tokens))


def make_backend(config: BackendConfig) -> Backend:
    if config.backend == "real":
        return HttpBackend(config)
    if config.backend == "mock":
        if not config.mock_script:
            raise ValueError("mock backend requires a script path")
        return ScriptedMockBackend.from_file(config.mock_script)
    raise ValueError(f"unknown backend {config.backend!r}")
