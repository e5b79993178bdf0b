"""Long-running session service: live explorations with human experts.

Sessions are event-sourced: every state change appends one JSON line to the
session's log, and replaying a log re-executes the deterministic machinery,
verifying each recorded event on the way.  Logs carry no timestamps so that
replayed state is bit-identical to the live state that produced it.
"""

from __future__ import annotations

import asyncio
import json
import secrets
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse

from . import cxt
from .engine import ExplorationState, run
from .errors import (
    CoexError,
    ConflictError,
    ProtocolError,
    ReplayError,
    StaleQuestionError,
    ValidationError,
)
from .expert import (
    Accept,
    Answer,
    ExpertKnowledge,
    Reject,
    Unknown,
    answer_from_json,
    answer_to_json,
    ei_standard,
    expert_from_json,
    expert_to_json,
    validate_expert,
)
from .implications import Implication, Theory, implication_from_json, implication_to_json
from .strategies import InteractionLedger, Strategy, StrategyConfig, build_strategy


@dataclass
class RosterEntry:
    id: str
    display_name: str
    token: str


@dataclass
class LiveRound:
    """One engine question in flight, with the strategy's per-question state."""

    question_id: str
    question: Implication
    queue: list[str]  # experts still to ask (iterative) or asked-and-waiting (broadcast)
    answered: dict[str, Answer] = field(default_factory=dict)
    known: frozenset[str] = frozenset()


class SessionCore:
    """Deterministic session machinery shared by live handling and replay."""

    def __init__(self, doc: dict[str, Any], session_id: str, sink=None):
        self.id = session_id
        self._sink = sink
        self.mode = doc.get("mode", "live")
        if self.mode not in ("live", "simulated"):
            raise ValidationError(f"unknown session mode: {self.mode!r}")
        attributes = doc.get("attributes") or []
        config = StrategyConfig.from_json(doc.get("strategy") or {})
        roster_doc = doc.get("roster") or []
        ids = [r["id"] for r in roster_doc]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate expert ids in the roster")
        if not ids and config.kind != "ignorant":
            raise ValidationError("an empty roster only works with the ignorant strategy")
        if config.kind == "single" and len(ids) != 1:
            raise ValidationError("the single strategy needs a one-expert roster")
        self.roster = [
            RosterEntry(r["id"], r.get("name", r["id"]), r.get("token") or secrets.token_hex(8))
            for r in roster_doc
        ]
        self.config = config
        self.strategy: Strategy = build_strategy(config)
        self.experts: list[ExpertKnowledge] = []
        if self.mode == "simulated":
            self.experts = [expert_from_json(d) for d in doc.get("experts") or []]
            if sorted(e.name for e in self.experts) != sorted(ids):
                raise ValidationError("simulated sessions need one expert definition per roster id")
            universe = None
            if doc.get("universe"):
                universe, _ = cxt.loads(doc["universe"])
            problems = []
            for e in self.experts:
                problems += [f"{e.name}: {p}" for p in validate_expert(e, universe)]
            if problems:
                raise ValidationError("; ".join(problems))
        elif config.kind == "max_knowledge":
            raise ValidationError("max_knowledge requires recorded expert knowledge (simulated mode)")
        seed_examples = None
        if doc.get("seed_examples"):
            seed_examples, _ = cxt.loads(doc["seed_examples"])
        seed_theory = None
        if doc.get("seed_theory") is not None:
            seed_theory = Theory(
                tuple(attributes),
                tuple(implication_from_json(d) for d in doc["seed_theory"]),
            )
        self.state = ExplorationState(attributes, seed_examples, seed_theory)
        self.ledger = InteractionLedger()
        self.round: LiveRound | None = None
        self.events: list[dict[str, Any]] = []
        self._emit(
            {
                "event": "session_created",
                "session": session_id,
                "mode": self.mode,
                "attributes": list(self.state.attributes),
                "strategy": config.to_json(),
                "roster": [
                    {"id": r.id, "name": r.display_name, "token": r.token} for r in self.roster
                ],
                **({"experts": [expert_to_json(e) for e in self.experts]} if self.experts else {}),
                **({"universe": doc["universe"]} if doc.get("universe") else {}),
                **({"seed_examples": doc["seed_examples"]} if doc.get("seed_examples") else {}),
                **({"seed_theory": doc["seed_theory"]} if doc.get("seed_theory") is not None else {}),
            }
        )
        if self.mode == "simulated":
            run(self.state, self.strategy, self.experts, ei_standard, on_event=self._emit)
            for e in self.events:
                if e["event"] == "expert_asked":
                    self.ledger.record(e["expert"], e["question_id"])
        else:
            self._advance_engine()

    # -- event plumbing --------------------------------------------------

    def _emit(self, event: dict[str, Any]) -> None:
        self.events.append(event)
        if self._sink is not None:
            self._sink(event)

    def _attrs_sorted(self, names: Iterable[str]) -> list[str]:
        rank = {a: i for i, a in enumerate(self.state.attributes)}
        return sorted(names, key=rank.__getitem__)

    # -- live question flow -----------------------------------------------

    def _advance_engine(self) -> None:
        """Pose engine questions until one needs a human or the session ends."""
        assert self.round is None
        while True:
            def on_auto(qid, question):
                self._emit(
                    {
                        "event": "auto_accepted",
                        "question_id": qid,
                        "premise": self._attrs_sorted(question.premise),
                        "conclusion": self._attrs_sorted(question.conclusion),
                    }
                )

            question = self.state.next_question(on_auto_accept=on_auto)
            if question is None:
                self._emit({"event": "finished"})
                return
            qid = self.state.pending_id()
            self._emit(
                {
                    "event": "question_posed",
                    "question_id": qid,
                    "premise": self._attrs_sorted(question.premise),
                    "conclusion": self._attrs_sorted(question.conclusion),
                }
            )
            if self.config.kind == "ignorant":
                self._resolve(qid, question, Unknown(question.residual()))
                continue  # the loop picks up the next question itself
            self.round = self._open_round(qid, question)
            return

    def _open_round(self, qid: str, question: Implication) -> LiveRound:
        kind = self.config.kind
        ids = [r.id for r in self.roster]
        if kind == "single":
            queue = ids[:1]
        elif kind == "iterative":
            if self.config.per_question_shuffle:
                order = list(ids)
                self.strategy._rng.shuffle(order)
                queue = order
            elif self.config.expert_order is not None:
                if sorted(self.config.expert_order) != sorted(ids):
                    raise ValidationError("expert_order is not a permutation of the roster")
                queue = list(self.config.expert_order)
            else:
                queue = list(ids)
        elif kind == "broadcast":
            queue = list(ids)
        elif kind == "random_selection":
            weights = self.config.weights
            if weights is not None and len(weights) != len(ids):
                raise ValidationError("weights must match the roster size")
            queue = [self.strategy._rng.choices(ids, weights=weights, k=1)[0]]
        else:
            raise ValidationError(f"strategy {kind!r} cannot take live answers")
        round_ = LiveRound(qid, question, queue)
        if kind in ("broadcast",):
            for expert in queue:
                self._ask(round_, expert)
        else:
            self._ask(round_, queue[0])
        return round_

    def _ask(self, round_: LiveRound, expert: str) -> None:
        self.ledger.record(expert, round_.question_id)
        self._emit(
            {"event": "expert_asked", "question_id": round_.question_id, "expert": expert}
        )

    def asked_and_waiting(self, round_: LiveRound) -> list[str]:
        kind = self.config.kind
        if kind == "broadcast":
            return [e for e in round_.queue if e not in round_.answered]
        pos = len(round_.answered)
        return round_.queue[pos : pos + 1]

    def pending_for(self, expert_id: str) -> list[dict[str, Any]]:
        if self.round is None or expert_id not in self.asked_and_waiting(self.round):
            return []
        q = self.round.question
        return [
            {
                "question_id": self.round.question_id,
                "premise": self._attrs_sorted(q.premise),
                "conclusion": self._attrs_sorted(q.conclusion),
            }
        ]

    def submit(self, expert_id: str, question_id: str, answer: Answer) -> None:
        if self.state.finished or self.round is None:
            raise StaleQuestionError("no question is currently pending")
        round_ = self.round
        if question_id != round_.question_id:
            raise StaleQuestionError(
                f"question {question_id!r} is not pending (current: {round_.question_id!r})"
            )
        if expert_id not in [r.id for r in self.roster]:
            raise ValidationError(f"unknown expert id: {expert_id!r}")
        if expert_id in round_.answered:
            raise StaleQuestionError(f"expert {expert_id!r} already answered {question_id!r}")
        if expert_id not in self.asked_and_waiting(round_):
            raise StaleQuestionError(f"expert {expert_id!r} was not asked {question_id!r}")
        self._validate_payload(round_.question, answer)
        round_.answered[expert_id] = answer
        self._emit(
            {
                "event": "expert_answered",
                "question_id": question_id,
                "expert": expert_id,
                "answer": answer_to_json(answer, self.state.attributes),
            }
        )
        resolution = self._maybe_resolve(round_)
        if resolution is None:
            if self.config.kind == "iterative":
                nxt = self.asked_and_waiting(round_)
                if nxt:
                    self._ask(round_, nxt[0])
            return
        self.round = None
        self._resolve(round_.question_id, round_.question, resolution)
        self._advance_engine()

    def _validate_payload(self, question: Implication, answer: Answer) -> None:
        """Reject impossible payloads before they reach the strategy state."""
        if isinstance(answer, Unknown):
            if not answer.residual <= question.conclusion:
                raise ProtocolError("unknown residual is not part of the conclusion")
        elif isinstance(answer, Reject):
            rows = answer.counterexamples
            if set(rows.attributes) != set(self.state.attributes):
                raise ProtocolError("counterexample attributes differ from the session universe")
            from .context import conflicts, select_attributes
            from .engine import FICTITIOUS_PREFIX

            rows = select_attributes(rows, self.state.attributes)
            if not rows.objects:
                raise ProtocolError("a rejection must name at least one counterexample")
            pmask = rows.attr_mask(question.premise)
            cmask = rows.attr_mask(question.conclusion)
            for i, name in enumerate(rows.objects):
                if name.startswith(FICTITIOUS_PREFIX):
                    raise ProtocolError(f"object name {name!r} is reserved")
                if rows.crosses[i] & pmask != pmask or not rows.blanks[i] & cmask:
                    raise ProtocolError(f"row {name!r} does not contradict the question")
            clash = conflicts(rows, self.state.examples)
            if clash:
                raise ConflictError(
                    f"counterexamples conflict with the session examples: {sorted(clash)}", clash
                )

    def _maybe_resolve(self, round_: LiveRound) -> Answer | None:
        kind = self.config.kind
        question = round_.question
        goal = question.residual()
        if kind in ("single", "random_selection"):
            return next(iter(round_.answered.values()))
        if kind == "iterative":
            last = round_.answered[round_.queue[len(round_.answered) - 1]]
            if isinstance(last, (Accept, Reject)):
                return last
            round_.known |= goal - last.residual
            if len(round_.answered) == len(round_.queue):
                return Accept() if round_.known >= goal else Unknown(goal - round_.known)
            return None
        if kind == "broadcast":
            if len(round_.answered) < len(round_.queue):
                return None
            answers = [round_.answered[e] for e in round_.queue]
            rejects = [a.counterexamples for a in answers if isinstance(a, Reject)]
            if rejects:
                from .context import join

                merged = rejects[0]
                for ctx in rejects[1:]:
                    merged = join(merged, ctx)
                return Reject(merged)
            known: frozenset[str] = frozenset()
            for a in answers:
                known |= goal if isinstance(a, Accept) else goal - a.residual
            return Accept() if known >= goal else Unknown(goal - known)
        raise ValidationError(f"strategy {kind!r} cannot take live answers")

    def _resolve(self, qid: str, question: Implication, answer: Answer) -> None:
        self._emit(
            {
                "event": "answer_merged",
                "question_id": qid,
                "answer": answer_to_json(answer, self.state.attributes),
            }
        )
        self.state.apply_answer(question, answer, source=self.config.kind)

    # -- views -------------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        state = self.state
        order = state.attributes
        result = state.result()
        pending = None
        if self.round is not None:
            pending = {
                "question_id": self.round.question_id,
                "premise": self._attrs_sorted(self.round.question.premise),
                "conclusion": self._attrs_sorted(self.round.question.conclusion),
                "waiting_for": self.asked_and_waiting(self.round),
                "answered_by": sorted(self.round.answered),
            }
        return {
            "id": self.id,
            "mode": self.mode,
            "finished": state.finished,
            "attributes": list(order),
            "accepted": [implication_to_json(i, order) for i in result.accepted],
            "examples": {
                "real": cxt.to_json(result.real_counterexamples),
                "fictitious": cxt.to_json(result.fictitious_counterexamples),
            },
            "possibly_valid": [implication_to_json(i, order) for i in result.possibly_valid],
            "history": [
                {
                    "question_id": h.question_id,
                    "premise": self._attrs_sorted(h.question.premise),
                    "conclusion": self._attrs_sorted(h.question.conclusion),
                    "answer": answer_to_json(h.answer, order),
                    "source": h.source,
                }
                for h in result.history
            ],
            "ledger": {
                "total": self.ledger.total,
                "per_expert": dict(sorted(self.ledger.per_expert.items())),
                "per_question": dict(sorted(self.ledger.per_question.items())),
            },
            "pending": pending,
        }


def replay_events(events: Sequence[dict[str, Any]], session_id: str) -> SessionCore:
    """Re-execute a recorded event stream, verifying every derived event."""
    if not events:
        raise ReplayError("empty event log", line=1)
    if events[0].get("event") != "session_created":
        raise ReplayError("log must start with session_created", line=1)
    core = SessionCore(events[0], session_id)
    cursor = 0

    def check(lineno: int, recorded: dict[str, Any]) -> None:
        nonlocal cursor
        if cursor >= len(core.events):
            raise ReplayError("recorded event was never re-generated", line=lineno)
        regenerated = core.events[cursor]
        if regenerated != recorded:
            raise ReplayError(
                f"replay diverged: expected {json.dumps(regenerated, ensure_ascii=False)}",
                line=lineno,
            )
        cursor += 1

    check(1, events[0])
    for lineno, event in enumerate(events[1:], start=2):
        kind = event.get("event")
        if core.mode == "live" and kind == "expert_answered":
            try:
                core.submit(
                    event["expert"], event["question_id"], answer_from_json(event["answer"])
                )
            except CoexError as exc:
                raise ReplayError(f"recorded answer no longer applies: {exc}", line=lineno)
        check(lineno, event)
    return core


# ---------------------------------------------------------------------------
# persistence and HTTP surface


class SessionStore:
    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, SessionCore] = {}
        self._conditions: dict[str, asyncio.Condition] = {}

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict[str, Any]) -> None:
        with self._log_path(session_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")

    def create(self, doc: dict[str, Any]) -> SessionCore:
        session_id = doc.get("id") or f"s-{secrets.token_hex(6)}"
        if session_id in self.sessions or self._log_path(session_id).exists():
            raise ValidationError(f"session id already exists: {session_id}")
        core = SessionCore(doc, session_id)
        for event in core.events:
            self._append(session_id, event)
        core._sink = lambda e: self._append(session_id, e)
        self.sessions[session_id] = core
        return core

    def get(self, session_id: str) -> SessionCore:
        if session_id not in self.sessions:
            self.sessions[session_id] = self.resume(session_id)
        return self.sessions[session_id]

    def resume(self, session_id: str) -> SessionCore:
        path = self._log_path(session_id)
        if not path.exists():
            raise KeyError(session_id)
        events = read_event_log(path)
        core = replay_events(events, session_id)
        # compact: a truncated log is healed with the re-derived event stream
        with path.open("w", encoding="utf-8") as fh:
            for event in core.events:
                fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
        core._sink = lambda e: self._append(session_id, e)
        return core

    def condition(self, session_id: str) -> asyncio.Condition:
        if session_id not in self._conditions:
            self._conditions[session_id] = asyncio.Condition()
        return self._conditions[session_id]


def read_event_log(path: Path) -> list[dict[str, Any]]:
    """Parse a JSONL event log; only a truncated final line is forgiven."""
    events = []
    raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    complete = lines[:-1]  # text after the last newline is a partial write
    for lineno, line in enumerate(complete, start=1):
        if not line:
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError:
            if lineno == len(complete):
                break  # truncated tail: resume at the last complete event
            raise ReplayError("corrupt event line", line=lineno) from None
    return events


def create_app(data_dir: str | Path):
    from fastapi import FastAPI, HTTPException, Request
    from fastapi.responses import StreamingResponse

    app = FastAPI(title="coex session service")
    store = SessionStore(data_dir)
    app.state.store = store

    def http_error(exc: CoexError) -> HTTPException:
        if isinstance(exc, StaleQuestionError):
            return HTTPException(status_code=409, detail=str(exc))
        return HTTPException(status_code=422, detail=str(exc))

    def load(session_id: str) -> SessionCore:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")

    @app.post("/sessions", status_code=201)
    async def create_session(doc: dict):
        try:
            core = store.create(doc)
        except CoexError as exc:
            raise http_error(exc)
        async with store.condition(core.id):
            store.condition(core.id).notify_all()
        return {"id": core.id, "snapshot": core.snapshot(),
                "roster": [{"id": r.id, "name": r.display_name, "token": r.token} for r in core.roster]}

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return load(session_id).snapshot()

    @app.get("/sessions/{session_id}/pending")
    async def get_pending(session_id: str, expert: str):
        core = load(session_id)
        return {"expert": expert, "pending": core.pending_for(expert)}

    @app.post("/sessions/{session_id}/answers")
    async def post_answer(session_id: str, doc: dict):
        core = load(session_id)
        try:
            expert = doc["expert"]
            entry = next((r for r in core.roster if r.id == expert), None)
            if entry is None:
                raise ValidationError(f"unknown expert id: {expert!r}")
            if doc.get("token") != entry.token:
                raise HTTPException(status_code=403, detail="bad join token")
            answer = answer_from_json(doc["answer"])
            core.submit(expert, doc["question_id"], answer)
        except KeyError as exc:
            raise HTTPException(status_code=422, detail=f"missing field {exc}")
        except CoexError as exc:
            raise http_error(exc)
        cond = store.condition(session_id)
        async with cond:
            cond.notify_all()
        return {"ok": True, "snapshot": core.snapshot()}

    @app.get("/sessions/{session_id}/events")
    async def get_events(session_id: str, request: Request, since: int = 0):
        core = load(session_id)
        start = since
        header = request.headers.get("last-event-id")
        if header is not None and header.isdigit():
            start = int(header) + 1

        async def stream():
            index = start
            while True:
                while index < len(core.events):
                    payload = json.dumps(core.events[index], ensure_ascii=False, sort_keys=True)
                    yield f"id: {index}\ndata: {payload}\n\n"
                    index += 1
                if core.state.finished and core.round is None:
                    return
                if await request.is_disconnected():
                    return
                cond = store.condition(session_id)
                try:
                    async with cond:
                        await asyncio.wait_for(cond.wait(), timeout=1.0)
                except asyncio.TimeoutError:
                    pass

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
