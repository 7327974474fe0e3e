"""Stateful orchestration: one session per camera frame, routed utterances,
and the instruct -> predict -> correct -> confirm state machine.

Every utterance is classified and dispatched; rejections and module
failures become events rather than corrupted state. The practice mode runs
the pilot-study protocol: place a marker on a drawn target circle within a
budget of prompts, tracking center-to-center distance after each one.
"""
from __future__ import annotations

import enum
import math
import random
import threading
import uuid
from dataclasses import dataclass, field

from .correction import CorrectionContext, Corrector
from .errors import (
    BudgetExhaustedError,
    ContactGroundError,
    FrameMismatchError,
    SessionError,
    UnknownSessionError,
)
from .intent import IntentClass, IntentRouter, Utterance
from .prediction import PixelPoint, Predictor
from .resolver import (
    CameraExtrinsics,
    ContactResolver,
    PointCloud,
    TaskSink,
    emit_contact_task,
    task_to_wire,
)
from .vision import ImageRef

__all__ = [
    "Phase",
    "EventKind",
    "FrameBundle",
    "Turn",
    "SessionEvent",
    "Session",
    "PracticeTrial",
    "Orchestrator",
    "TARGET_RADIUS_PX",
    "MARKER_RADIUS_PX",
    "PROMPT_BUDGET",
]

# Pilot-protocol constants: target circle, marker circle, prompt budget.
TARGET_RADIUS_PX = 18
MARKER_RADIUS_PX = 5
PROMPT_BUDGET = 5


class Phase(enum.Enum):
    AWAITING_INSTRUCTION = "AwaitingInstruction"
    HAS_CANDIDATE = "HasCandidate"
    CONFIRMED = "Confirmed"
    EXECUTING = "Executing"


class EventKind(enum.Enum):
    PREDICTION_SET = "PredictionSet"
    CORRECTION_APPLIED = "CorrectionApplied"
    CONTACT_TASK_EMITTED = "ContactTaskEmitted"
    REJECTED_NO_TARGET = "RejectedNoTarget"
    FAILURE = "Failure"


@dataclass(frozen=True)
class FrameBundle:
    """Per-session snapshot: image, aligned cloud, and camera extrinsics."""

    image: ImageRef
    cloud: PointCloud
    extrinsics: CameraExtrinsics

    def __post_init__(self):
        if (self.cloud.height, self.cloud.width) != (self.image.height, self.image.width):
            raise FrameMismatchError(
                f"cloud grid {self.cloud.width}x{self.cloud.height} does not match "
                f"image {self.image.width}x{self.image.height}"
            )


@dataclass(frozen=True)
class Turn:
    utterance: str
    intent: IntentClass | None
    kind: EventKind
    target: PixelPoint | None
    message: str

    def to_json(self) -> dict:
        return {
            "utterance": self.utterance,
            "intent": self.intent.value if self.intent else None,
            "kind": self.kind.value,
            "target": {"u": self.target.u, "v": self.target.v} if self.target else None,
            "message": self.message,
        }


@dataclass(frozen=True)
class SessionEvent:
    kind: EventKind
    intent: IntentClass | None
    target: PixelPoint | None
    phase: Phase
    message: str
    clamped: bool = False
    task_wire: dict | None = None
    ack: str | None = None

    def to_json(self) -> dict:
        data = {
            "kind": self.kind.value,
            "intent": self.intent.value if self.intent else None,
            "target": {"u": self.target.u, "v": self.target.v} if self.target else None,
            "phase": self.phase.value,
            "message": self.message,
            "clamped": self.clamped,
        }
        if self.task_wire is not None:
            data["task"] = self.task_wire
            data["ack"] = self.ack
        return data


@dataclass
class Session:
    id: str
    frame: FrameBundle
    phase: Phase = Phase.AWAITING_INSTRUCTION
    current_target: PixelPoint | None = None
    history: list[Turn] = field(default_factory=list)
    initial_prediction_utterance: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def point_history(self) -> tuple[tuple[str, PixelPoint], ...]:
        """(utterance, point) pairs from turns that produced a candidate."""
        return tuple(
            (turn.utterance, turn.target)
            for turn in self.history
            if turn.target is not None
            and turn.kind in (EventKind.PREDICTION_SET, EventKind.CORRECTION_APPLIED)
        )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "phase": self.phase.value,
            "target": (
                {"u": self.current_target.u, "v": self.current_target.v}
                if self.current_target
                else None
            ),
            "image": {
                "id": self.frame.image.id,
                "width": self.frame.image.width,
                "height": self.frame.image.height,
            },
            "initial_prediction_utterance": self.initial_prediction_utterance,
            "history": [turn.to_json() for turn in self.history],
        }


@dataclass
class PracticeTrial:
    id: str
    image: ImageRef
    target_center: PixelPoint
    target_radius: int = TARGET_RADIUS_PX
    marker_radius: int = MARKER_RADIUS_PX
    prompt_budget: int = PROMPT_BUDGET
    distances: list[float] = field(default_factory=list)
    marker: PixelPoint | None = None
    prompts_used: int = 0
    done: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def remaining_budget(self) -> int:
        return self.prompt_budget - self.prompts_used

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "target": {"u": self.target_center.u, "v": self.target_center.v},
            "target_radius": self.target_radius,
            "marker_radius": self.marker_radius,
            "prompt_budget": self.prompt_budget,
            "remaining_budget": self.remaining_budget,
            "distances": list(self.distances),
            "marker": {"u": self.marker.u, "v": self.marker.v} if self.marker else None,
            "done": self.done,
            "image": {
                "id": self.image.id,
                "width": self.image.width,
                "height": self.image.height,
            },
        }


def center_distance(a: PixelPoint, b: PixelPoint) -> float:
    return math.hypot(a.u - b.u, a.v - b.v)


class Orchestrator:
    """Owns sessions and practice trials; wires the pipeline modules.

    All mutation of one session happens under its lock, so concurrent
    utterances serialize in arrival order; distinct sessions do not contend.
    """

    def __init__(
        self,
        router: IntentRouter,
        predictor: Predictor,
        corrector: Corrector,
        resolver: ContactResolver,
        sink: TaskSink,
    ):
        self.router = router
        self.predictor = predictor
        self.corrector = corrector
        self.resolver = resolver
        self.sink = sink
        self._sessions: dict[str, Session] = {}
        self._trials: dict[str, PracticeTrial] = {}
        self._store_lock = threading.Lock()

    # --- sessions -------------------------------------------------------

    def create_session(self, frame: FrameBundle, session_id: str | None = None) -> Session:
        session = Session(id=session_id or uuid.uuid4().hex, frame=frame)
        with self._store_lock:
            self._sessions[session.id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"no session {session_id!r}") from None

    def handle_utterance(self, session_id: str, text: str) -> SessionEvent:
        session = self.get_session(session_id)
        utterance = Utterance(text)
        with session.lock:
            if session.phase is Phase.EXECUTING:
                raise SessionError("session is executing; no further utterances accepted")
            try:
                intent = self.router.classify(utterance)
            except ContactGroundError as exc:
                return self._record(
                    session, utterance, None, EventKind.FAILURE,
                    target=None, message=f"could not classify utterance: {exc}",
                )
            if intent is IntentClass.PREDICTION:
                return self._handle_prediction(session, utterance)
            if intent is IntentClass.CORRECTION:
                return self._handle_correction(session, utterance)
            return self._handle_confirmation(session, utterance)

    def _record(
        self,
        session: Session,
        utterance: Utterance,
        intent: IntentClass | None,
        kind: EventKind,
        target: PixelPoint | None,
        message: str,
        clamped: bool = False,
        task_wire: dict | None = None,
        ack: str | None = None,
    ) -> SessionEvent:
        session.history.append(
            Turn(utterance=utterance.text, intent=intent, kind=kind, target=target, message=message)
        )
        return SessionEvent(
            kind=kind,
            intent=intent,
            target=target,
            phase=session.phase,
            message=message,
            clamped=clamped,
            task_wire=task_wire,
            ack=ack,
        )

    def _handle_prediction(self, session: Session, utterance: Utterance) -> SessionEvent:
        try:
            outcome = self.predictor.predict(session.frame.image, utterance)
        except ContactGroundError as exc:
            return self._record(
                session, utterance, IntentClass.PREDICTION, EventKind.FAILURE,
                target=None, message=f"prediction failed: {exc}",
            )
        session.current_target = outcome.point
        session.phase = Phase.HAS_CANDIDATE
        session.initial_prediction_utterance = utterance.text
        return self._record(
            session, utterance, IntentClass.PREDICTION, EventKind.PREDICTION_SET,
            target=outcome.point,
            message=f"{outcome.branch.value} prediction at ({outcome.point.u},{outcome.point.v})",
            clamped=outcome.clamped,
        )

    def _handle_correction(self, session: Session, utterance: Utterance) -> SessionEvent:
        if session.current_target is None:
            return self._record(
                session, utterance, IntentClass.CORRECTION, EventKind.REJECTED_NO_TARGET,
                target=None, message="nothing to correct yet: give an instruction first",
            )
        ctx = CorrectionContext(
            current_target=session.current_target,
            history=session.point_history(),
            image=session.frame.image,
        )
        try:
            point, clamped = self.corrector.correct(ctx, utterance)
        except ContactGroundError as exc:
            return self._record(
                session, utterance, IntentClass.CORRECTION, EventKind.FAILURE,
                target=None, message=f"correction failed: {exc}",
            )
        session.current_target = point
        return self._record(
            session, utterance, IntentClass.CORRECTION, EventKind.CORRECTION_APPLIED,
            target=point, message=f"target corrected to ({point.u},{point.v})",
            clamped=clamped,
        )

    def _handle_confirmation(self, session: Session, utterance: Utterance) -> SessionEvent:
        if session.current_target is None:
            return self._record(
                session, utterance, IntentClass.CONFIRMATION, EventKind.REJECTED_NO_TARGET,
                target=None, message="nothing to confirm yet: give an instruction first",
            )
        assert session.initial_prediction_utterance is not None
        try:
            task = self.resolver.resolve(
                session.frame.cloud,
                session.frame.extrinsics,
                session.current_target,
                Utterance(session.initial_prediction_utterance),
            )
            session.phase = Phase.CONFIRMED
            ack = emit_contact_task(task, self.sink)
        except ContactGroundError as exc:
            session.phase = Phase.HAS_CANDIDATE  # failure leaves the candidate live
            return self._record(
                session, utterance, IntentClass.CONFIRMATION, EventKind.FAILURE,
                target=session.current_target, message=f"contact task failed: {exc}",
            )
        session.phase = Phase.EXECUTING
        return self._record(
            session, utterance, IntentClass.CONFIRMATION, EventKind.CONTACT_TASK_EMITTED,
            target=session.current_target,
            message=f"contact task emitted for {task.end_effector.value}",
            task_wire=task_to_wire(task),
            ack=ack,
        )

    # --- practice mode ---------------------------------------------------

    def create_practice(
        self,
        image: ImageRef,
        target_center: PixelPoint | None = None,
        trial_id: str | None = None,
        rng: random.Random | None = None,
    ) -> PracticeTrial:
        if target_center is None:
            rng = rng or random.Random()
            margin = TARGET_RADIUS_PX
            target_center = PixelPoint(
                u=rng.randint(margin, max(margin, image.width - 1 - margin)),
                v=rng.randint(margin, max(margin, image.height - 1 - margin)),
            )
        if not (0 <= target_center.u < image.width and 0 <= target_center.v < image.height):
            raise ValueError("practice target must lie inside the image")
        trial = PracticeTrial(
            id=trial_id or uuid.uuid4().hex, image=image, target_center=target_center
        )
        with self._store_lock:
            self._trials[trial.id] = trial
        return trial

    def get_practice(self, trial_id: str) -> PracticeTrial:
        try:
            return self._trials[trial_id]
        except KeyError:
            raise UnknownSessionError(f"no practice trial {trial_id!r}") from None

    def handle_practice_utterance(self, trial_id: str, text: str) -> dict:
        trial = self.get_practice(trial_id)
        utterance = Utterance(text)
        with trial.lock:
            if trial.done or trial.prompts_used >= trial.prompt_budget:
                raise BudgetExhaustedError(
                    f"trial budget of {trial.prompt_budget} prompts is spent"
                )
            intent = self.router.classify(utterance)
            if intent is IntentClass.CONFIRMATION:
                # operator accepts the marker: the trial stops early
                trial.done = True
                return {"stopped": True, **trial.to_json()}
            if intent is IntentClass.CORRECTION and trial.marker is None:
                return {"rejected": "nothing to correct yet", **trial.to_json()}
            if intent is IntentClass.PREDICTION:
                outcome = self.predictor.predict(trial.image, utterance)
                marker = outcome.point
            else:
                ctx = CorrectionContext(
                    current_target=trial.marker, history=(), image=trial.image
                )
                marker, _ = self.corrector.correct(ctx, utterance)
            trial.marker = marker
            trial.prompts_used += 1
            distance = center_distance(marker, trial.target_center)
            trial.distances.append(distance)
            if trial.prompts_used >= trial.prompt_budget:
                trial.done = True
            return {"distance_px": distance, **trial.to_json()}

    def run_practice_trial(self, trial: PracticeTrial, utterances) -> PracticeTrial:
        """Drive a whole trial from an utterance stream; stops when done."""
        for text in utterances:
            self.handle_practice_utterance(trial.id, text)
            if trial.done:
                break
        return trial
