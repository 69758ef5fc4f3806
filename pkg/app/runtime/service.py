"""
Runtime protocol shared by the stdio server and the HTTP router

One JSON object per request, selected by ``op``:

    {"op": "encode", "observation": [...]}           or {"op": "encode", "state": {...}}
    {"op": "step", "z": [...], "action": "You toggled the cyan traffic light.", "mode": "mean"}
    {"op": "describe", "z": [...]}

Failures come back as {"error": <code>, "message": <text>}.
"""
import json
import logging
import sys
from typing import Annotated, List, Literal, Optional, TextIO, Union

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from app.env import GridState
from app.errors import CwmError
from app.runtime.world_model import LatentState, WorldModel

logger = logging.getLogger(__name__)


class EncodeRequest(BaseModel):
    op: Literal["encode"] = "encode"
    observation: Optional[List[float]] = None
    state: Optional[dict] = None


class StepRequest(BaseModel):
    op: Literal["step"] = "step"
    z: List[float]
    action: str
    mode: Literal["mean", "sample"] = "mean"
    seed: Optional[int] = None


class DescribeRequest(BaseModel):
    op: Literal["describe"] = "describe"
    z: List[float]


class LatentResponse(BaseModel):
    z: List[float]
    text: str
    causal: List[float]


class StepResponse(BaseModel):
    z_next: List[float]
    text_current: str
    text_next: str


class ErrorResponse(BaseModel):
    error: str
    message: str


RuntimeRequest = Annotated[Union[EncodeRequest, StepRequest, DescribeRequest], Field(discriminator="op")]
_request_adapter = TypeAdapter(RuntimeRequest)


class RuntimeService:
    def __init__(self, model: WorldModel):
        self.model = model

    def _latent_response(self, latent: LatentState) -> LatentResponse:
        return LatentResponse(
            z=latent.z.tolist(),
            text=self.model.describe(latent),
            causal=self.model.decode_causal(latent).tolist(),
        )

    def encode(self, request: EncodeRequest) -> LatentResponse:
        if request.state is not None:
            state = GridState.from_dict(request.state)
            self.model.template = state
            return self._latent_response(self.model.initial_state(state))
        if request.observation is None:
            raise CwmError("encode needs an observation or a state", "bad_request")
        return self._latent_response(self.model.encode_obs(np.asarray(request.observation, dtype=np.float64)))

    def step(self, request: StepRequest) -> StepResponse:
        rng = np.random.default_rng(request.seed) if request.mode == "sample" else None
        result = self.model.step(LatentState(request.z), request.action, request.mode, rng)
        return StepResponse(z_next=result.z_next.z.tolist(), text_current=result.text_current, text_next=result.text_next)

    def describe(self, request: DescribeRequest) -> LatentResponse:
        return self._latent_response(LatentState(request.z))

    def handle(self, payload: dict) -> BaseModel:
        try:
            request = _request_adapter.validate_python(payload)
        except ValidationError as e:
            return ErrorResponse(error="bad_request", message=str(e.errors()[0]["msg"]) if e.errors() else str(e))
        try:
            if isinstance(request, EncodeRequest):
                return self.encode(request)
            if isinstance(request, StepRequest):
                return self.step(request)
            return self.describe(request)
        except CwmError as e:
            logger.warning(f"[runtime] {request.op} failed: {e.message}")
            return ErrorResponse(error=e.code, message=e.message)

    def handle_line(self, line: str) -> str:
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as e:
            return ErrorResponse(error="bad_request", message=f"invalid JSON: {e.msg}").model_dump_json()
        if not isinstance(payload, dict):
            return ErrorResponse(error="bad_request", message="request must be a JSON object").model_dump_json()
        return self.handle(payload).model_dump_json()


def serve_stdio(service: RuntimeService, stdin: TextIO = None, stdout: TextIO = None) -> int:
    """Answer one JSON line per request line until EOF; returns the number of requests"""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    handled = 0
    logger.info("[runtime] stdio server ready")
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(service.handle_line(line) + "\n")
        stdout.flush()
        handled += 1
    logger.info(f"[runtime] stdio server done after {handled} requests")
    return handled
