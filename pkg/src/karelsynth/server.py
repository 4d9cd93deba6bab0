"""HTTP API backing the interactive program-debugging interface.

Stateless JSON endpoints for parsing, executing, and diffing programs, plus
a small server-side session store that enforces the statement-edit budget.
Every reward shown in the UI originates here; the client never recomputes
scores locally.
"""

from __future__ import annotations

import secrets
from pathlib import Path
from typing import Any

import torch
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import dsl, tasks
from .dsl import ProgramSyntaxError
from .edits import statement_edit_distance
from .grid import DIRECTIONS, GridState
from .interpreter import Rollout
from .model.checkpoint import load_checkpoint

DEFAULT_BUDGET = 5


class ParseRequest(BaseModel):
    program: str


class ExecuteRequest(BaseModel):
    program: str
    task: str
    seed: int = 0
    height: int | None = None
    width: int | None = None


class EditDistanceRequest(BaseModel):
    original: str
    edited: str


class SessionStartRequest(BaseModel):
    task: str
    program: str
    budget: int = DEFAULT_BUDGET
    seed: int = 0


class SessionSubmitRequest(BaseModel):
    session: str
    edited: str


class DecodeRequest(BaseModel):
    latent: list[float]


def _parse_or_400(text: str) -> dsl.Program:
    try:
        return dsl.parse(text)
    except ProgramSyntaxError as err:
        raise HTTPException(status_code=400, detail={
            "error": "syntax", "index": err.index, "message": err.reason})


def _state_json(state: GridState) -> dict[str, Any]:
    return {
        "agent_row": state.agent_row,
        "agent_col": state.agent_col,
        "agent_dir": DIRECTIONS[state.agent_dir],
        "markers": state.markers.tolist(),
    }


def _trace_payload(instance: tasks.TaskInstance, rollout: Rollout,
                   program: dsl.Program) -> dict[str, Any]:
    spans = dsl.token_spans(program)
    frames = [dict(_state_json(rollout.states[0]), action=None, node_id=None)]
    for state, action, node_id in zip(rollout.states[1:], rollout.actions,
                                      rollout.node_ids):
        frames.append(dict(_state_json(state),
                           action=dsl.ACTIONS[action],
                           node_id=node_id,
                           token_span=list(spans[node_id])))
    return {
        "width": instance.initial.width,
        "height": instance.initial.height,
        "walls": instance.initial.walls.tolist(),
        "frames": frames,
        "actions": [dsl.ACTIONS[a] for a in rollout.actions],
        "terminated": rollout.terminated,
        "flags": rollout.flags,
    }


def _mean_reward(program: dsl.Program, kind: str, seed: int,
                 n_configs: int = 10, **task_kwargs) -> float:
    sampler = tasks.make_sampler(kind, **task_kwargs)
    return tasks.mean_task_return(sampler, program, n_configs, seed)


def create_app(checkpoint: str | Path | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="karelsynth api")
    sessions: dict[str, dict[str, Any]] = {}
    decoder_state: dict[str, Any] = {}
    if checkpoint is not None:
        vae, _, header = load_checkpoint(checkpoint)
        decoder_state["vae"] = vae
        decoder_state["latent_dim"] = header["dims"]["latent"]

    @app.get("/tasks")
    def list_tasks() -> list[dict[str, Any]]:
        out = []
        for kind in tasks.KINDS:
            h, w = tasks.STANDARD_DIMS[kind]
            spec = tasks.sample_task(kind, 0).spec
            out.append({"kind": kind, "height": h, "width": w,
                        "horizon": spec.horizon,
                        "reward_range": list(spec.reward_range)})
        return out

    @app.post("/parse")
    def parse_program(req: ParseRequest) -> dict[str, Any]:
        try:
            dsl.parse(req.program)
        except ProgramSyntaxError as err:
            return {"ok": False, "error": {"index": err.index,
                                           "message": err.reason}}
        return {"ok": True}

    @app.post("/execute")
    def execute_program(req: ExecuteRequest) -> dict[str, Any]:
        program = _parse_or_400(req.program)
        if req.task not in tasks.KINDS:
            raise HTTPException(status_code=400,
                                detail={"error": "task",
                                        "message": f"unknown task {req.task!r}"})
        kwargs = {}
        if req.height is not None:
            kwargs["height"] = req.height
        if req.width is not None:
            kwargs["width"] = req.width
        instance = tasks.sample_task(req.task, req.seed, **kwargs)
        reward, rollout = tasks.run_on_instance(program, instance,
                                                record_states=True)
        payload = _trace_payload(instance, rollout, program)
        payload["reward"] = reward
        payload["mean_reward"] = _mean_reward(program, req.task, req.seed, **kwargs)
        return payload

    @app.post("/edit-distance")
    def edit_distance(req: EditDistanceRequest) -> dict[str, int]:
        original = _parse_or_400(req.original)
        edited = _parse_or_400(req.edited)
        return {"distance": statement_edit_distance(original, edited)}

    @app.post("/session/start")
    def session_start(req: SessionStartRequest) -> dict[str, Any]:
        program = _parse_or_400(req.program)
        if req.task not in tasks.KINDS:
            raise HTTPException(status_code=400,
                                detail={"error": "task",
                                        "message": f"unknown task {req.task!r}"})
        session_id = secrets.token_hex(8)
        orig_reward = _mean_reward(program, req.task, req.seed)
        sessions[session_id] = {
            "task": req.task,
            "seed": req.seed,
            "original": program,
            "budget": req.budget,
            "best": orig_reward,
            "orig": orig_reward,
        }
        instance = tasks.sample_task(req.task, tasks.derive_seed(req.seed, 0))
        _, rollout = tasks.run_on_instance(program, instance, record_states=True)
        payload = _trace_payload(instance, rollout, program)
        payload.update(session=session_id, orig_reward=orig_reward,
                       best_reward=orig_reward, budget=req.budget)
        return payload

    @app.post("/session/submit")
    def session_submit(req: SessionSubmitRequest) -> dict[str, Any]:
        state = sessions.get(req.session)
        if state is None:
            raise HTTPException(status_code=404,
                                detail={"error": "session",
                                        "message": "unknown session id"})
        edited = _parse_or_400(req.edited)
        distance = statement_edit_distance(state["original"], edited)
        if distance > state["budget"]:
            raise HTTPException(status_code=422, detail={
                "error": "budget",
                "distance": distance,
                "budget": state["budget"],
                "message": (f"edit distance {distance} exceeds the "
                            f"{state['budget']}-statement budget"),
            })
        reward = _mean_reward(edited, state["task"], state["seed"])
        state["best"] = max(state["best"], reward)
        instance = tasks.sample_task(state["task"],
                                     tasks.derive_seed(state["seed"], 0))
        _, rollout = tasks.run_on_instance(edited, instance, record_states=True)
        payload = _trace_payload(instance, rollout, edited)
        payload.update(reward=reward, distance=distance, within_budget=True,
                       best_so_far=state["best"], orig_reward=state["orig"])
        return payload

    @app.post("/decode")
    def decode_latent(req: DecodeRequest) -> dict[str, Any]:
        if "vae" not in decoder_state:
            raise HTTPException(status_code=503,
                                detail={"error": "checkpoint",
                                        "message": "no checkpoint loaded"})
        if len(req.latent) != decoder_state["latent_dim"]:
            raise HTTPException(status_code=400, detail={
                "error": "latent",
                "message": f"expected {decoder_state['latent_dim']} dims"})
        z = torch.tensor([req.latent], dtype=torch.float32)
        tokens = decoder_state["vae"].decode(z, mode="greedy")[0]
        return {"program": " ".join(tokens)}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
