"""Network teleoperation service over the simulated gripper.

One asyncio control loop owns the simulator state (single writer).  Client
connections run reader/sender tasks that communicate with the loop through
a bounded command queue (full queue means `rejected(busy)`) and
per-connection outboxes, so no state is shared mutably across tasks.  The
first connection holds the operator role; everyone else observes.  The
loop ticks at the telemetry rate: it drains commands in arrival order,
advances any long-running activity (rotation, flip, sequence), and
broadcasts one frame per tick.

`GripperSession` is deliberately sans-IO so the whole command surface can
be exercised without sockets; `serve` adds the WebSocket plumbing and the
`GET /healthz` endpoint.
"""

from __future__ import annotations

import asyncio
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import Facing, FingerType, GripperState, HeldObject, HoldMode, StageOutcomeKind
from .protocol import (
    Cancel,
    Command,
    Flip,
    LoadObject,
    Pause,
    ProtocolError,
    Reply,
    Reset,
    Resume,
    RotatePalm,
    RunSequence,
    SetFingers,
    StageEvent,
    TelemetryFrame,
    Vacuum,
    accepted,
    completed,
    encode_command,
    parse_command,
    rejected,
    validate_command,
)
from .palm import DEFAULT_ACCEL, RotationCommand, RotationProfile, rotate_to
from .rig import Rig
from .rng import derive_seed
from .sequencer import (
    PHYSICAL_STAGES,
    SequencePlan,
    Sequencer,
    SequenceStage,
    StepResult,
    flip_profile,
    next_stage,
)
from .world import World, load_rules

FLIP_DURATION = 1.0  # s, timed kinematic toggle
FINGER_LAG_S = 0.080  # first-order regulator lag, telemetry realism only
REPLAY_BUFFER_FRAMES = 100
DEFAULT_RATE_HZ = 30.0
DEFAULT_QUEUE_SIZE = 1024


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    rate_hz: float = DEFAULT_RATE_HZ  # telemetry rate, 1..120
    time_scale: float = 1.0  # >1 runs simulated time faster than wall time
    queue_size: int = DEFAULT_QUEUE_SIZE
    trace_path: Optional[Path] = None
    seed: int = 0

    def validate(self) -> "ServiceConfig":
        if not 1.0 <= self.rate_hz <= 120.0:
            raise ValueError("rate_hz must be within [1, 120]")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be > 0")
        return self

    @classmethod
    def from_env(cls, base: Optional["ServiceConfig"] = None) -> "ServiceConfig":
        cfg = base or cls()
        bind = os.environ.get("PALMGRIP_BIND")
        if bind:
            host, _, port = bind.rpartition(":")
            cfg.host, cfg.port = host or cfg.host, int(port)
        rate = os.environ.get("PALMGRIP_RATE_HZ")
        if rate:
            cfg.rate_hz = float(rate)
        return cfg.validate()


# -- long-running activities --------------------------------------------------


@dataclass
class _Rotation:
    cmd_id: int
    profile: RotationProfile
    outcome: dict  # final rotate_to result payload
    final_state: GripperState
    elapsed: float = 0.0


@dataclass
class _FlipMove:
    cmd_id: int
    upward: bool
    elapsed: float = 0.0


@dataclass
class _SequenceRun:
    cmd_id: int
    plan: SequencePlan
    seed: int
    stage: SequenceStage = SequenceStage.APPROACH
    stage_result: Optional[StepResult] = None
    entry_state: Optional[GripperState] = None
    stage_elapsed: float = 0.0
    restarted: bool = False
    paused: bool = False
    failures: list[dict] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)


class GripperSession:
    """Single-writer simulator session behind the command surface."""

    def __init__(
        self,
        rig: Optional[Rig] = None,
        seed: int = 0,
        rules_path: Optional[Path] = None,
        finger_type: FingerType = FingerType.PRINTED,
        finger_lag_s: float = FINGER_LAG_S,
    ):
        self.rig = rig or Rig.default()
        self.rules = load_rules(rules_path)
        self.world = World(self.rules, self.rig, deterministic=False)
        self.sequencer = Sequencer(self.world)
        self.seed = seed
        self.finger_type = finger_type  # finger set driven by manual commands
        self.finger_lag_s = finger_lag_s
        self.state = GripperState()
        self.stage: SequenceStage = SequenceStage.IDLE
        self.last_event: Optional[StageEvent] = None
        self.activity: Optional[object] = None
        self._bend_target: Optional[tuple[float, float, float]] = None
        self._sequence_count = 0

    # -- command application ------------------------------------------------

    def handle_command(self, cmd: Command) -> list[Reply]:
        """Apply one command; returns the immediate replies (accepted /
        rejected / completed).  Long-running commands complete in `advance`.
        A rejected command leaves the state bit-identical."""
        errors = validate_command(cmd, self.rig.cfg)
        if errors:
            return [rejected(cmd.id, "; ".join(errors))]

        if isinstance(cmd, Pause):
            if not isinstance(self.activity, _SequenceRun):
                return [rejected(cmd.id, "nothing_in_flight")]
            self.activity.paused = True
            return [accepted(cmd.id), completed(cmd.id)]
        if isinstance(cmd, Resume):
            if not (isinstance(self.activity, _SequenceRun) and self.activity.paused):
                return [rejected(cmd.id, "nothing_paused")]
            self.activity.paused = False
            return [accepted(cmd.id), completed(cmd.id)]
        if isinstance(cmd, Cancel):
            if self.activity is None:
                return [rejected(cmd.id, "nothing_in_flight")]
            inflight_id = self.activity.cmd_id
            self.activity = None
            if self.stage is not SequenceStage.IDLE:
                self.stage = SequenceStage.IDLE
            return [
                completed(inflight_id, {"cancelled": True}),
                accepted(cmd.id),
                completed(cmd.id),
            ]
        if isinstance(cmd, Reset):
            self.activity = None
            self.state = GripperState()
            self.stage = SequenceStage.IDLE
            self.last_event = None
            return [accepted(cmd.id), completed(cmd.id)]

        if self.activity is not None:
            return [rejected(cmd.id, "busy")]

        if isinstance(cmd, SetFingers):
            # command applies instantly; displayed bends settle through a
            # first-order lag purely for telemetry realism
            self._bend_target = self.rig.bends(cmd.u, self.finger_type)
            self.state = self.state.with_(finger_command=cmd.u)
            return [accepted(cmd.id), completed(cmd.id)]
        if isinstance(cmd, Vacuum):
            self.state = self.state.with_(vacuum_on=cmd.on)
            return [accepted(cmd.id), completed(cmd.id)]
        if isinstance(cmd, LoadObject):
            if self.state.facing is not Facing.UP:
                return [rejected(cmd.id, "not_facing_up: flip up before loading the palm")]
            held = HeldObject(cmd.object, HoldMode.ON_PALM, object_yaw=0.0)
            self.state = self.state.with_(held_object=held)
            return [accepted(cmd.id), completed(cmd.id)]
        if isinstance(cmd, Flip):
            upward = cmd.direction == "up"
            if (self.state.facing is Facing.UP) == upward:
                return [accepted(cmd.id), completed(cmd.id)]  # already there
            if self.state.held_object and self.state.held_object.hold_mode is HoldMode.ON_PALM:
                return [rejected(cmd.id, "object_on_palm: re-grasp before flipping down")]
            self.activity = _FlipMove(cmd_id=cmd.id, upward=upward)
            return [accepted(cmd.id)]
        if isinstance(cmd, RotatePalm):
            return self._start_rotation(cmd)
        if isinstance(cmd, RunSequence):
            self.activity = _SequenceRun(
                cmd_id=cmd.id,
                plan=cmd.plan,
                seed=derive_seed(self.seed, "sequence", self._sequence_count),
            )
            self._sequence_count += 1
            self._bend_target = None  # stage results own the bends now
            self.state = GripperState()  # sequence starts from the idle pose
            self.stage = SequenceStage.APPROACH
            return [accepted(cmd.id)]
        return [rejected(cmd.id, "unknown_command")]

    def _start_rotation(self, cmd: RotatePalm) -> list[Reply]:
        held = self.state.held_object
        obj = held.obj if held and held.hold_mode is HoldMode.ON_PALM else None
        draped = held.draped if held else False
        rotation = RotationCommand(target_angle=cmd.target_deg, peak_speed=cmd.speed_dps)
        outcome = rotate_to(
            rotation,
            self.state.palm_angle,
            self.rig.cfg,
            obj_on_palm=obj,
            slip=self.rig.slip,
            vacuum_on=self.state.vacuum_on,
            draped=draped,
        )
        new_held = held
        if held is not None and obj is not None:
            new_held = HeldObject(
                held.obj, held.hold_mode, held.object_yaw + outcome.object_yaw_change, held.draped
            )
        final_state = self.state.with_(
            palm_angle=outcome.final_angle, palm_velocity=0.0, held_object=new_held
        )
        profile = RotationProfile(
            start_angle=self.state.palm_angle,
            target_angle=cmd.target_deg,
            peak_speed=cmd.speed_dps,
            accel=rotation.accel,
        )
        self.activity = _Rotation(
            cmd_id=cmd.id,
            profile=profile,
            outcome={
                "final_angle": outcome.final_angle,
                "duration": outcome.duration,
                "slipped": outcome.slipped,
                "slip_angle_error": outcome.slip_angle_error,
            },
            final_state=final_state,
        )
        return [accepted(cmd.id)]

    # -- time ---------------------------------------------------------------

    def advance(self, dt: float) -> list[Reply]:
        """Advance simulated time; returns completion replies that came due."""
        if dt <= 0:
            return []
        self._ease_fingers(dt)
        if self.activity is None:
            return []
        if isinstance(self.activity, _Rotation):
            return self._advance_rotation(self.activity, dt)
        if isinstance(self.activity, _FlipMove):
            return self._advance_flip(self.activity, dt)
        if isinstance(self.activity, _SequenceRun):
            return self._advance_sequence(self.activity, dt)
        return []

    def _ease_fingers(self, dt: float) -> None:
        if self._bend_target is None or isinstance(self.activity, _SequenceRun):
            return
        alpha = 1.0 - math.exp(-dt / self.finger_lag_s) if self.finger_lag_s > 0 else 1.0
        current = self.state.finger_bends
        eased = tuple(c + (t - c) * alpha for c, t in zip(current, self._bend_target))
        if max(abs(t - e) for t, e in zip(self._bend_target, eased)) < 1e-3:
            eased = self._bend_target
            self._bend_target = None
        self.state = self.state.with_(finger_bends=eased)

    def _advance_rotation(self, act: _Rotation, dt: float) -> list[Reply]:
        act.elapsed += dt
        if act.elapsed >= act.profile.duration:
            self.state = act.final_state
            self.activity = None
            return [completed(act.cmd_id, act.outcome)]
        angle = act.profile.angle_at(act.elapsed)
        speed = act.profile.direction * act.profile.speed_at(act.elapsed)
        self.state = self.state.with_(palm_angle=angle, palm_velocity=speed)
        return []

    def _advance_flip(self, act: _FlipMove, dt: float) -> list[Reply]:
        act.elapsed += dt
        angle = flip_profile(act.elapsed, FLIP_DURATION, act.upward)
        self.state = self.state.with_(flip_angle=angle)
        if act.elapsed >= FLIP_DURATION:
            self.activity = None
            return [completed(act.cmd_id, {"facing": self.state.facing.value})]
        return []

    def _advance_sequence(self, act: _SequenceRun, dt: float) -> list[Reply]:
        if act.paused:
            return []
        if act.stage_result is None:
            try:
                act.stage_result = self.sequencer.step(self.state, act.stage, act.plan, act.seed)
            except Exception as exc:  # precondition break: surface and stop
                self.activity = None
                self.stage = SequenceStage.IDLE
                return [completed(act.cmd_id, {"error": str(exc)})]
            act.entry_state = self.state
            act.stage_elapsed = 0.0
        result = act.stage_result
        act.stage_elapsed += dt
        self._animate_stage(act, result)
        if act.stage_elapsed < result.duration:
            return []

        # stage complete: commit result, emit event, move on
        self.state = result.state
        quote = None
        if result.failure is not None:
            rule = self.rules.rule_for(act.plan.obj.shape_class, act.plan.finger_type, act.stage.value)
            quote = rule.paper_quote or None
        self.last_event = StageEvent(
            stage=act.stage.value,
            outcome=result.outcome.value,
            failure=result.failure.value if result.failure else None,
            note=result.note,
            paper_quote=quote,
        )
        act.records.append(
            {
                "stage": act.stage.value,
                "outcome": result.outcome.value,
                "failure": result.failure.value if result.failure else None,
                "note": result.note,
                "restarted": act.restarted,
            }
        )
        failed = result.outcome is StageOutcomeKind.FAILED
        if failed:
            act.failures.append(act.records[-1])

        following = next_stage(act.stage)
        if failed and not act.plan.restart_on_failure:
            self.activity = None
            self.stage = SequenceStage.IDLE
            return [completed(act.cmd_id, {"overall_success": False, "stages": act.records})]
        if failed and following is not SequenceStage.DONE:
            self.state = self.sequencer.stage_precondition(following, act.plan)
            act.restarted = True
        elif not failed:
            act.restarted = False
        act.stage = following
        act.stage_result = None
        if act.stage is SequenceStage.DONE:
            self.activity = None
            self.stage = SequenceStage.DONE
            success = not act.failures
            return [completed(act.cmd_id, {"overall_success": success, "stages": act.records})]
        self.stage = act.stage
        return []

    def _animate_stage(self, act: _SequenceRun, result: StepResult) -> None:
        """Interpolate the visible state through the stage duration."""
        if result.duration <= 0 or act.entry_state is None:
            return
        t = min(act.stage_elapsed, result.duration)
        if act.stage in (SequenceStage.FLIP_UP, SequenceStage.FLIP_DOWN):
            upward = act.stage is SequenceStage.FLIP_UP
            self.state = act.entry_state.with_(
                flip_angle=flip_profile(t, result.duration, upward)
            )
        elif act.stage is SequenceStage.ROTATE_PALM:
            profile = RotationProfile(
                start_angle=act.entry_state.palm_angle,
                target_angle=result.state.palm_angle,
                peak_speed=act.plan.rotation_speed,
                accel=DEFAULT_ACCEL,
            )
            self.state = act.entry_state.with_(
                palm_angle=profile.angle_at(t),
                palm_velocity=profile.direction * profile.speed_at(t),
            )

    def frame(self, timestamp_ms: int) -> TelemetryFrame:
        return TelemetryFrame(
            timestamp_ms=timestamp_ms,
            state=self.state,
            stage=self.stage.value,
            last_event=self.last_event,
        )


# -- websocket plumbing --------------------------------------------------------


class _Client:
    def __init__(self, conn, role: str):
        self.conn = conn
        self.role = role
        self.outbox: asyncio.Queue[str] = asyncio.Queue()


class TeleopServer:
    def __init__(self, session: GripperSession, config: ServiceConfig):
        self.session = session
        self.config = config.validate()
        self.clients: list[_Client] = []
        self.commands: asyncio.Queue = asyncio.Queue(maxsize=config.queue_size)
        self.replay: list[str] = []
        self._last_ts = -1
        self._trace_fh = None
        self._server = None

    # role management: first-come operator, released on disconnect
    def _assign_role(self) -> str:
        return "operator" if all(c.role != "operator" for c in self.clients) else "observer"

    def _trace(self, record: dict) -> None:
        if self._trace_fh is not None:
            self._trace_fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._trace_fh.flush()

    async def handler(self, conn):
        client = _Client(conn, self._assign_role())
        self.clients.append(client)
        hello = json.dumps(
            {"type": "hello", "role": client.role, "replay": [json.loads(f) for f in self.replay]},
            sort_keys=True,
        )
        await conn.send(hello)
        sender = asyncio.create_task(self._sender(client))
        try:
            async for message in conn:
                await self._on_message(client, message)
        except Exception:
            pass
        finally:
            self.clients.remove(client)
            if client.role == "operator" and self.clients:
                self.clients[0].role = "operator"
                self.clients[0].outbox.put_nowait(
                    json.dumps({"type": "hello", "role": "operator", "replay": []}, sort_keys=True)
                )
            sender.cancel()

    async def _sender(self, client: _Client) -> None:
        try:
            while True:
                await client.conn.send(await client.outbox.get())
        except asyncio.CancelledError:
            pass
        except Exception:
            pass

    async def _on_message(self, client: _Client, message: str) -> None:
        try:
            cmd = parse_command(message)
        except ProtocolError as exc:
            reply = rejected(-1, f"{exc.reason}: {exc.detail}".rstrip(": "))
            client.outbox.put_nowait(reply.to_json())
            return
        self._trace({"dir": "recv", "role": client.role, "command": json.loads(encode_command(cmd))})
        if client.role != "operator":
            client.outbox.put_nowait(rejected(cmd.id, "observer_role").to_json())
            return
        try:
            self.commands.put_nowait((client, cmd))
        except asyncio.QueueFull:
            client.outbox.put_nowait(rejected(cmd.id, "busy").to_json())

    async def _control_loop(self) -> None:
        loop = asyncio.get_running_loop()
        t0 = loop.time()
        period = 1.0 / self.config.rate_hz
        next_tick = t0
        last_wall = t0
        while True:
            now = loop.time()
            # drain commands in arrival order
            while True:
                try:
                    client, cmd = self.commands.get_nowait()
                except asyncio.QueueEmpty:
                    break
                for reply in self.session.handle_command(cmd):
                    self._trace({"dir": "send", "reply": json.loads(reply.to_json())})
                    client.outbox.put_nowait(reply.to_json())
            # advance simulated time
            sim_dt = (now - last_wall) * self.config.time_scale
            last_wall = now
            for reply in self.session.advance(sim_dt):
                self._trace({"dir": "send", "reply": json.loads(reply.to_json())})
                for client in self.clients:
                    if client.role == "operator":
                        client.outbox.put_nowait(reply.to_json())
            # broadcast one frame
            ts = int((now - t0) * 1000.0)
            if ts <= self._last_ts:
                ts = self._last_ts + 1
            self._last_ts = ts
            frame_json = self.session.frame(ts).to_json()
            self.replay.append(frame_json)
            if len(self.replay) > REPLAY_BUFFER_FRAMES:
                self.replay.pop(0)
            for client in self.clients:
                client.outbox.put_nowait(frame_json)
            next_tick += period
            delay = next_tick - loop.time()
            if delay < -1.0:  # fell far behind; resynchronize
                next_tick = loop.time()
                delay = 0.0
            await asyncio.sleep(max(0.0, delay))

    def _process_request(self, conn, request):
        if request.path == "/healthz":
            return conn.respond(200, "ok\n")
        if request.path != "/ws":
            return conn.respond(404, "not found\n")
        return None

    async def serve_forever(self) -> None:
        from websockets.asyncio.server import serve as ws_serve

        if self.config.trace_path:
            self._trace_fh = open(self.config.trace_path, "a")
        try:
            async with ws_serve(
                self.handler,
                self.config.host,
                self.config.port,
                process_request=self._process_request,
            ) as server:
                self._server = server
                self.bound_port = server.sockets[0].getsockname()[1]
                await self._control_loop()
        finally:
            if self._trace_fh:
                self._trace_fh.close()


async def serve(config: Optional[ServiceConfig] = None, rig: Optional[Rig] = None) -> None:
    """Run the teleop service until cancelled."""
    config = ServiceConfig.from_env(config)
    session = GripperSession(rig=rig, seed=config.seed)
    server = TeleopServer(session, config)
    await server.serve_forever()
