"""Wire protocol and server: NDJSON over TCP plus a WebSocket mirror.

Every message is one canonical JSON line: "type" first, then the documented
field order for that type, no intra-object whitespace, LF terminated. Frames
carry no per-client data, so one tick's FRAME line is byte-identical for every
connected session, and a whole session transcript can be compared against a
stored golden file.

Field order by type:

    HELLO        type, client_name, mode, protocol
    POSE_INPUT   type, seq, move{ds, dtheta}
    SELECT_CITY  type, seq, city_id
    BYE          type, seq
    WELCOME      type, scene_id, title, tick_rate, surfaces, speakers,
                 menu_options[{city_id, label}]
    FRAME        type, seq, t_ticks, time, user_virtual_pose{position, yaw},
                 mapping{phys_pose{position, yaw}, heading_offset},
                 surfaces[{surface_id, media_id, frame_index}],
                 speaker_gains, selected_city
    ERROR        type, code, detail

Session rules: a client must HELLO (protocol "einstall/1") within 5 seconds or
is dropped with ERROR handshake_timeout. After WELCOME the server broadcasts
one FRAME per engine tick with seq equal to t_ticks. Inputs received mid-tick
are queued and applied at the next tick boundary, in arrival order with seq as
the per-session tiebreak; errors they raise (ERROR bad_input, bad seq, unknown
city) are emitted at that boundary, before the tick's FRAME, and the session
stays open. The engine is authoritative: POSE_INPUT carries walking intent
(a VirtDelta), never an absolute pose, so motion compression stays server-side.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import websockets

from .content_capsule import Capsule
from .geometry import Pose, Vec3
from .jsonio import dumps_compact
from .motion_compression import (
    CompressionConfig,
    MappingState,
    VirtDelta,
    Workspace,
    compress_step,
    reset_mapping,
)
from .reenactment_engine import (
    EngineConfig,
    EngineError,
    EngineState,
    SelectCity,
    SetPose,
    SurfaceState,
    TickFrame,
    build_frame,
    handle_input,
    init_engine,
    tick,
)
from .scene_model import CityOption, SceneManifest

PROTOCOL_VERSION = "einstall/1"
CLIENT_MODES = frozenset({"tracked", "scripted", "viewer"})
HANDSHAKE_TIMEOUT_S = 5.0

log = logging.getLogger(__name__)


class ProtocolError(ValueError):
    """A wire-level failure; code is one of the ERROR codes of the protocol."""

    def __init__(self, code: str, detail: str) -> None:
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


@dataclass(frozen=True, slots=True)
class Hello:
    client_name: str
    mode: str
    protocol: str


@dataclass(frozen=True, slots=True)
class PoseInput:
    seq: int
    move: VirtDelta


@dataclass(frozen=True, slots=True)
class SelectCityMsg:
    seq: int
    city_id: str


@dataclass(frozen=True, slots=True)
class Bye:
    seq: int


@dataclass(frozen=True, slots=True)
class Welcome:
    scene_id: str
    title: str
    tick_rate: float
    surfaces: tuple[str, ...]
    speakers: tuple[str, ...]
    menu_options: tuple[CityOption, ...]


@dataclass(frozen=True, slots=True)
class FrameMapping:
    phys_pose: Pose
    heading_offset: float


@dataclass(frozen=True, slots=True)
class Frame:
    seq: int
    t_ticks: int
    time: float
    user_virtual_pose: Pose
    mapping: FrameMapping
    surfaces: tuple[SurfaceState, ...]
    speaker_gains: dict[str, float]
    selected_city: str | None


@dataclass(frozen=True, slots=True)
class ErrorMsg:
    code: str
    detail: str


Message = Hello | PoseInput | SelectCityMsg | Bye | Welcome | Frame | ErrorMsg


def _pose_jsonable(pose: Pose) -> dict:
    return {"position": [pose.position.x, pose.position.y, pose.position.z], "yaw": pose.yaw}


def message_to_jsonable(msg: Message) -> dict:
    if isinstance(msg, Hello):
        return {"type": "HELLO", "client_name": msg.client_name, "mode": msg.mode, "protocol": msg.protocol}
    if isinstance(msg, PoseInput):
        return {"type": "POSE_INPUT", "seq": msg.seq, "move": {"ds": msg.move.ds, "dtheta": msg.move.dtheta}}
    if isinstance(msg, SelectCityMsg):
        return {"type": "SELECT_CITY", "seq": msg.seq, "city_id": msg.city_id}
    if isinstance(msg, Bye):
        return {"type": "BYE", "seq": msg.seq}
    if isinstance(msg, Welcome):
        return {
            "type": "WELCOME",
            "scene_id": msg.scene_id,
            "title": msg.title,
            "tick_rate": msg.tick_rate,
            "surfaces": list(msg.surfaces),
            "speakers": list(msg.speakers),
            "menu_options": [{"city_id": o.city_id, "label": o.label} for o in msg.menu_options],
        }
    if isinstance(msg, Frame):
        return {
            "type": "FRAME",
            "seq": msg.seq,
            "t_ticks": msg.t_ticks,
            "time": msg.time,
            "user_virtual_pose": _pose_jsonable(msg.user_virtual_pose),
            "mapping": {
                "phys_pose": _pose_jsonable(msg.mapping.phys_pose),
                "heading_offset": msg.mapping.heading_offset,
            },
            "surfaces": [
                {"surface_id": s.surface_id, "media_id": s.media_id, "frame_index": s.frame_index}
                for s in msg.surfaces
            ],
            "speaker_gains": dict(msg.speaker_gains),
            "selected_city": msg.selected_city,
        }
    if isinstance(msg, ErrorMsg):
        return {"type": "ERROR", "code": msg.code, "detail": msg.detail}
    raise TypeError(f"not a protocol message: {msg!r}")


def encode_message(msg: Message) -> bytes:
    """One canonical LF-terminated line."""
    return (dumps_compact(message_to_jsonable(msg)) + "\n").encode("utf-8")


def _need(obj: dict, keys: tuple[str, ...]) -> None:
    missing = [k for k in keys if k not in obj]
    if missing:
        raise ProtocolError("malformed", f"missing fields {missing}")
    extra = sorted(set(obj) - set(keys))
    if extra:
        raise ProtocolError("malformed", f"unknown fields {extra}")


def _d_str(obj: dict, key: str) -> str:
    v = obj.get(key)
    if not isinstance(v, str):
        raise ProtocolError("malformed", f"field {key} must be a string")
    return v


def _d_int(obj: dict, key: str) -> int:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ProtocolError("malformed", f"field {key} must be an integer")
    return v


def _d_num(obj: dict, key: str) -> float:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ProtocolError("malformed", f"field {key} must be a finite number")
    return float(v)


def _d_pose(value: Any, where: str) -> Pose:
    if not isinstance(value, dict):
        raise ProtocolError("malformed", f"{where} must be an object")
    _need(value, ("position", "yaw"))
    pos = value["position"]
    if not (isinstance(pos, list) and len(pos) == 3) or any(
        isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c) for c in pos
    ):
        raise ProtocolError("malformed", f"{where}.position must be an array of 3 finite numbers")
    return Pose(position=Vec3(float(pos[0]), float(pos[1]), float(pos[2])), yaw=_d_num(value, "yaw"))


def decode_message(line: bytes | str) -> Message:
    """Parse one line; strict within protocol version 1."""
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("malformed", "line is not valid UTF-8") from None
    line = line.rstrip("\n").rstrip("\r")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError("malformed", f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("malformed", "message must be a JSON object")
    mtype = obj.get("type")
    if not isinstance(mtype, str):
        raise ProtocolError("malformed", "missing type field")

    if mtype == "HELLO":
        _need(obj, ("type", "client_name", "mode", "protocol"))
        proto = _d_str(obj, "protocol")
        if proto != PROTOCOL_VERSION:
            raise ProtocolError("bad_version", f"unsupported protocol {proto!r}; this server speaks {PROTOCOL_VERSION}")
        mode = _d_str(obj, "mode")
        if mode not in CLIENT_MODES:
            raise ProtocolError("malformed", f"mode must be one of {sorted(CLIENT_MODES)}")
        return Hello(client_name=_d_str(obj, "client_name"), mode=mode, protocol=proto)
    if mtype == "POSE_INPUT":
        _need(obj, ("type", "seq", "move"))
        move = obj["move"]
        if not isinstance(move, dict):
            raise ProtocolError("malformed", "move must be an object")
        _need(move, ("ds", "dtheta"))
        try:
            delta = VirtDelta(ds=_d_num(move, "ds"), dtheta=_d_num(move, "dtheta"))
        except ValueError as exc:
            raise ProtocolError("malformed", str(exc)) from None
        return PoseInput(seq=_d_int(obj, "seq"), move=delta)
    if mtype == "SELECT_CITY":
        _need(obj, ("type", "seq", "city_id"))
        return SelectCityMsg(seq=_d_int(obj, "seq"), city_id=_d_str(obj, "city_id"))
    if mtype == "BYE":
        _need(obj, ("type", "seq"))
        return Bye(seq=_d_int(obj, "seq"))
    if mtype == "WELCOME":
        _need(obj, ("type", "scene_id", "title", "tick_rate", "surfaces", "speakers", "menu_options"))
        surfaces = obj["surfaces"]
        speakers = obj["speakers"]
        options = obj["menu_options"]
        if not isinstance(surfaces, list) or not all(isinstance(s, str) for s in surfaces):
            raise ProtocolError("malformed", "surfaces must be an array of strings")
        if not isinstance(speakers, list) or not all(isinstance(s, str) for s in speakers):
            raise ProtocolError("malformed", "speakers must be an array of strings")
        if not isinstance(options, list):
            raise ProtocolError("malformed", "menu_options must be an array")
        opts = []
        for o in options:
            if not isinstance(o, dict):
                raise ProtocolError("malformed", "menu_options entries must be objects")
            _need(o, ("city_id", "label"))
            opts.append(CityOption(city_id=_d_str(o, "city_id"), label=_d_str(o, "label")))
        return Welcome(
            scene_id=_d_str(obj, "scene_id"),
            title=_d_str(obj, "title"),
            tick_rate=_d_num(obj, "tick_rate"),
            surfaces=tuple(surfaces),
            speakers=tuple(speakers),
            menu_options=tuple(opts),
        )
    if mtype == "FRAME":
        _need(
            obj,
            (
                "type",
                "seq",
                "t_ticks",
                "time",
                "user_virtual_pose",
                "mapping",
                "surfaces",
                "speaker_gains",
                "selected_city",
            ),
        )
        mapping = obj["mapping"]
        if not isinstance(mapping, dict):
            raise ProtocolError("malformed", "mapping must be an object")
        _need(mapping, ("phys_pose", "heading_offset"))
        raw_surfaces = obj["surfaces"]
        if not isinstance(raw_surfaces, list):
            raise ProtocolError("malformed", "surfaces must be an array")
        surfaces = []
        for s in raw_surfaces:
            if not isinstance(s, dict):
                raise ProtocolError("malformed", "surface entries must be objects")
            _need(s, ("surface_id", "media_id", "frame_index"))
            surfaces.append(
                SurfaceState(
                    surface_id=_d_str(s, "surface_id"),
                    media_id=_d_str(s, "media_id"),
                    frame_index=_d_int(s, "frame_index"),
                )
            )
        gains = obj["speaker_gains"]
        if not isinstance(gains, dict) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in gains.values()
        ):
            raise ProtocolError("malformed", "speaker_gains must map ids to numbers")
        selected = obj["selected_city"]
        if selected is not None and not isinstance(selected, str):
            raise ProtocolError("malformed", "selected_city must be a string or null")
        return Frame(
            seq=_d_int(obj, "seq"),
            t_ticks=_d_int(obj, "t_ticks"),
            time=_d_num(obj, "time"),
            user_virtual_pose=_d_pose(obj["user_virtual_pose"], "user_virtual_pose"),
            mapping=FrameMapping(
                phys_pose=_d_pose(mapping["phys_pose"], "mapping.phys_pose"),
                heading_offset=_d_num(mapping, "heading_offset"),
            ),
            surfaces=tuple(surfaces),
            speaker_gains={k: float(v) for k, v in gains.items()},
            selected_city=selected,
        )
    if mtype == "ERROR":
        _need(obj, ("type", "code", "detail"))
        return ErrorMsg(code=_d_str(obj, "code"), detail=_d_str(obj, "detail"))
    raise ProtocolError("malformed", f"unknown type {mtype!r}")


# -- deterministic server core -------------------------------------------------

@dataclass
class ServerCore:
    """Transport-free session logic: input queue, tick advance, frame build.

    One core serves any number of sessions; inputs are applied at tick
    boundaries in submission order (seq breaking ties within a session), and
    the FRAME for a tick is built once, so every session sees identical bytes.
    """

    manifest: SceneManifest
    capsule: Capsule | None
    engine_config: EngineConfig
    compression: CompressionConfig = CompressionConfig()
    workspace: Workspace = Workspace()
    state: EngineState = field(init=False)
    mapping: MappingState = field(init=False)
    _pending: list[tuple[int, int, str, Message]] = field(init=False, default_factory=list)
    _arrivals: int = field(init=False, default=0)
    _last_seq: dict[str, int] = field(init=False, default_factory=dict)
    _last_kappa: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        self.state = init_engine(self.manifest, self.capsule, self.engine_config)
        self.mapping = reset_mapping(self.workspace, Pose.at(0.0, 0.0))
        self.state = handle_input(self.state, SetPose(self.mapping.virt_pose))

    def welcome(self) -> Welcome:
        options = self.manifest.widgets[0].options if self.manifest.widgets else ()
        return Welcome(
            scene_id=self.manifest.scene_id,
            title=self.manifest.title,
            tick_rate=self.engine_config.tick_rate,
            surfaces=tuple(n.node_id for n in self.manifest.media_surfaces()),
            speakers=tuple(s.speaker_id for s in self.manifest.speakers),
            menu_options=tuple(options),
        )

    def submit(self, session_id: str, msg: PoseInput | SelectCityMsg) -> None:
        """Queue an input for the next tick boundary."""
        self._arrivals += 1
        seq = msg.seq
        self._pending.append((self._arrivals, seq, session_id, msg))

    def _apply(self, session_id: str, msg: Message) -> ErrorMsg | None:
        if isinstance(msg, PoseInput):
            self.mapping, self._last_kappa = compress_step(
                self.mapping, msg.move, self.compression, self.workspace
            )
            self.state = handle_input(self.state, SetPose(self.mapping.virt_pose))
            return None
        if isinstance(msg, SelectCityMsg):
            try:
                self.state = handle_input(self.state, SelectCity(city_id=msg.city_id))
            except EngineError as exc:
                return ErrorMsg(code="bad_input", detail=str(exc))
            return None
        return ErrorMsg(code="bad_input", detail=f"cannot apply {type(msg).__name__}")

    def advance_tick(self) -> tuple[Frame, list[tuple[str, ErrorMsg]]]:
        """Apply queued inputs in (arrival, seq) order, advance one tick."""
        pending = sorted(self._pending, key=lambda item: (item[0], item[1]))
        self._pending.clear()
        errors: list[tuple[str, ErrorMsg]] = []
        for _, seq, session_id, msg in pending:
            if session_id in self._last_seq and seq <= self._last_seq[session_id]:
                errors.append((session_id, ErrorMsg(code="bad_input", detail="seq must be strictly increasing")))
                continue
            self._last_seq[session_id] = seq
            err = self._apply(session_id, msg)
            if err is not None:
                errors.append((session_id, err))
        self.state, tick_frame = tick(self.state)
        return self._to_frame(tick_frame), errors

    def _to_frame(self, tf: TickFrame) -> Frame:
        return Frame(
            seq=tf.t_ticks,
            t_ticks=tf.t_ticks,
            time=tf.time,
            user_virtual_pose=tf.user_virtual_pose,
            mapping=FrameMapping(phys_pose=self.mapping.phys_pose, heading_offset=self.mapping.heading_offset),
            surfaces=tf.surfaces,
            speaker_gains=tf.speaker_gains,
            selected_city=tf.menu.selected_city if tf.menu is not None else None,
        )

    def current_frame(self) -> Frame:
        return self._to_frame(build_frame(self.state))


def run_scripted_session(
    core: ServerCore,
    hello: Hello,
    scripted: dict[int, list[PoseInput | SelectCityMsg]],
    ticks: int,
    session_id: str = "s1",
) -> list[bytes]:
    """Drive one deterministic session in process; returns server->client lines.

    scripted[t] holds the messages arriving during the window before tick t's
    boundary. The transcript is WELCOME, then per tick any boundary ERRORs
    followed by the FRAME — exactly what a TCP client would read.
    """
    if hello.protocol != PROTOCOL_VERSION:
        return [encode_message(ErrorMsg(code="bad_version", detail=f"unsupported protocol {hello.protocol!r}"))]
    lines = [encode_message(core.welcome())]
    for t in range(1, ticks + 1):
        for msg in scripted.get(t, []):
            core.submit(session_id, msg)
        frame, errors = core.advance_tick()
        for sid, err in errors:
            if sid == session_id:
                lines.append(encode_message(err))
        lines.append(encode_message(frame))
    return lines


# -- async transports ----------------------------------------------------------

class _Session:
    def __init__(self, session_id: str, send_line) -> None:
        self.session_id = session_id
        self.send_line = send_line
        self.handshaken = False


class Server:
    """Live server: one engine loop, TCP NDJSON sessions, WebSocket sessions."""

    def __init__(
        self,
        manifest: SceneManifest,
        capsule: Capsule | None,
        engine_config: EngineConfig,
        compression: CompressionConfig | None = None,
        workspace: Workspace | None = None,
        handshake_timeout: float = HANDSHAKE_TIMEOUT_S,
    ) -> None:
        self.core = ServerCore(
            manifest=manifest,
            capsule=capsule,
            engine_config=engine_config,
            compression=compression or CompressionConfig(),
            workspace=workspace or Workspace(),
        )
        self.handshake_timeout = handshake_timeout
        self._sessions: dict[str, _Session] = {}
        self._next_id = 0
        self._tcp_server: asyncio.Server | None = None
        self._ws_server = None
        self._tick_task: asyncio.Task | None = None

    def _new_session_id(self) -> str:
        self._next_id += 1
        return f"c{self._next_id}"

    async def _send_safe(self, session: _Session, data: bytes) -> None:
        try:
            await session.send_line(data)
        except Exception:
            self._sessions.pop(session.session_id, None)

    async def _tick_loop(self) -> None:
        period = 1.0 / self.core.engine_config.tick_rate
        while True:
            await asyncio.sleep(period)
            frame, errors = self.core.advance_tick()
            for session_id, err in errors:
                session = self._sessions.get(session_id)
                if session is not None:
                    await self._send_safe(session, encode_message(err))
            data = encode_message(frame)
            for session in list(self._sessions.values()):
                if session.handshaken:
                    await self._send_safe(session, data)

    async def _handle_lines(self, session: _Session, readline) -> None:
        """Shared session protocol over any line transport."""
        try:
            try:
                first = await asyncio.wait_for(readline(), timeout=self.handshake_timeout)
            except asyncio.TimeoutError:
                await self._send_safe(session, encode_message(ErrorMsg("handshake_timeout", "no HELLO within 5 s")))
                return
            if first is None:
                return
            try:
                hello = decode_message(first)
                if not isinstance(hello, Hello):
                    raise ProtocolError("malformed", "first message must be HELLO")
            except ProtocolError as exc:
                await self._send_safe(session, encode_message(ErrorMsg(exc.code, exc.detail)))
                return
            session.handshaken = True
            await self._send_safe(session, encode_message(self.core.welcome()))
            while True:
                line = await readline()
                if line is None:
                    return
                if not line.strip():
                    continue
                try:
                    msg = decode_message(line)
                except ProtocolError as exc:
                    await self._send_safe(session, encode_message(ErrorMsg(exc.code, exc.detail)))
                    continue
                if isinstance(msg, Bye):
                    return
                if isinstance(msg, (PoseInput, SelectCityMsg)):
                    self.core.submit(session.session_id, msg)
                else:
                    await self._send_safe(
                        session, encode_message(ErrorMsg("bad_input", f"unexpected {type(msg).__name__}"))
                    )
        finally:
            self._sessions.pop(session.session_id, None)

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        session = _Session(self._new_session_id(), None)

        async def send_line(data: bytes) -> None:
            writer.write(data)
            await writer.drain()

        async def readline() -> bytes | None:
            data = await reader.readline()
            return data if data else None

        session.send_line = send_line
        self._sessions[session.session_id] = session
        try:
            await self._handle_lines(session, readline)
        finally:
            with contextlib.suppress(Exception):
                writer.close()
                await writer.wait_closed()

    async def _handle_ws(self, connection) -> None:
        path = connection.request.path if connection.request is not None else ""
        if path != "/ws":
            await connection.close(code=1008, reason="path must be /ws")
            return
        session = _Session(self._new_session_id(), None)

        async def send_line(data: bytes) -> None:
            await connection.send(data.decode("utf-8"))

        async def readline() -> bytes | None:
            try:
                msg = await connection.recv()
            except websockets.exceptions.ConnectionClosed:
                return None
            return msg.encode("utf-8") if isinstance(msg, str) else msg

        session.send_line = send_line
        self._sessions[session.session_id] = session
        await self._handle_lines(session, readline)

    async def start(self, host: str = "127.0.0.1", tcp_port: int = 7777, ws_port: int = 7778) -> None:
        self._tcp_server = await asyncio.start_server(self._handle_tcp, host, tcp_port)
        self._ws_server = await websockets.serve(self._handle_ws, host, ws_port)
        self._tick_task = asyncio.create_task(self._tick_loop())
        log.info("serving tcp=%s:%d ws=%s:%d/ws", host, tcp_port, host, ws_port)

    async def stop(self) -> None:
        if self._tick_task is not None:
            self._tick_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await self._tick_task
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()


async def serve(
    manifest: SceneManifest,
    capsule: Capsule | None,
    engine_config: EngineConfig,
    host: str = "127.0.0.1",
    tcp_port: int = 7777,
    ws_port: int = 7778,
    compression: CompressionConfig | None = None,
    workspace: Workspace | None = None,
) -> None:
    """Run the server until cancelled."""
    server = Server(manifest, capsule, engine_config, compression=compression, workspace=workspace)
    await server.start(host=host, tcp_port=tcp_port, ws_port=ws_port)
    try:
        await asyncio.Future()
    finally:
        await server.stop()
