"""Wire format, ServerCore boundary semantics, and live transport tests."""

from __future__ import annotations

import asyncio
import contextlib
import json
import random
import socket
from pathlib import Path

import pytest
import websockets
from websockets.exceptions import ConnectionClosed

from golden_script import GOLDEN_TICKS, golden_core, golden_hello, golden_inputs, golden_lines

from einstall.geometry import Pose
from einstall.motion_compression import CompressionConfig, VirtDelta, Workspace, compress_step, reset_mapping
from einstall.protocol import (
    PROTOCOL_VERSION,
    Bye,
    ErrorMsg,
    Frame,
    FrameMapping,
    Hello,
    PoseInput,
    ProtocolError,
    SelectCityMsg,
    Server,
    ServerCore,
    Welcome,
    decode_message,
    encode_message,
    run_scripted_session,
)
from einstall.reenactment_engine import EngineConfig, SurfaceState
from einstall.scene_model import builtin_scene

GOLDEN_PATH = Path(__file__).parent / "golden" / "vf_60.ndjson"
IO_TIMEOUT = 10.0


# -- exact line encodings --------------------------------------------------------

def test_bye_exact_bytes():
    assert encode_message(Bye(seq=7)) == b'{"type":"BYE","seq":7}\n'


def test_hello_exact_bytes():
    msg = Hello(client_name="cap", mode="viewer", protocol=PROTOCOL_VERSION)
    assert encode_message(msg) == b'{"type":"HELLO","client_name":"cap","mode":"viewer","protocol":"einstall/1"}\n'


def test_pose_input_exact_bytes():
    msg = PoseInput(seq=3, move=VirtDelta(0.15, -0.25))
    assert encode_message(msg) == b'{"type":"POSE_INPUT","seq":3,"move":{"ds":0.15,"dtheta":-0.25}}\n'


def test_select_city_exact_bytes():
    assert encode_message(SelectCityMsg(seq=9, city_id="seoul")) == b'{"type":"SELECT_CITY","seq":9,"city_id":"seoul"}\n'


def test_error_exact_bytes():
    msg = ErrorMsg(code="bad_input", detail="seq must be strictly increasing")
    assert encode_message(msg) == b'{"type":"ERROR","code":"bad_input","detail":"seq must be strictly increasing"}\n'


def test_lines_are_lf_terminated_single_line():
    for line in golden_lines():
        assert line.endswith(b"\n")
        assert line.count(b"\n") == 1


def test_frame_field_order():
    core = golden_core()
    frame, _ = core.advance_tick()
    obj = json.loads(encode_message(frame).decode("utf-8"))
    assert list(obj) == [
        "type", "seq", "t_ticks", "time", "user_virtual_pose", "mapping",
        "surfaces", "speaker_gains", "selected_city",
    ]
    assert list(obj["user_virtual_pose"]) == ["position", "yaw"]
    assert list(obj["mapping"]) == ["phys_pose", "heading_offset"]
    assert list(obj["mapping"]["phys_pose"]) == ["position", "yaw"]
    assert list(obj["surfaces"][0]) == ["surface_id", "media_id", "frame_index"]


def test_welcome_field_order(demo_capsule):
    core = ServerCore(manifest=builtin_scene("mc"), capsule=demo_capsule, engine_config=EngineConfig())
    obj = json.loads(encode_message(core.welcome()).decode("utf-8"))
    assert list(obj) == ["type", "scene_id", "title", "tick_rate", "surfaces", "speakers", "menu_options"]
    assert list(obj["menu_options"][0]) == ["city_id", "label"]


# -- decoding --------------------------------------------------------------------

BAD_LINES = [
    (b"not json\n", "malformed"),
    (b"[1,2]\n", "malformed"),
    (b'{"seq":1}\n', "malformed"),
    (b'{"type":"NOPE"}\n', "malformed"),
    (b'{"type":"HELLO","client_name":"x","mode":"pilot","protocol":"einstall/1"}\n', "malformed"),
    (b'{"type":"HELLO","client_name":"x","protocol":"einstall/1"}\n', "malformed"),
    (b'{"type":"HELLO","client_name":"x","mode":"viewer","protocol":"einstall/2"}\n', "bad_version"),
    (b'{"type":"POSE_INPUT","seq":1,"move":{"ds":0.5,"dtheta":0.0}}\n', "malformed"),
    (b'{"type":"POSE_INPUT","seq":1,"move":{"ds":-0.1,"dtheta":0.0}}\n', "malformed"),
    (b'{"type":"POSE_INPUT","seq":1,"move":{"ds":NaN,"dtheta":0.0}}\n', "malformed"),
    (b'{"type":"POSE_INPUT","seq":1,"move":{"ds":0.1}}\n', "malformed"),
    (b'{"type":"POSE_INPUT","seq":1,"move":[0.1,0.0]}\n', "malformed"),
    (b'{"type":"POSE_INPUT","seq":true,"move":{"ds":0.1,"dtheta":0.0}}\n', "malformed"),
    (b'{"type":"POSE_INPUT","seq":1,"move":{"ds":0.1,"dtheta":0.0},"extra":1}\n', "malformed"),
    (b'{"type":"SELECT_CITY","seq":1}\n', "malformed"),
    (b'{"type":"SELECT_CITY","seq":1,"city_id":7}\n', "malformed"),
    (b'{"type":"BYE"}\n', "malformed"),
    (b'{"type":"FRAME","seq":1}\n', "malformed"),
    (b"\xff\xfe{}\n", "malformed"),
]


@pytest.mark.parametrize("line,code", BAD_LINES, ids=[f"bad{i:02d}" for i in range(len(BAD_LINES))])
def test_decode_rejects(line, code):
    with pytest.raises(ProtocolError) as err:
        decode_message(line)
    assert err.value.code == code


def test_decode_accepts_str_input():
    assert decode_message('{"type":"BYE","seq":4}') == Bye(seq=4)


def test_bad_version_detail_names_both_versions():
    with pytest.raises(ProtocolError) as err:
        decode_message(b'{"type":"HELLO","client_name":"x","mode":"viewer","protocol":"einstall/0"}\n')
    assert "einstall/0" in err.value.detail
    assert PROTOCOL_VERSION in err.value.detail


SAMPLE_MESSAGES = [
    Hello(client_name="walker", mode="tracked", protocol=PROTOCOL_VERSION),
    PoseInput(seq=1, move=VirtDelta(0.2, 0.125)),
    SelectCityMsg(seq=2, city_id="new_york"),
    Bye(seq=3),
    ErrorMsg(code="bad_input", detail="unknown city"),
    Welcome(
        scene_id="vf",
        title="Versailles Fountain",
        tick_rate=30.0,
        surfaces=("crt_01", "crt_02"),
        speakers=("spk_left",),
        menu_options=(),
    ),
]


@pytest.mark.parametrize("msg", SAMPLE_MESSAGES, ids=lambda m: type(m).__name__)
def test_decode_encode_identity(msg):
    line = encode_message(msg)
    assert decode_message(line) == msg
    assert encode_message(decode_message(line)) == line


def random_frame(rng: random.Random, t: int) -> Frame:
    def coord() -> float:
        return rng.uniform(-5.0, 5.0)

    def yaw() -> float:
        return rng.uniform(-3.14159, 3.14159)

    surfaces = tuple(
        SurfaceState(
            surface_id=f"s{i:02d}",
            media_id=rng.choice(["tape_a", "clip_b", "(blank)"]),
            frame_index=rng.randrange(0, 600),
        )
        for i in range(rng.randrange(1, 6))
    )
    gains = {f"spk_{i}": rng.uniform(0.0, 1.0) for i in range(rng.randrange(1, 4))}
    return Frame(
        seq=t,
        t_ticks=t,
        time=t / 30.0,
        user_virtual_pose=Pose.at(coord(), coord(), 0.0, yaw()),
        mapping=FrameMapping(phys_pose=Pose.at(coord(), coord(), 0.0, yaw()), heading_offset=yaw()),
        surfaces=surfaces,
        speaker_gains=gains,
        selected_city=rng.choice([None, "seoul", "karlsruhe"]),
    )


def test_random_frames_round_trip():
    rng = random.Random(20240817)
    for t in range(1, 26):
        frame = random_frame(rng, t)
        line = encode_message(frame)
        decoded = decode_message(line)
        assert decoded == frame
        assert encode_message(decoded) == line


CLIENT_LINES = [
    b'{"type":"HELLO","client_name":"viewer-1","mode":"viewer","protocol":"einstall/1"}\n',
    b'{"type":"POSE_INPUT","seq":1,"move":{"ds":0.15,"dtheta":-0.2}}\n',
    b'{"type":"SELECT_CITY","seq":2,"city_id":"seoul"}\n',
    b'{"type":"BYE","seq":3}\n',
    b'{"type":"ERROR","code":"bad_input","detail":"nope"}\n',
]


def test_client_corpus_encode_decode_identity():
    for line in CLIENT_LINES:
        assert encode_message(decode_message(line)) == line


# -- ServerCore boundary semantics -----------------------------------------------

def vf_core() -> ServerCore:
    return ServerCore(manifest=builtin_scene("vf"), capsule=None, engine_config=EngineConfig(tick_rate=30.0))


def mc_core(capsule) -> ServerCore:
    return ServerCore(
        manifest=builtin_scene("mc"), capsule=capsule, engine_config=EngineConfig(tick_rate=30.0, rng_seed=9)
    )


def test_welcome_vf():
    w = vf_core().welcome()
    assert w.scene_id == "vf"
    assert w.title == "Versailles Fountain"
    assert w.tick_rate == 30.0
    assert len(w.surfaces) == 38
    assert w.surfaces[0] == "crt_01"
    assert w.speakers == ("spk_left", "spk_right")
    assert w.menu_options == ()


def test_welcome_mc(demo_capsule):
    w = mc_core(demo_capsule).welcome()
    assert w.scene_id == "mc"
    assert [o.city_id for o in w.menu_options] == ["seoul", "karlsruhe", "new_york"]
    assert [o.label for o in w.menu_options] == ["Seoul", "Karlsruhe", "New York"]


def test_inputs_applied_in_order_at_boundary():
    moves = [VirtDelta(0.2, 0.0), VirtDelta(0.2, 0.5)]
    mapping = reset_mapping(Workspace(), Pose.at(0.0, 0.0))
    for mv in moves:
        mapping, _ = compress_step(mapping, mv, CompressionConfig(), Workspace())

    core = vf_core()
    core.submit("s", PoseInput(seq=1, move=moves[0]))
    core.submit("s", PoseInput(seq=2, move=moves[1]))
    frame, errors = core.advance_tick()
    assert errors == []
    assert frame.user_virtual_pose == mapping.virt_pose
    assert frame.mapping.phys_pose == mapping.phys_pose
    assert frame.mapping.heading_offset == mapping.heading_offset


def test_stale_seq_rejected_across_ticks():
    core = vf_core()
    core.submit("s", PoseInput(seq=5, move=VirtDelta(0.1, 0.0)))
    frame1, errors = core.advance_tick()
    assert errors == []

    core.submit("s", PoseInput(seq=5, move=VirtDelta(0.1, 0.0)))
    frame2, errors = core.advance_tick()
    assert [(sid, e.code) for sid, e in errors] == [("s", "bad_input")]
    assert "strictly increasing" in errors[0][1].detail
    assert frame2.user_virtual_pose == frame1.user_virtual_pose

    core.submit("s", PoseInput(seq=6, move=VirtDelta(0.1, 0.0)))
    frame3, errors = core.advance_tick()
    assert errors == []
    assert frame3.user_virtual_pose != frame2.user_virtual_pose


def test_equal_seq_from_two_sessions_is_fine():
    core = vf_core()
    core.submit("a", PoseInput(seq=1, move=VirtDelta(0.1, 0.0)))
    core.submit("b", PoseInput(seq=1, move=VirtDelta(0.1, 0.0)))
    _, errors = core.advance_tick()
    assert errors == []


def test_menu_error_keeps_session_going():
    core = vf_core()
    core.submit("s", SelectCityMsg(seq=1, city_id="seoul"))
    frame, errors = core.advance_tick()
    assert [(sid, e.code) for sid, e in errors] == [("s", "bad_input")]
    assert "no menu widget" in errors[0][1].detail
    assert frame.selected_city is None

    core.submit("s", PoseInput(seq=2, move=VirtDelta(0.2, 0.0)))
    frame, errors = core.advance_tick()
    assert errors == []
    assert frame.user_virtual_pose.position.x > 0.19


def test_unknown_city_reports_options(demo_capsule):
    core = mc_core(demo_capsule)
    core.submit("s", SelectCityMsg(seq=1, city_id="atlantis"))
    _, errors = core.advance_tick()
    assert errors[0][1].code == "bad_input"
    assert "unknown city" in errors[0][1].detail


def test_select_city_lands_on_next_frame(demo_capsule):
    core = mc_core(demo_capsule)
    frame, _ = core.advance_tick()
    assert frame.selected_city is None
    assert all(s.media_id == "(blank)" for s in frame.surfaces)

    core.submit("s", SelectCityMsg(seq=1, city_id="seoul"))
    frame, errors = core.advance_tick()
    assert errors == []
    assert frame.selected_city == "seoul"
    assert all(s.media_id != "(blank)" for s in frame.surfaces)


def test_frame_seq_equals_t_ticks():
    core = vf_core()
    for expected in range(1, 6):
        frame, _ = core.advance_tick()
        assert frame.seq == expected
        assert frame.t_ticks == expected
        assert frame.time == pytest.approx(expected / 30.0)


def test_errors_attributed_to_their_session():
    core = vf_core()
    core.submit("a", PoseInput(seq=1, move=VirtDelta(0.1, 0.0)))
    core.submit("b", PoseInput(seq=1, move=VirtDelta(0.1, 0.0)))
    core.advance_tick()
    core.submit("a", PoseInput(seq=1, move=VirtDelta(0.1, 0.0)))
    core.submit("b", PoseInput(seq=2, move=VirtDelta(0.1, 0.0)))
    _, errors = core.advance_tick()
    assert [sid for sid, _ in errors] == ["a"]


# -- golden transcript -----------------------------------------------------------

def test_golden_transcript_bytes():
    assert GOLDEN_PATH.exists(), "run scripts/gen_golden.py to create the golden transcript"
    assert b"".join(golden_lines()) == GOLDEN_PATH.read_bytes()


def test_golden_structure():
    lines = golden_lines()
    assert len(lines) == GOLDEN_TICKS + 3
    messages = [decode_message(line) for line in lines]
    assert isinstance(messages[0], Welcome)
    errors = [m for m in messages if isinstance(m, ErrorMsg)]
    assert [e.code for e in errors] == ["bad_input", "bad_input"]
    assert "no menu widget" in errors[0].detail
    assert "strictly increasing" in errors[1].detail
    frames = [m for m in messages if isinstance(m, Frame)]
    assert [f.t_ticks for f in frames] == list(range(1, GOLDEN_TICKS + 1))
    assert [type(m).__name__ for m in messages[25:27]] == ["ErrorMsg", "Frame"]
    assert [type(m).__name__ for m in messages[41:43]] == ["ErrorMsg", "Frame"]


def test_golden_lines_survive_decode_encode():
    for line in GOLDEN_PATH.read_bytes().splitlines(keepends=True):
        assert encode_message(decode_message(line)) == line


def test_scripted_session_is_deterministic():
    assert golden_lines() == golden_lines()


def test_scripted_session_rejects_bad_version():
    lines = run_scripted_session(golden_core(), Hello("x", "scripted", "einstall/2"), golden_inputs(), 5)
    assert len(lines) == 1
    msg = decode_message(lines[0])
    assert isinstance(msg, ErrorMsg)
    assert msg.code == "bad_version"


def test_scripted_session_hides_other_sessions_errors():
    core = golden_core()
    core.submit("intruder", SelectCityMsg(seq=1, city_id="seoul"))
    lines = run_scripted_session(core, golden_hello(), {}, 3)
    assert all(not isinstance(decode_message(line), ErrorMsg) for line in lines)


# -- live transports -------------------------------------------------------------

def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@contextlib.asynccontextmanager
async def live_server(scene_id="vf", capsule=None, tick_rate=120.0, handshake_timeout=5.0):
    server = Server(
        builtin_scene(scene_id),
        capsule,
        EngineConfig(tick_rate=tick_rate, rng_seed=7),
        handshake_timeout=handshake_timeout,
    )
    tcp_port, ws_port = free_port(), free_port()
    await server.start("127.0.0.1", tcp_port=tcp_port, ws_port=ws_port)
    try:
        yield tcp_port, ws_port
    finally:
        await server.stop()


def run_async(coro):
    return asyncio.run(asyncio.wait_for(coro, timeout=60.0))


async def read_message(reader):
    line = await asyncio.wait_for(reader.readline(), timeout=IO_TIMEOUT)
    assert line, "connection closed while a message was expected"
    return decode_message(line)


async def read_until(reader, message_type):
    for _ in range(200):
        msg = await read_message(reader)
        if isinstance(msg, message_type):
            return msg
    raise AssertionError(f"no {message_type.__name__} within 200 lines")


async def send(writer, msg):
    writer.write(encode_message(msg))
    await writer.drain()


def test_tcp_session_happy_path():
    async def scenario():
        async with live_server() as (tcp_port, _):
            reader, writer = await asyncio.open_connection("127.0.0.1", tcp_port)
            await send(writer, Hello("it", "tracked", PROTOCOL_VERSION))
            welcome = await read_message(reader)
            assert isinstance(welcome, Welcome)
            assert welcome.scene_id == "vf"
            assert len(welcome.surfaces) == 38

            first = await read_until(reader, Frame)
            second = await read_until(reader, Frame)
            assert second.t_ticks == first.t_ticks + 1
            assert second.seq == second.t_ticks

            await send(writer, PoseInput(seq=1, move=VirtDelta(0.2, 0.0)))
            for _ in range(50):
                frame = await read_until(reader, Frame)
                if frame.user_virtual_pose.position.x > 0.19:
                    break
            else:
                raise AssertionError("pose input never reached the engine")

            await send(writer, SelectCityMsg(seq=2, city_id="seoul"))
            err = await read_until(reader, ErrorMsg)
            assert err.code == "bad_input"
            await read_until(reader, Frame)

            await send(writer, Bye(seq=3))
            while await asyncio.wait_for(reader.readline(), timeout=IO_TIMEOUT):
                pass
            writer.close()

    run_async(scenario())


def test_tcp_broadcast_is_byte_identical():
    async def scenario():
        async with live_server() as (tcp_port, _):
            async def collect(n):
                reader, writer = await asyncio.open_connection("127.0.0.1", tcp_port)
                await send(writer, Hello("w", "viewer", PROTOCOL_VERSION))
                lines = {}
                while len(lines) < n:
                    line = await asyncio.wait_for(reader.readline(), timeout=IO_TIMEOUT)
                    assert line
                    obj = json.loads(line.decode("utf-8"))
                    if obj["type"] == "FRAME":
                        lines[obj["seq"]] = line
                writer.close()
                return lines

            a, b = await asyncio.gather(collect(8), collect(8))
            common = sorted(set(a) & set(b))
            assert len(common) >= 3
            for seq in common:
                assert a[seq] == b[seq]

    run_async(scenario())


def test_tcp_rejects_bad_version_then_closes():
    async def scenario():
        async with live_server() as (tcp_port, _):
            reader, writer = await asyncio.open_connection("127.0.0.1", tcp_port)
            await send(writer, Hello("old", "viewer", "einstall/0"))
            msg = await read_message(reader)
            assert isinstance(msg, ErrorMsg)
            assert msg.code == "bad_version"
            rest = await asyncio.wait_for(reader.read(), timeout=IO_TIMEOUT)
            assert rest == b""
            writer.close()

    run_async(scenario())


def test_tcp_first_message_must_be_hello():
    async def scenario():
        async with live_server() as (tcp_port, _):
            reader, writer = await asyncio.open_connection("127.0.0.1", tcp_port)
            await send(writer, Bye(seq=1))
            msg = await read_message(reader)
            assert isinstance(msg, ErrorMsg)
            assert msg.code == "malformed"
            assert "HELLO" in msg.detail
            writer.close()

    run_async(scenario())


def test_tcp_handshake_timeout():
    async def scenario():
        async with live_server(handshake_timeout=0.2) as (tcp_port, _):
            reader, writer = await asyncio.open_connection("127.0.0.1", tcp_port)
            msg = await read_message(reader)
            assert isinstance(msg, ErrorMsg)
            assert msg.code == "handshake_timeout"
            rest = await asyncio.wait_for(reader.read(), timeout=IO_TIMEOUT)
            assert rest == b""
            writer.close()

    run_async(scenario())


def test_tcp_malformed_line_keeps_session_open():
    async def scenario():
        async with live_server() as (tcp_port, _):
            reader, writer = await asyncio.open_connection("127.0.0.1", tcp_port)
            await send(writer, Hello("it", "tracked", PROTOCOL_VERSION))
            await read_message(reader)
            writer.write(b"{oops\n")
            await writer.drain()
            err = await read_until(reader, ErrorMsg)
            assert err.code == "malformed"
            await read_until(reader, Frame)
            writer.close()

    run_async(scenario())


def test_ws_session_and_city_selection(demo_capsule):
    async def scenario():
        async with live_server(scene_id="mc", capsule=demo_capsule) as (_, ws_port):
            async with websockets.connect(f"ws://127.0.0.1:{ws_port}/ws") as conn:
                await conn.send(encode_message(Hello("web", "viewer", PROTOCOL_VERSION)).decode("utf-8"))
                welcome = decode_message(await asyncio.wait_for(conn.recv(), IO_TIMEOUT))
                assert isinstance(welcome, Welcome)
                assert [o.city_id for o in welcome.menu_options] == ["seoul", "karlsruhe", "new_york"]

                await conn.send(encode_message(SelectCityMsg(seq=1, city_id="seoul")).decode("utf-8"))
                for _ in range(200):
                    msg = decode_message(await asyncio.wait_for(conn.recv(), IO_TIMEOUT))
                    if isinstance(msg, Frame) and msg.selected_city == "seoul":
                        assert all(s.media_id != "(blank)" for s in msg.surfaces)
                        break
                else:
                    raise AssertionError("city selection never reached the engine")
                await conn.send(encode_message(Bye(seq=2)).decode("utf-8"))

    run_async(scenario())


def test_ws_requires_ws_path():
    async def scenario():
        async with live_server() as (_, ws_port):
            async with websockets.connect(f"ws://127.0.0.1:{ws_port}/frames") as conn:
                with pytest.raises(ConnectionClosed) as err:
                    await asyncio.wait_for(conn.recv(), IO_TIMEOUT)
                assert err.value.rcvd is not None
                assert err.value.rcvd.code == 1008

    run_async(scenario())
