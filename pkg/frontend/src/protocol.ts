/**
 * Wire codec for the einstall/1 session protocol.
 *
 * Every message is one JSON object on one LF-terminated line, "type" first,
 * remaining fields in the documented order. Encoders here emit byte-identical
 * lines to the Python engine for the same values, which is what the codec
 * tests pin down.
 */

export const PROTOCOL_VERSION = "einstall/1";

export interface PoseWire {
  position: [number, number, number];
  yaw: number;
}

export interface CityOption {
  city_id: string;
  label: string;
}

export interface Welcome {
  type: "WELCOME";
  scene_id: string;
  title: string;
  tick_rate: number;
  surfaces: string[];
  speakers: string[];
  menu_options: CityOption[];
}

export interface SurfaceState {
  surface_id: string;
  media_id: string;
  frame_index: number;
}

export interface FrameMapping {
  phys_pose: PoseWire;
  heading_offset: number;
}

export interface Frame {
  type: "FRAME";
  seq: number;
  t_ticks: number;
  time: number;
  user_virtual_pose: PoseWire;
  mapping: FrameMapping;
  surfaces: SurfaceState[];
  speaker_gains: Record<string, number>;
  selected_city: string | null;
}

export interface ErrorMsg {
  type: "ERROR";
  code: string;
  detail: string;
}

export type ServerMessage = Welcome | Frame | ErrorMsg;

export function encodeHello(clientName: string, mode: "viewer" | "tracked"): string {
  return JSON.stringify({ type: "HELLO", client_name: clientName, mode, protocol: PROTOCOL_VERSION }) + "\n";
}

export function encodePoseInput(seq: number, ds: number, dtheta: number): string {
  return JSON.stringify({ type: "POSE_INPUT", seq, move: { ds, dtheta } }) + "\n";
}

export function encodeSelectCity(seq: number, cityId: string): string {
  return JSON.stringify({ type: "SELECT_CITY", seq, city_id: cityId }) + "\n";
}

export function encodeBye(seq: number): string {
  return JSON.stringify({ type: "BYE", seq }) + "\n";
}

function fail(detail: string): never {
  throw new Error(`bad server line: ${detail}`);
}

function checkKeys(obj: Record<string, unknown>, keys: string[]): void {
  for (const key of keys) {
    if (!(key in obj)) fail(`missing field ${key}`);
  }
}

/** Parse one server line; throws on anything that is not WELCOME/FRAME/ERROR. */
export function decodeServerLine(line: string): ServerMessage {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    fail(`not JSON: ${line.slice(0, 80)}`);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    fail("payload must be a JSON object");
  }
  const obj = parsed as Record<string, unknown>;
  switch (obj.type) {
    case "WELCOME":
      checkKeys(obj, ["scene_id", "title", "tick_rate", "surfaces", "speakers", "menu_options"]);
      return obj as unknown as Welcome;
    case "FRAME":
      checkKeys(obj, [
        "seq",
        "t_ticks",
        "time",
        "user_virtual_pose",
        "mapping",
        "surfaces",
        "speaker_gains",
        "selected_city",
      ]);
      return obj as unknown as Frame;
    case "ERROR":
      checkKeys(obj, ["code", "detail"]);
      return obj as unknown as ErrorMsg;
    default:
      fail(`unexpected type ${JSON.stringify(obj.type)}`);
  }
}
