/**
 * Viewer-side session state.
 *
 * The state is a plain value updated by pure reducers. All physics lives on
 * the server: the viewer never integrates poses locally, it just keeps the
 * latest WELCOME and FRAME plus short trails of server-reported positions.
 */

import type { ErrorMsg, Frame, ServerMessage, Welcome } from "./protocol.js";

export type CameraMode = "top_down" | "follow";
export type Status = "connecting" | "live" | "closed";

export interface ViewerState {
  status: Status;
  welcome: Welcome | null;
  frame: Frame | null;
  errors: ErrorMsg[];
  /** Virtual-world positions from recent frames, oldest first. */
  virtTrail: [number, number][];
  /** Physical workspace positions from recent frames, oldest first. */
  physTrail: [number, number][];
  camera: CameraMode;
}

// Trail lengths are bounded so a long visit cannot grow memory forever.
export const TRAIL_LIMIT = 900;
export const ERROR_LIMIT = 50;

export function initialState(): ViewerState {
  return {
    status: "connecting",
    welcome: null,
    frame: null,
    errors: [],
    virtTrail: [],
    physTrail: [],
    camera: "top_down",
  };
}

function pushCapped<T>(items: T[], item: T, limit: number): T[] {
  const next = items.concat([item]);
  return next.length > limit ? next.slice(next.length - limit) : next;
}

export function applyServer(state: ViewerState, msg: ServerMessage): ViewerState {
  switch (msg.type) {
    case "WELCOME":
      return {
        ...state,
        status: "live",
        welcome: msg,
        frame: null,
        errors: [],
        virtTrail: [],
        physTrail: [],
      };
    case "FRAME": {
      const [vx, vy] = msg.user_virtual_pose.position;
      const [px, py] = msg.mapping.phys_pose.position;
      return {
        ...state,
        frame: msg,
        virtTrail: pushCapped(state.virtTrail, [vx, vy], TRAIL_LIMIT),
        physTrail: pushCapped(state.physTrail, [px, py], TRAIL_LIMIT),
      };
    }
    case "ERROR":
      return { ...state, errors: pushCapped(state.errors, msg, ERROR_LIMIT) };
  }
}

export function toggleCamera(state: ViewerState): ViewerState {
  return { ...state, camera: state.camera === "top_down" ? "follow" : "top_down" };
}

export function markClosed(state: ViewerState): ViewerState {
  return { ...state, status: "closed" };
}
