/**
 * Canvas renderers and panel models.
 *
 * Everything here is a pure function of the viewer state: same WELCOME,
 * FRAME and camera mode always produce the same draw calls. Rendering targets
 * a small slice of CanvasRenderingContext2D so tests can pass a recording
 * stub instead of a real canvas.
 */

import type { Frame, Welcome } from "./protocol.js";
import type { ViewerState } from "./state.js";

export type Draw2D = Pick<
  CanvasRenderingContext2D,
  | "save"
  | "restore"
  | "clearRect"
  | "fillRect"
  | "strokeRect"
  | "beginPath"
  | "arc"
  | "moveTo"
  | "lineTo"
  | "closePath"
  | "stroke"
  | "fill"
  | "fillText"
> & {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  globalAlpha: number;
};

// Layout constants, in world metres. The wire protocol carries no scene
// geometry, so the map places surfaces and speakers on deterministic rings
// derived from the WELCOME lists alone.
export const SURFACE_RING_RADIUS = 3.0;
export const SPEAKER_RING_RADIUS = 3.8;
export const HALO_METERS = 1.0;
const WORLD_HALF_SPAN = 4.9;

// Default physical workspace extents, display only; the engine reports poses,
// not bounds, over the wire.
export const WORKSPACE_HALF_X = 1.25;
export const WORKSPACE_HALF_Y = 1.0;

const SPEAKER_COLORS = ["#e4c35a", "#6fb7e8", "#c57fe0", "#7fe0a3", "#e07f7f"];

export interface Viewport {
  width: number;
  height: number;
  scale: number;
  cx: number;
  cy: number;
}

export function makeViewport(width: number, height: number, state: ViewerState): Viewport {
  let cx = 0;
  let cy = 0;
  if (state.camera === "follow" && state.frame !== null) {
    const [x, y] = state.frame.user_virtual_pose.position;
    cx = x;
    cy = y;
  }
  const scale = Math.min(width, height) / (2 * WORLD_HALF_SPAN);
  return { width, height, scale, cx, cy };
}

/** World coords (metres, +y up) to screen pixels (+y down). */
export function worldToScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.width / 2 + (x - vp.cx) * vp.scale, vp.height / 2 - (y - vp.cy) * vp.scale];
}

export function ringPositions(count: number, radius: number): [number, number][] {
  const out: [number, number][] = [];
  for (let i = 0; i < count; i++) {
    const angle = (2 * Math.PI * i) / Math.max(count, 1) + Math.PI / 2;
    out.push([radius * Math.cos(angle), radius * Math.sin(angle)]);
  }
  return out;
}

/** Halo radius in metres is linear in gain: gain 0.5 draws at half scale. */
export function haloRadius(gain: number): number {
  return gain * HALO_METERS;
}

function drawPoseMarker(ctx: Draw2D, vp: Viewport, x: number, y: number, yaw: number, color: string): void {
  const size = 0.22;
  const tip = worldToScreen(vp, x + size * Math.cos(yaw), y + size * Math.sin(yaw));
  const left = worldToScreen(vp, x + size * 0.6 * Math.cos(yaw + 2.5), y + size * 0.6 * Math.sin(yaw + 2.5));
  const right = worldToScreen(vp, x + size * 0.6 * Math.cos(yaw - 2.5), y + size * 0.6 * Math.sin(yaw - 2.5));
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.moveTo(tip[0], tip[1]);
  ctx.lineTo(left[0], left[1]);
  ctx.lineTo(right[0], right[1]);
  ctx.closePath();
  ctx.fill();
}

function drawTrail(ctx: Draw2D, vp: Viewport, trail: [number, number][], color: string): void {
  if (trail.length < 2) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1;
  ctx.globalAlpha = 0.6;
  ctx.beginPath();
  const [sx, sy] = worldToScreen(vp, trail[0][0], trail[0][1]);
  ctx.moveTo(sx, sy);
  for (let i = 1; i < trail.length; i++) {
    const [x, y] = worldToScreen(vp, trail[i][0], trail[i][1]);
    ctx.lineTo(x, y);
  }
  ctx.stroke();
  ctx.globalAlpha = 1;
}

/** Top-down map of the virtual scene: nodes, speaker halos, user pose, trail. */
export function renderTopDown(ctx: Draw2D, width: number, height: number, state: ViewerState): void {
  ctx.fillStyle = "#101418";
  ctx.clearRect(0, 0, width, height);
  ctx.fillRect(0, 0, width, height);
  ctx.font = "12px monospace";
  ctx.textAlign = "left";

  if (state.welcome === null) {
    ctx.fillStyle = "#8894a0";
    ctx.fillText(state.status === "closed" ? "disconnected" : "waiting for WELCOME...", 12, 20);
    return;
  }

  const vp = makeViewport(width, height, state);
  const welcome = state.welcome;
  const frame = state.frame;

  // Speaker halos first so nodes draw on top. Halo radius scales linearly
  // with the server-reported gain.
  const speakerSpots = ringPositions(welcome.speakers.length, SPEAKER_RING_RADIUS);
  welcome.speakers.forEach((speakerId, i) => {
    const [x, y] = speakerSpots[i];
    const [sx, sy] = worldToScreen(vp, x, y);
    const color = SPEAKER_COLORS[i % SPEAKER_COLORS.length];
    const gain = frame === null ? 0 : frame.speaker_gains[speakerId] ?? 0;
    if (gain > 0) {
      ctx.globalAlpha = 0.25;
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(sx, sy, haloRadius(gain) * vp.scale, 0, 2 * Math.PI);
      ctx.fill();
      ctx.globalAlpha = 1;
    }
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(sx, sy, 4, 0, 2 * Math.PI);
    ctx.fill();
  });

  // Scene nodes on a ring; brighter outline while showing non-blank media.
  const activeMedia = new Set<string>();
  if (frame !== null) {
    for (const s of frame.surfaces) {
      if (s.media_id !== "(blank)") activeMedia.add(s.surface_id);
    }
  }
  const nodeSpots = ringPositions(welcome.surfaces.length, SURFACE_RING_RADIUS);
  const labelNodes = welcome.surfaces.length <= 8;
  welcome.surfaces.forEach((surfaceId, i) => {
    const [x, y] = nodeSpots[i];
    const [sx, sy] = worldToScreen(vp, x, y);
    const half = 0.11 * vp.scale;
    ctx.fillStyle = activeMedia.has(surfaceId) ? "#d8e6f2" : "#3c4854";
    ctx.fillRect(sx - half, sy - half, 2 * half, 2 * half);
    if (labelNodes) {
      ctx.fillStyle = "#8894a0";
      ctx.fillText(surfaceId, sx + half + 3, sy + 4);
    }
  });

  drawTrail(ctx, vp, state.virtTrail, "#5a8bb0");
  if (frame !== null) {
    const [ux, uy] = frame.user_virtual_pose.position;
    drawPoseMarker(ctx, vp, ux, uy, frame.user_virtual_pose.yaw, "#f0f4f8");
  }

  // Channel legend, one line per speaker.
  welcome.speakers.forEach((speakerId, i) => {
    const y = 20 + 16 * i;
    ctx.fillStyle = SPEAKER_COLORS[i % SPEAKER_COLORS.length];
    ctx.fillRect(12, y - 9, 10, 10);
    ctx.fillStyle = "#c8d2dc";
    const gain = frame === null ? 0 : frame.speaker_gains[speakerId] ?? 0;
    ctx.fillText(`${speakerId} gain=${gain.toFixed(3)}`, 28, y);
  });
}

/** Physical workspace inset: bounds, trail, pose, heading offset readout. */
export function renderInset(ctx: Draw2D, width: number, height: number, state: ViewerState): void {
  ctx.fillStyle = "#161a1e";
  ctx.clearRect(0, 0, width, height);
  ctx.fillRect(0, 0, width, height);
  ctx.font = "11px monospace";
  ctx.textAlign = "left";
  ctx.fillStyle = "#8894a0";
  ctx.fillText("physical workspace", 8, 14);

  const scale = Math.min(width / (2 * WORKSPACE_HALF_X), height / (2 * WORKSPACE_HALF_Y)) * 0.8;
  const vp: Viewport = { width, height, scale, cx: 0, cy: 0 };

  const [left, top] = worldToScreen(vp, -WORKSPACE_HALF_X, WORKSPACE_HALF_Y);
  ctx.strokeStyle = "#4a5662";
  ctx.lineWidth = 1;
  ctx.strokeRect(left, top, 2 * WORKSPACE_HALF_X * vp.scale, 2 * WORKSPACE_HALF_Y * vp.scale);

  drawTrail(ctx, vp, state.physTrail, "#b0885a");
  const frame = state.frame;
  if (frame !== null) {
    const [px, py] = frame.mapping.phys_pose.position;
    drawPoseMarker(ctx, vp, px, py, frame.mapping.phys_pose.yaw, "#f0c060");
    ctx.fillStyle = "#8894a0";
    ctx.fillText(`heading offset ${frame.mapping.heading_offset.toFixed(3)} rad`, 8, height - 8);
  }
}

/** One text line per surface for the media panel. */
export function mediaPanelLines(frame: Frame | null): string[] {
  if (frame === null) return ["no frame yet"];
  return frame.surfaces.map((s) => `${s.surface_id}  ${s.media_id} #${s.frame_index}`);
}

export interface MenuEntry {
  cityId: string;
  label: string;
  selected: boolean;
}

/** City menu entries; empty for scenes without a menu widget. */
export function menuModel(welcome: Welcome | null, frame: Frame | null): MenuEntry[] {
  if (welcome === null) return [];
  const selected = frame === null ? null : frame.selected_city;
  return welcome.menu_options.map((opt) => ({
    cityId: opt.city_id,
    label: opt.label,
    selected: opt.city_id === selected,
  }));
}

export function statusLine(state: ViewerState): string {
  const base = `${state.status}  camera=${state.camera}`;
  if (state.frame === null) return base;
  const f = state.frame;
  return `${base}  seq=${f.seq}  t=${f.time.toFixed(3)}s`;
}
