/**
 * Browser entry point: connects to the engine, pumps server lines into the
 * session, samples the keyboard once per engine tick, and repaints on
 * animation frames. All layout lives in index.html.
 */

import { KeyTracker, moveFromKeys } from "./input.js";
import { mediaPanelLines, menuModel, renderInset, renderTopDown, statusLine } from "./render.js";
import { ViewerSession } from "./session.js";

function canvasCtx(id: string): { canvas: HTMLCanvasElement; ctx: CanvasRenderingContext2D } {
  const canvas = document.getElementById(id) as HTMLCanvasElement | null;
  if (canvas === null) throw new Error(`missing canvas #${id}`);
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("2d context unavailable");
  return { canvas, ctx };
}

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const host = params.get("host") ?? window.location.hostname ?? "localhost";
  return `ws://${host || "localhost"}:7778/ws`;
}

const map = canvasCtx("map");
const inset = canvasCtx("inset");
const mediaEl = document.getElementById("media") as HTMLElement;
const menuEl = document.getElementById("menu") as HTMLElement;
const statusEl = document.getElementById("status") as HTMLElement;

const ws = new WebSocket(serverUrl());
const session = new ViewerSession({
  send: (line) => ws.send(line),
  close: () => ws.close(),
});

const keys = new KeyTracker();
keys.attach(window);
window.addEventListener("keydown", (e) => {
  if (e.key === "c" && !e.repeat) session.flipCamera();
});
window.addEventListener("beforeunload", () => {
  if (ws.readyState === WebSocket.OPEN) session.bye();
});

let inputTimer: ReturnType<typeof setInterval> | null = null;

function ensureInputTimer(tickRate: number): void {
  if (inputTimer !== null) return;
  inputTimer = setInterval(() => {
    const move = moveFromKeys(keys.isDown);
    if (move !== null && ws.readyState === WebSocket.OPEN) {
      session.sendMove(move.ds, move.dtheta);
    }
  }, 1000 / tickRate);
}

ws.addEventListener("open", () => session.hello("viewer"));
ws.addEventListener("message", (event) => {
  for (const line of String(event.data).split("\n")) {
    if (line.trim() === "") continue;
    try {
      session.handleLine(line);
    } catch (err) {
      console.error(err);
    }
  }
  if (session.state.welcome !== null) ensureInputTimer(session.state.welcome.tick_rate);
});
ws.addEventListener("close", () => {
  session.handleClose();
  if (inputTimer !== null) clearInterval(inputTimer);
});

function repaintPanels(): void {
  const { welcome, frame } = session.state;
  mediaEl.textContent = mediaPanelLines(frame).join("\n");
  statusEl.textContent = statusLine(session.state);

  menuEl.replaceChildren();
  for (const entry of menuModel(welcome, frame)) {
    const button = document.createElement("button");
    button.textContent = entry.selected ? `[${entry.label}]` : entry.label;
    button.className = entry.selected ? "city selected" : "city";
    button.addEventListener("click", () => session.selectCity(entry.cityId));
    menuEl.appendChild(button);
  }
}

let panelsDirty = true;
session.onChange = () => {
  panelsDirty = true;
};

function frameLoop(): void {
  renderTopDown(map.ctx, map.canvas.width, map.canvas.height, session.state);
  renderInset(inset.ctx, inset.canvas.width, inset.canvas.height, session.state);
  if (panelsDirty) {
    repaintPanels();
    panelsDirty = false;
  }
  requestAnimationFrame(frameLoop);
}

requestAnimationFrame(frameLoop);
