/**
 * Keyboard sampling. Held arrow keys (or WASD) turn into one POSE_INPUT
 * delta per engine tick; the mapping itself is a pure function so it can be
 * tested without a DOM.
 */

export const STEP_DS = 0.05;
export const STEP_DTHETA = 0.1;

export interface MoveDelta {
  ds: number;
  dtheta: number;
}

/** Delta for the currently held keys, or null when idle. */
export function moveFromKeys(isDown: (key: string) => boolean): MoveDelta | null {
  const forward = isDown("ArrowUp") || isDown("w");
  const left = isDown("ArrowLeft") || isDown("a");
  const right = isDown("ArrowRight") || isDown("d");
  const ds = forward ? STEP_DS : 0;
  let dtheta = 0;
  if (left) dtheta += STEP_DTHETA;
  if (right) dtheta -= STEP_DTHETA;
  if (ds === 0 && dtheta === 0) return null;
  return { ds, dtheta };
}

export class KeyTracker {
  private keys = new Set<string>();

  press(key: string): void {
    this.keys.add(key.length === 1 ? key.toLowerCase() : key);
  }

  release(key: string): void {
    this.keys.delete(key.length === 1 ? key.toLowerCase() : key);
  }

  isDown = (key: string): boolean => this.keys.has(key);

  attach(target: Pick<Window, "addEventListener">): void {
    target.addEventListener("keydown", (e) => this.press((e as KeyboardEvent).key));
    target.addEventListener("keyup", (e) => this.release((e as KeyboardEvent).key));
  }
}
