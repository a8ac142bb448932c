/**
 * Session driver: owns the viewer state, talks to a line-oriented socket.
 * The socket is abstracted so tests can drive a full HELLO -> WELCOME ->
 * FRAME exchange without a network.
 */

import { decodeServerLine, encodeBye, encodeHello, encodePoseInput, encodeSelectCity } from "./protocol.js";
import { applyServer, initialState, markClosed, toggleCamera, type ViewerState } from "./state.js";

export interface LineSocket {
  send(line: string): void;
  close(): void;
}

export class ViewerSession {
  state: ViewerState = initialState();
  onChange: (state: ViewerState) => void = () => {};
  private seq = 0;

  constructor(
    private socket: LineSocket,
    private clientName = "web-viewer",
  ) {}

  private set(state: ViewerState): void {
    this.state = state;
    this.onChange(state);
  }

  /** Send the handshake; call once the socket is open. */
  hello(mode: "viewer" | "tracked" = "viewer"): void {
    this.socket.send(encodeHello(this.clientName, mode));
  }

  handleLine(line: string): void {
    if (line.trim() === "") return;
    this.set(applyServer(this.state, decodeServerLine(line)));
  }

  handleClose(): void {
    this.set(markClosed(this.state));
  }

  flipCamera(): void {
    this.set(toggleCamera(this.state));
  }

  sendMove(ds: number, dtheta: number): void {
    this.seq += 1;
    this.socket.send(encodePoseInput(this.seq, ds, dtheta));
  }

  selectCity(cityId: string): void {
    this.seq += 1;
    this.socket.send(encodeSelectCity(this.seq, cityId));
  }

  bye(): void {
    this.seq += 1;
    this.socket.send(encodeBye(this.seq));
    this.socket.close();
  }
}
