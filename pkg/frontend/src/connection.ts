// Websocket wrapper: hello handshake, reconnect with backoff, and a guard
// that refuses to send anything outside the client->server protocol set.

import {
  ClientMessage,
  HelloMessage,
  ServerMessage,
  isClientMessage,
  parseServerMessage,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "reconnecting" | "error";

export interface ConnectionCallbacks {
  onHello?: (hello: HelloMessage) => void;
  onMessage?: (msg: ServerMessage) => void;
  onStatus?: (status: ConnectionStatus, detail?: string) => void;
}

type SocketFactory = (url: string) => WebSocket;

export class Connection {
  private ws: WebSocket | null = null;
  private closed = false;
  private retryMs = 500;
  hello: HelloMessage | null = null;

  constructor(
    private url: string,
    private callbacks: ConnectionCallbacks = {},
    private makeSocket: SocketFactory = (u) => new WebSocket(u),
  ) {}

  open(): void {
    this.closed = false;
    this.connect("connecting");
  }

  private connect(status: ConnectionStatus): void {
    this.callbacks.onStatus?.(status);
    let ws: WebSocket;
    try {
      ws = this.makeSocket(this.url);
    } catch (e) {
      this.callbacks.onStatus?.("error", String(e));
      this.scheduleRetry();
      return;
    }
    this.ws = ws;
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (!msg) return;
      if (msg.type === "hello") {
        this.hello = msg;
        this.retryMs = 500;
        this.callbacks.onStatus?.("connected");
        this.callbacks.onHello?.(msg);
        return;
      }
      this.callbacks.onMessage?.(msg);
    };
    ws.onclose = () => {
      this.hello = null;
      if (!this.closed) this.scheduleRetry();
    };
    ws.onerror = () => {
      this.callbacks.onStatus?.("error", "socket error");
    };
  }

  private scheduleRetry(): void {
    this.callbacks.onStatus?.("reconnecting");
    const delay = this.retryMs;
    this.retryMs = Math.min(this.retryMs * 2, 5000);
    setTimeout(() => {
      if (!this.closed) this.connect("reconnecting");
    }, delay);
  }

  send(msg: ClientMessage): boolean {
    if (!isClientMessage(msg)) {
      // never let a malformed message reach the wire
      this.callbacks.onStatus?.("error", `blocked invalid message ${JSON.stringify(msg)}`);
      return false;
    }
    if (!this.ws || this.ws.readyState !== 1 /* OPEN */ || !this.hello) {
      return false;
    }
    this.ws.send(JSON.stringify(msg));
    return true;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
