// Wire types and transport for the authd service. The client only speaks
// the documented JSON/stream schemas; see the service FORMATS.md.

import { Frame } from './frames.js';

export type GestureKind = 'tap' | 'circle' | 'random';

export interface EnrollResponse {
  user_id: string;
  kind: GestureKind;
  gesture_count: number;
  acceptance_quantile: number;
  threshold: number;
  k: number;
}

export interface InsufficientSamples {
  error: 'insufficient_samples';
  need_more: number;
  floor: number;
  got: number;
}

export interface SessionInfo {
  session_id: string;
  user_id: string;
  kind: GestureKind;
  vote_window: number;
}

export interface DecisionMessage {
  gesture_index: number;
  score: number;
  accept: boolean;
}

export interface AckMessage {
  ack: number;
  pending_frames: number;
}

export interface ErrorMessage {
  error: string;
}

export type ServerMessage = DecisionMessage | AckMessage | ErrorMessage;

export function isDecision(m: ServerMessage): m is DecisionMessage {
  return 'gesture_index' in m;
}

export function isAck(m: ServerMessage): m is AckMessage {
  return 'ack' in m;
}

export async function enroll(
  baseUrl: string, userId: string, kind: GestureKind, frames: Frame[],
): Promise<EnrollResponse> {
  const res = await fetch(`${baseUrl}/users/${encodeURIComponent(userId)}/enroll`, {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify({ kind, frames }),
  });
  const body = await res.json();
  if (!res.ok) {
    const detail = body.detail as InsufficientSamples | string;
    throw new EnrollError(detail);
  }
  return body as EnrollResponse;
}

export class EnrollError extends Error {
  readonly detail: InsufficientSamples | string;
  constructor(detail: InsufficientSamples | string) {
    super(typeof detail === 'string'
      ? detail
      : `need ${detail.need_more} more gestures (floor ${detail.floor})`);
    this.detail = detail;
  }
}

export async function openSession(
  baseUrl: string, userId: string, kind: GestureKind, voteWindow = 1,
): Promise<SessionInfo> {
  const res = await fetch(`${baseUrl}/sessions`, {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify({ user_id: userId, kind, vote_window: voteWindow }),
  });
  if (!res.ok) throw new Error(`open session failed: ${res.status}`);
  return (await res.json()) as SessionInfo;
}

/** Message-framed transport; injectable so tests can run a loopback server. */
export interface Transport {
  send(text: string): void;
  close(): void;
  onmessage: ((text: string) => void) | null;
  onclose: (() => void) | null;
}

export function webSocketTransport(url: string): Transport {
  const ws = new WebSocket(url);
  const t: Transport = {
    send: (text) => ws.send(text),
    close: () => ws.close(),
    onmessage: null,
    onclose: null,
  };
  ws.onmessage = (e) => t.onmessage?.(String(e.data));
  ws.onclose = () => t.onclose?.();
  return t;
}

/**
 * Outbound frame stream for one session: frames queue up and flush as one
 * chunk per tick (call flush() from a frame-rate timer). Decisions and acks
 * come back through the callbacks; nothing here ever fabricates a decision.
 */
export class FrameStream {
  onDecision: ((d: DecisionMessage) => void) | null = null;
  onAck: ((a: AckMessage) => void) | null = null;
  onError: ((e: ErrorMessage) => void) | null = null;
  onDrop: (() => void) | null = null;

  private queue: Frame[] = [];
  private sentFrames = 0;
  private open = true;

  constructor(private transport: Transport, private sessionId: string,
              private frameRate = 30) {
    transport.onmessage = (text) => this.dispatch(JSON.parse(text) as ServerMessage);
    transport.onclose = () => {
      this.open = false;
      this.onDrop?.();
    };
  }

  get isOpen(): boolean {
    return this.open;
  }

  enqueue(frames: Frame[]): void {
    this.queue.push(...frames);
  }

  /** Send everything queued as one chunk message. */
  flush(): number {
    if (!this.open || !this.queue.length) return 0;
    const frames = this.queue;
    this.queue = [];
    this.transport.send(JSON.stringify({
      session: this.sessionId,
      frames,
      t0: this.sentFrames / this.frameRate,
    }));
    this.sentFrames += frames.length;
    return frames.length;
  }

  close(): void {
    this.open = false;
    this.transport.close();
  }

  private dispatch(msg: ServerMessage): void {
    if (isDecision(msg)) this.onDecision?.(msg);
    else if (isAck(msg)) this.onAck?.(msg);
    else this.onError?.(msg);
  }
}
