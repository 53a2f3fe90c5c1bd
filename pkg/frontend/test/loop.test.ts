// Scripted end-to-end UI loop against a loopback server that speaks the
// documented wire schema: pointer events drive enrollment to completion,
// then live gestures receive accept/reject decisions. Every rendered
// decision must originate from a server message.

import { describe, expect, it } from 'vitest';

import { DEFAULT_CONFIG, DEFAULT_FINGER, Frame } from '../src/frames.js';
import { PointerEventLike, StrokeRecorder, resampleStroke, strokeToFrames } from '../src/capture.js';
import { DecisionMessage, FrameStream, Transport } from '../src/client.js';
import { SessionView } from '../src/view.js';

const ENROLL_FLOOR = 30;
const SEG_THRESHOLD = 5;

/** In-process stand-in for authd: segments chunks online and judges each
 * completed gesture by where its pressure centroid sits (left half of the
 * grid = enrolled user, right half = impostor). */
class LoopbackServer {
  sentDecisions = 0;
  private buffer: Frame[] = [];
  private gestureIndex = 0;

  constructor(private emit: (text: string) => void) {}

  receive(text: string): void {
    const msg = JSON.parse(text) as { session: string; frames: Frame[]; t0: number };
    this.buffer.push(...msg.frames);
    for (const ev of this.drainCompletedRuns()) {
      const decision: DecisionMessage = {
        gesture_index: this.gestureIndex++,
        score: -10,
        accept: this.centroidCol(ev) < DEFAULT_CONFIG.cols / 2,
      };
      this.sentDecisions++;
      this.emit(JSON.stringify(decision));
    }
    this.emit(JSON.stringify({ ack: msg.frames.length, pending_frames: this.buffer.length }));
  }

  private drainCompletedRuns(): Frame[][] {
    const touching = this.buffer.map((f) => Math.max(...f.flat()) > SEG_THRESHOLD);
    const events: Frame[][] = [];
    let consumed = 0;
    let i = 0;
    while (i < touching.length) {
      if (!touching[i]) { i++; continue; }
      let j = i;
      while (j + 1 < touching.length && touching[j + 1]) j++;
      if (touching.length - 1 - j < 2) break; // run may still be in progress
      if (j - i + 1 >= 2) events.push(this.buffer.slice(i, j + 1));
      consumed = j + 1;
      i = j + 1;
    }
    this.buffer = this.buffer.slice(consumed);
    return events;
  }

  private centroidCol(frames: Frame[]): number {
    let num = 0;
    let den = 0;
    for (const f of frames) {
      f.forEach((row) => row.forEach((v, j) => { num += v * j; den += v; }));
    }
    return den > 0 ? num / den : 0;
  }
}

function loopback(): { transport: Transport; server: LoopbackServer } {
  const transport: Transport = {
    send: (text) => server.receive(text),
    close: () => transport.onclose?.(),
    onmessage: null,
    onclose: null,
  };
  const server = new LoopbackServer((text) => transport.onmessage?.(text));
  return { transport, server };
}

/** Script one tap: down / hold / up at a canvas point, advancing the clock. */
function scriptTap(rec: StrokeRecorder, x: number, y: number, t0: number): PointerEventLike[] {
  return [
    { offsetX: x, offsetY: y, pressure: 0.5, timeStamp: t0 },
    { offsetX: x, offsetY: y, pressure: 0.5, timeStamp: t0 + 80 },
    { offsetX: x, offsetY: y, pressure: 0.5, timeStamp: t0 + 160 },
  ];
}

describe('UI loop', () => {
  it('enrollment completes and live gestures render server decisions only', () => {
    const view = new SessionView(ENROLL_FLOOR);
    const rec = new StrokeRecorder();
    const enrollFrames: Frame[] = [];
    let clock = 0;

    const drawTap = (x: number, y: number): Frame[] => {
      const [down, move, up] = scriptTap(rec, x, y, clock);
      clock += 400;
      rec.down(down);
      rec.move(move);
      const stroke = rec.up(up)!;
      const resampled = resampleStroke(stroke, 480, 480, DEFAULT_CONFIG);
      return strokeToFrames(resampled, DEFAULT_CONFIG, DEFAULT_FINGER);
    };

    // enrollment: 30 scripted taps on the left half
    while (view.render().needMore > 0) {
      enrollFrames.push(...drawTap(100, 240));
      view.recordEnrollmentStroke();
    }
    expect(view.render().progress).toBe(1);
    expect(enrollFrames.length).toBeGreaterThanOrEqual(ENROLL_FLOOR * 2);
    view.enrollmentComplete();
    expect(view.render().mode).toBe('authenticating');

    // live session over the loopback transport
    const { transport, server } = loopback();
    const stream = new FrameStream(transport, 'sess-1', DEFAULT_CONFIG.frameRate);
    stream.onDecision = (d) => view.applyServerDecision(d);

    // genuine taps (left), then impostor taps (right) with the toggle on
    for (let i = 0; i < 3; i++) {
      stream.enqueue(drawTap(100, 240));
      stream.flush();
    }
    view.toggleImpostorMode();
    for (let i = 0; i < 3; i++) {
      stream.enqueue(drawTap(420, 240));
      stream.flush();
    }

    const state = view.render();
    expect(state.recent.filter((a) => a).length).toBeGreaterThanOrEqual(1);
    expect(state.recent.filter((a) => !a).length).toBeGreaterThanOrEqual(1);
    // zero client-side decision synthesis: rendered == server-sent
    expect(view.decisionCount).toBe(server.sentDecisions);
    expect(server.sentDecisions).toBe(6);
  });

  it('a dropped stream is visible and nothing is fabricated meanwhile', () => {
    const view = new SessionView(1);
    view.recordEnrollmentStroke();
    view.enrollmentComplete();
    const { transport, server } = loopback();
    const stream = new FrameStream(transport, 'sess-2', DEFAULT_CONFIG.frameRate);
    stream.onDecision = (d) => view.applyServerDecision(d);
    stream.onDrop = () => view.connectionDropped();

    transport.close();
    expect(stream.isOpen).toBe(false);
    expect(view.render().canvasEnabled).toBe(false);
    stream.enqueue([Array.from({ length: 16 }, () => new Array(16).fill(0))]);
    expect(stream.flush()).toBe(0); // closed stream sends nothing
    expect(view.decisionCount).toBe(0);
    expect(server.sentDecisions).toBe(0);
  });
});
