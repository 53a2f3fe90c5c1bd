// Session view model: everything the demo page shows, derived purely from
// local input progress plus parsed server messages. Accept/reject state has
// exactly one entry point (applyServerDecision), so no decision can be
// synthesized client-side.

import { DecisionMessage } from './client.js';

export type Mode = 'enrolling' | 'authenticating';
export type Connection = 'connected' | 'reconnecting' | 'disconnected';

export interface ViewState {
  mode: Mode;
  canvasEnabled: boolean;
  connection: Connection;
  /** enrollment progress in [0, 1] */
  progress: number;
  needMore: number;
  /** rolling per-gesture results, newest last */
  recent: boolean[];
  acceptanceRate: number | null;
  impostorMode: boolean;
  statusLine: string;
}

export const ENROLL_TARGET = 30;

export class SessionView {
  private mode: Mode = 'enrolling';
  private connection: Connection = 'connected';
  private enrolled = 0;
  private target: number;
  private decisions: DecisionMessage[] = [];
  private rollingWindow: number;
  impostorMode = false;

  constructor(target = ENROLL_TARGET, rollingWindow = 20) {
    this.target = target;
    this.rollingWindow = rollingWindow;
  }

  /** A stroke was drawn and shipped during enrollment. */
  recordEnrollmentStroke(): void {
    if (this.mode === 'enrolling') this.enrolled += 1;
  }

  enrollmentComplete(): void {
    this.mode = 'authenticating';
  }

  /** Sole entry point for accept/reject state: a parsed server message. */
  applyServerDecision(d: DecisionMessage): void {
    this.decisions.push(d);
  }

  connectionDropped(): void {
    this.connection = 'reconnecting';
  }

  connectionRestored(): void {
    this.connection = 'connected';
  }

  connectionClosed(): void {
    this.connection = 'disconnected';
  }

  toggleImpostorMode(): void {
    this.impostorMode = !this.impostorMode;
  }

  get decisionCount(): number {
    return this.decisions.length;
  }

  render(): ViewState {
    const recent = this.decisions.slice(-this.rollingWindow).map((d) => d.accept);
    const rate = recent.length
      ? recent.filter(Boolean).length / recent.length
      : null;
    const progress = Math.min(this.enrolled / this.target, 1);
    const needMore = Math.max(this.target - this.enrolled, 0);
    let statusLine: string;
    if (this.connection !== 'connected') {
      statusLine = 'connection lost — reconnecting';
    } else if (this.mode === 'enrolling') {
      statusLine = `enrolling: need ${needMore} more gestures`;
    } else {
      statusLine = rate === null
        ? 'draw a gesture to authenticate'
        : `acceptance ${(rate * 100).toFixed(0)}%`;
    }
    return {
      mode: this.mode,
      canvasEnabled: this.connection === 'connected',
      connection: this.connection,
      progress,
      needMore,
      recent,
      acceptanceRate: rate,
      impostorMode: this.impostorMode,
      statusLine,
    };
  }
}
