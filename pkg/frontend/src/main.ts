// Browser entry: canvas capture wired to the authd service. Covered by the
// build only; the logic it composes is exercised in the tests.

import { DEFAULT_CONFIG, DEFAULT_FINGER, Frame } from './frames.js';
import { PointerEventLike, StrokeRecorder, resampleStroke, strokeToFrames } from './capture.js';
import { FrameStream, enroll, openSession, webSocketTransport, EnrollError } from './client.js';
import { ENROLL_TARGET, SessionView } from './view.js';

const BASE_URL = (window as any).TOUCHGUARD_URL ?? 'http://127.0.0.1:8787';

function wsUrl(sessionId: string): string {
  return `${BASE_URL.replace(/^http/, 'ws')}/sessions/${sessionId}/frames`;
}

function asLike(e: PointerEvent): PointerEventLike {
  return { offsetX: e.offsetX, offsetY: e.offsetY, pressure: e.pressure, timeStamp: e.timeStamp };
}

async function start() {
  const canvas = document.getElementById('pad') as HTMLCanvasElement;
  const status = document.getElementById('status') as HTMLElement;
  const progress = document.getElementById('progress') as HTMLProgressElement;
  const userInput = document.getElementById('user') as HTMLInputElement;
  const impostorToggle = document.getElementById('impostor') as HTMLInputElement;
  const ctx = canvas.getContext('2d')!;

  const recorder = new StrokeRecorder();
  const view = new SessionView(ENROLL_TARGET);
  const enrollFrames: Frame[] = [];
  let stream: FrameStream | null = null;

  const paint = () => {
    const s = view.render();
    status.textContent = s.statusLine + (s.impostorMode ? ' [impostor mode]' : '');
    progress.value = s.progress;
    canvas.style.opacity = s.canvasEnabled ? '1' : '0.4';
    canvas.style.pointerEvents = s.canvasEnabled ? 'auto' : 'none';
  };

  impostorToggle.onchange = () => {
    view.toggleImpostorMode();
    paint();
  };

  const shipStroke = async (frames: Frame[]) => {
    if (view.render().mode === 'enrolling') {
      enrollFrames.push(...frames);
      view.recordEnrollmentStroke();
      if (view.render().needMore === 0) {
        try {
          await enroll(BASE_URL, userInput.value || 'demo', 'tap', enrollFrames);
          view.enrollmentComplete();
          const session = await openSession(BASE_URL, userInput.value || 'demo', 'tap');
          stream = new FrameStream(webSocketTransport(wsUrl(session.session_id)),
                                   session.session_id, DEFAULT_CONFIG.frameRate);
          stream.onDecision = (d) => {
            view.applyServerDecision(d);
            paint();
          };
          stream.onDrop = () => {
            view.connectionDropped();
            paint();
          };
        } catch (e) {
          status.textContent = e instanceof EnrollError ? e.message : String(e);
        }
      }
    } else if (stream) {
      stream.enqueue(frames);
    }
    paint();
  };

  canvas.addEventListener('pointerdown', (e) => recorder.down(asLike(e)));
  canvas.addEventListener('pointermove', (e) => {
    recorder.move(asLike(e));
    ctx.fillStyle = '#68c';
    ctx.fillRect(e.offsetX - 2, e.offsetY - 2, 4, 4);
  });
  const finish = (e: PointerEvent) => {
    const stroke = recorder.up(asLike(e));
    if (!stroke) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const resampled = resampleStroke(stroke, canvas.width, canvas.height, DEFAULT_CONFIG);
    void shipStroke(strokeToFrames(resampled, DEFAULT_CONFIG, DEFAULT_FINGER));
  };
  canvas.addEventListener('pointerup', finish);
  canvas.addEventListener('pointerleave', finish);

  // flush queued frames at sensor rate
  setInterval(() => stream?.flush(), 1000 / DEFAULT_CONFIG.frameRate);
  paint();
}

window.addEventListener('DOMContentLoaded', () => void start());
