/** Live round-trip against the real teleop server (acceptance criterion 12):
 * connect, receive >= 10 state frames at 10 +/- 2 Hz, send a click-to-goal,
 * observe the ack and a subsequent frame carrying the snapped goal, and keep
 * the pixel/world round-trip under half a grid cell.
 */

import { spawn, ChildProcess } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import WebSocket from 'ws';

import { makeCamera, pixelToWorld, worldToPixel } from '../src/camera.js';
import { TeleopClient } from '../src/client.js';
import type { SocketLike } from '../src/client.js';
import type { StateFrame, StreamMessage } from '../src/protocol.js';

const PORT = 8741;
const BASE = `http://127.0.0.1:${PORT}`;

const ROOM_MANIFEST = {
  scene_schema: 1,
  seed: 0,
  difficulty: 0.0,
  room: [5.0, 5.0, 2.2],
  resolution: 0.05,
  boxes: [],
  perlin: { amplitude: 0.05, cell_size: 0.4, octaves: 2 },
  morph_radius_vox: 0,
  start: [1.025, 2.525, 0.725],
  goal: [3.025, 2.525, 0.725],
};

function wsFactory(url: string): SocketLike {
  const socket = new WebSocket(url);
  const like: SocketLike = {
    onmessage: null,
    onclose: null,
    onerror: null,
    close: () => socket.close(),
  };
  socket.on('message', (data) => like.onmessage?.({ data: data.toString() }));
  socket.on('close', () => like.onclose?.());
  socket.on('error', (err) => like.onerror?.(err));
  return like;
}

let server: ChildProcess | null = null;

async function waitForServer(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(BASE + '/');
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error('teleop server did not come up in time');
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), 'fieldnav-ui-'));
  const scenePath = join(dir, 'room.json');
  writeFileSync(scenePath, JSON.stringify(ROOM_MANIFEST));
  server = spawn(
    'python3',
    ['-m', 'fieldnav.cli', 'serve', '--scene', scenePath, '--port', String(PORT)],
    { stdio: 'ignore' },
  );
  await waitForServer(45_000);
}, 60_000);

afterAll(() => {
  server?.kill('SIGTERM');
});

describe('live server round-trip', () => {
  it(
    'streams at 10 Hz and executes a click-to-goal command',
    async () => {
      const client = new TeleopClient({ baseUrl: BASE, socketFactory: wsFactory });
      await client.startSession({});
      const scene = await client.fetchScene();
      expect(scene.dims[0]).toBe(100);

      const stateArrivals: number[] = [];
      const messages: StreamMessage[] = [];
      let fatal: string | null = null;
      client.openStream(
        (message) => {
          messages.push(message);
          if (message.type === 'state') stateArrivals.push(Date.now());
        },
        (reason) => {
          fatal = reason;
        },
      );

      // Criterion: at least 10 frames at 10 +/- 2 Hz.  Skip the on-connect
      // snapshot (index 0): cadence is a property of the tick loop.
      while (stateArrivals.length < 13) {
        await new Promise((resolve) => setTimeout(resolve, 50));
        expect(fatal).toBeNull();
      }
      const loopArrivals = stateArrivals.slice(1);
      const intervals = loopArrivals.slice(1).map((t, i) => t - loopArrivals[i]);
      expect(intervals.length).toBeGreaterThanOrEqual(10);
      const mean = intervals.reduce((a, b) => a + b, 0) / intervals.length;
      const hz = 1000 / mean;
      expect(hz).toBeGreaterThanOrEqual(8.0);
      expect(hz).toBeLessThanOrEqual(12.0);

      // Click through the camera transform; round-trip under half a cell.
      const cam = makeCamera(760, 760, 5, 5);
      const clickWorld = { x: 3.5, y: 3.5 };
      const pixel = worldToPixel(cam, clickWorld);
      const roundTrip = pixelToWorld(cam, pixel);
      expect(Math.hypot(roundTrip.x - clickWorld.x, roundTrip.y - clickWorld.y)).toBeLessThan(0.025);

      const before = messages.length;
      const result = await client.sendGoal(roundTrip.x, roundTrip.y);
      expect(result.accepted).toBe(true);
      const snapped = result.goal!;
      expect(Math.abs(snapped[0] - clickWorld.x)).toBeLessThanOrEqual(0.05);
      expect(Math.abs(snapped[1] - clickWorld.y)).toBeLessThanOrEqual(0.05);

      // The ack must arrive, then a state frame whose goal equals the snap.
      const deadline = Date.now() + 5000;
      let ackIndex = -1;
      let goalFrameIndex = -1;
      while (Date.now() < deadline && goalFrameIndex < 0) {
        await new Promise((resolve) => setTimeout(resolve, 50));
        for (let i = before; i < messages.length; i++) {
          const message = messages[i];
          if (message.type === 'ack' && ackIndex < 0) {
            expect(message.goal).toEqual(snapped);
            ackIndex = i;
          }
          if (
            message.type === 'state' &&
            message.goal[0] === snapped[0] &&
            message.goal[1] === snapped[1]
          ) {
            goalFrameIndex = i;
            break;
          }
        }
      }
      expect(ackIndex).toBeGreaterThanOrEqual(0);
      expect(goalFrameIndex).toBeGreaterThan(ackIndex);

      // And the agent actually starts traversing toward it.
      const lastState = [...messages].reverse().find((m) => m.type === 'state') as StateFrame;
      expect(['traversing', 'reached']).toContain(lastState.status);
      client.closeStream();
    },
    30_000,
  );
});
