/** Browser entry point: canvas, input handling, and the stream loop. */

import { makeCamera, panBy, pixelToWorld, zoomAt, Camera } from './camera.js';
import { TeleopClient } from './client.js';
import { renderFrame } from './renderer.js';
import {
  applyAck,
  applyFrame,
  applyRejection,
  applyStreamError,
  initialViewState,
  markPending,
  ViewState,
} from './viewState.js';

function banner(text: string | null): void {
  const el = document.getElementById('banner') as HTMLDivElement;
  el.textContent = text ?? '';
  el.style.display = text ? 'block' : 'none';
}

async function start(): Promise<void> {
  const canvas = document.getElementById('map') as HTMLCanvasElement;
  const ctx = canvas.getContext('2d')!;
  const client = new TeleopClient({ baseUrl: window.location.origin });
  let view: ViewState = initialViewState();
  let cam: Camera = makeCamera(canvas.width, canvas.height, 5, 5);
  let paused = false;

  const redraw = () => renderFrame(ctx as any, cam, view);

  await client.startSession({});
  view = { ...view, sessionId: client.sessionId };
  view = { ...view, scene: await client.fetchScene() };
  const room = view.scene!;
  cam = makeCamera(
    canvas.width,
    canvas.height,
    room.dims[0] * room.resolution,
    room.dims[1] * room.resolution,
  );

  client.openStream(
    (message) => {
      if (paused) return;
      if (message.type === 'state') {
        const applied = applyFrame(view, message);
        if (!applied.dropped) {
          view = applied.state;
          redraw();
        }
      } else if (message.type === 'ack') {
        view = applyAck(view, message);
        banner(null);
      } else {
        view = applyStreamError(view, message.reason);
        banner(view.banner);
        paused = true;
      }
    },
    (reason) => {
      view = applyStreamError(view, reason);
      banner(view.banner);
      paused = true;
    },
  );

  // Click to set a goal; drag to pan; wheel to zoom.
  let dragFrom: { x: number; y: number } | null = null;
  let dragged = false;
  canvas.addEventListener('mousedown', (e) => {
    dragFrom = { x: e.offsetX, y: e.offsetY };
    dragged = false;
  });
  canvas.addEventListener('mousemove', (e) => {
    if (!dragFrom) return;
    const dx = e.offsetX - dragFrom.x;
    const dy = e.offsetY - dragFrom.y;
    if (Math.abs(dx) + Math.abs(dy) > 3) {
      dragged = true;
      cam = panBy(cam, dx, dy);
      dragFrom = { x: e.offsetX, y: e.offsetY };
      redraw();
    }
  });
  canvas.addEventListener('mouseup', async (e) => {
    const wasDrag = dragged;
    dragFrom = null;
    if (wasDrag) return;
    const world = pixelToWorld(cam, { px: e.offsetX, py: e.offsetY });
    view = markPending(view, world.x, world.y);
    redraw();
    const result = await client.sendGoal(world.x, world.y);
    if (!result.accepted) {
      view = applyRejection(view, result.reason ?? 'unknown');
      banner(view.banner);
      redraw();
    }
  });
  canvas.addEventListener('wheel', (e) => {
    e.preventDefault();
    cam = zoomAt(cam, e.deltaY < 0 ? 1.15 : 1 / 1.15, { px: e.offsetX, py: e.offsetY });
    redraw();
  });
}

start().catch((err) => banner(`failed to start: ${err}`));
