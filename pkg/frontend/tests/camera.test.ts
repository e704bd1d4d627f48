import { describe, expect, it } from 'vitest';

import { makeCamera, panBy, pixelToWorld, worldToPixel, zoomAt } from '../src/camera.js';

const CELL = 0.05;

describe('camera transforms', () => {
  it('round-trips world points within half a cell at all zoom levels', () => {
    let cam = makeCamera(760, 760, 5, 5);
    for (let zoomStep = 0; zoomStep < 14; zoomStep++) {
      for (let i = 0; i < 50; i++) {
        const world = { x: (i % 10) * 0.49 + 0.05, y: Math.floor(i / 10) * 1.1 + 0.1 };
        const pixel = worldToPixel(cam, world);
        const back = pixelToWorld(cam, pixel);
        const err = Math.hypot(back.x - world.x, back.y - world.y);
        expect(err).toBeLessThan(CELL / 2);
      }
      cam = zoomAt(cam, zoomStep < 7 ? 1.5 : 1 / 1.5, { px: 380, py: 200 });
    }
  });

  it('keeps the cursor anchor fixed while zooming', () => {
    const cam = makeCamera(600, 600, 5, 5);
    const cursor = { px: 123, py: 456 };
    const before = pixelToWorld(cam, cursor);
    const after = pixelToWorld(zoomAt(cam, 2.0, cursor), cursor);
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
  });

  it('maps the same world point to the same command after pan and zoom', () => {
    let cam = makeCamera(760, 760, 5, 5);
    const world = { x: 2.0, y: 1.0 };
    const clickBefore = worldToPixel(cam, world);
    const commandBefore = pixelToWorld(cam, clickBefore);
    cam = panBy(cam, 87, -41);
    cam = zoomAt(cam, 1.7, { px: 300, py: 300 });
    const clickAfter = worldToPixel(cam, world);
    const commandAfter = pixelToWorld(cam, clickAfter);
    expect(commandAfter.x).toBeCloseTo(commandBefore.x, 9);
    expect(commandAfter.y).toBeCloseTo(commandBefore.y, 9);
  });

  it('pans in pixel units', () => {
    const cam = makeCamera(500, 500, 5, 5);
    const panned = panBy(cam, 100, 0);
    const origin = pixelToWorld(panned, { px: 100, py: 500 });
    expect(origin.x).toBeCloseTo(0, 9);
    expect(origin.y).toBeCloseTo(0, 9);
  });
});
