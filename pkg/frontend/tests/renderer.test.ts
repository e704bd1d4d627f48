import { describe, expect, it } from 'vitest';

import { makeCamera } from '../src/camera.js';
import type { StateFrame } from '../src/protocol.js';
import { DrawSurface, renderFrame, silhouetteLength } from '../src/renderer.js';
import { applyFrame, initialViewState } from '../src/viewState.js';

class FakeSurface implements DrawSurface {
  fillStyle = '';
  strokeStyle = '';
  lineWidth = 1;
  globalAlpha = 1;
  calls: string[] = [];
  rects: Array<{ x: number; y: number; w: number; h: number }> = [];
  fillRect(x: number, y: number, w: number, h: number): void {
    this.calls.push('fillRect');
    this.rects.push({ x, y, w, h });
  }
  clearRect(): void {
    this.calls.push('clearRect');
  }
  beginPath(): void {
    this.calls.push('beginPath');
  }
  moveTo(): void {}
  lineTo(): void {}
  arc(): void {
    this.calls.push('arc');
  }
  stroke(): void {
    this.calls.push('stroke');
  }
  fill(): void {
    this.calls.push('fill');
  }
}

function frame(partMag: number, heightScale = 1.0): StateFrame {
  const parts = Array.from({ length: 13 }, (_, k) => ({
    xyz: [1 + 0.01 * k, 2, 0.5] as [number, number, number],
    f_h: [partMag, 0, 0] as [number, number, number],
  }));
  return {
    type: 'state',
    proto: 1,
    tick: 1,
    t: 0.1,
    agent: { xy: [1, 2], height_scale: heightScale, lean: 0 },
    parts,
    goal: [3, 3, 0.7],
    status: 'traversing',
  };
}

describe('renderer', () => {
  it('draws no arrows when all weighted vectors are zero', () => {
    const cam = makeCamera(400, 400, 5, 5);
    const ctx = new FakeSurface();
    let view = initialViewState();
    view = applyFrame(view, frame(0.0)).state;
    const counts = renderFrame(ctx, cam, view);
    expect(counts.arrows).toBe(0);
  });

  it('draws one arrow per part with non-zero weighted vectors', () => {
    const cam = makeCamera(400, 400, 5, 5);
    const ctx = new FakeSurface();
    let view = initialViewState();
    view = applyFrame(view, frame(0.4)).state;
    const counts = renderFrame(ctx, cam, view);
    expect(counts.arrows).toBe(13);
  });

  it('scales the silhouette with the crouch factor', () => {
    expect(silhouetteLength(0.7)).toBeCloseTo(0.7 * silhouetteLength(1.0), 12);
    const cam = makeCamera(400, 400, 5, 5);
    const standing = new FakeSurface();
    renderFrame(standing, cam, applyFrame(initialViewState(), frame(0, 1.0)).state);
    const crouched = new FakeSurface();
    renderFrame(crouched, cam, applyFrame(initialViewState(), frame(0, 0.7)).state);
    const hStanding = standing.rects[standing.rects.length - 1].h;
    const hCrouched = crouched.rects[crouched.rects.length - 1].h;
    expect(hCrouched).toBeCloseTo(0.7 * hStanding, 9);
  });

  it('does not grow the trail for a stale frame', () => {
    const cam = makeCamera(400, 400, 5, 5);
    let view = initialViewState();
    view = applyFrame(view, frame(0)).state;
    const before = view.trail.length;
    const replay = applyFrame(view, frame(0));
    expect(replay.dropped).toBe(true);
    const ctx = new FakeSurface();
    renderFrame(ctx, cam, replay.state);
    expect(replay.state.trail.length).toBe(before);
  });
});
