/** Canvas drawing for the top-down map view.
 *
 * Renders against a minimal 2D-context surface so the draw logic is testable
 * without a DOM: blocked cells, trajectory trail, the agent footprint (root
 * disc plus a crouch-scaled silhouette), per-part field arrows scaled by
 * their weighted magnitude, and goal markers.
 */

import { Camera, worldToPixel } from './camera.js';
import type { SceneInfo, StateFrame } from './protocol.js';
import type { ViewState } from './viewState.js';

export interface DrawSurface {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
}

const ARROW_SCALE_M = 0.4; // meters of arrow per unit of weighted magnitude
const MIN_ARROW_MAG = 1e-6;
const AGENT_ROOT_RADIUS_M = 0.12;
const SILHOUETTE_HALF_WIDTH_M = 0.25;
const STANDING_SILHOUETTE_M = 0.65; // drawn length of the standing silhouette

export function renderScene(ctx: DrawSurface, cam: Camera, scene: SceneInfo): void {
  ctx.clearRect(0, 0, cam.canvasW, cam.canvasH);
  ctx.fillStyle = '#fafafa';
  ctx.fillRect(0, 0, cam.canvasW, cam.canvasH);
  const res = scene.resolution;
  const cell = res * cam.scale + 1;
  ctx.fillStyle = '#37474f';
  for (let ix = 0; ix < scene.blocked.length; ix++) {
    const column = scene.blocked[ix];
    for (let iy = 0; iy < column.length; iy++) {
      if (!column[iy]) continue;
      const world = { x: scene.origin[0] + ix * res, y: scene.origin[1] + (iy + 1) * res };
      const p = worldToPixel(cam, world);
      ctx.fillRect(p.px, p.py, cell, cell);
    }
  }
}

function drawArrow(ctx: DrawSurface, cam: Camera, fromX: number, fromY: number, vx: number, vy: number): void {
  const from = worldToPixel(cam, { x: fromX, y: fromY });
  const to = worldToPixel(cam, { x: fromX + vx, y: fromY + vy });
  ctx.beginPath();
  ctx.moveTo(from.px, from.py);
  ctx.lineTo(to.px, to.py);
  ctx.stroke();
  const angle = Math.atan2(to.py - from.py, to.px - from.px);
  const headLen = Math.max(3, 0.05 * cam.scale);
  ctx.beginPath();
  ctx.moveTo(to.px, to.py);
  ctx.lineTo(to.px - headLen * Math.cos(angle - 0.4), to.py - headLen * Math.sin(angle - 0.4));
  ctx.moveTo(to.px, to.py);
  ctx.lineTo(to.px - headLen * Math.cos(angle + 0.4), to.py - headLen * Math.sin(angle + 0.4));
  ctx.stroke();
}

export interface RenderCounts {
  arrows: number;
  trailPoints: number;
}

export function renderFrame(ctx: DrawSurface, cam: Camera, view: ViewState): RenderCounts {
  const counts: RenderCounts = { arrows: 0, trailPoints: 0 };
  const frame = view.frame;
  if (view.scene) {
    renderScene(ctx, cam, view.scene);
  }
  if (!frame) {
    return counts;
  }

  // Trajectory trail.
  if (view.trail.length > 1) {
    ctx.strokeStyle = '#90caf9';
    ctx.lineWidth = 2;
    ctx.beginPath();
    const first = worldToPixel(cam, { x: view.trail[0][0], y: view.trail[0][1] });
    ctx.moveTo(first.px, first.py);
    for (let i = 1; i < view.trail.length; i++) {
      const p = worldToPixel(cam, { x: view.trail[i][0], y: view.trail[i][1] });
      ctx.lineTo(p.px, p.py);
      counts.trailPoints++;
    }
    ctx.stroke();
  }

  // Agent: root disc plus crouch-scaled silhouette along the travel axis.
  const [ax, ay] = frame.agent.xy;
  const root = worldToPixel(cam, { x: ax, y: ay });
  ctx.fillStyle = frame.status === 'collided' ? '#e53935' : '#1e88e5';
  ctx.beginPath();
  ctx.arc(root.px, root.py, AGENT_ROOT_RADIUS_M * cam.scale, 0, 2 * Math.PI);
  ctx.fill();
  const silhouette = silhouetteLength(frame.agent.height_scale);
  ctx.globalAlpha = 0.35;
  ctx.fillRect(
    root.px - SILHOUETTE_HALF_WIDTH_M * cam.scale,
    root.py - silhouette * cam.scale,
    2 * SILHOUETTE_HALF_WIDTH_M * cam.scale,
    silhouette * cam.scale,
  );
  ctx.globalAlpha = 1.0;

  // Per-part field arrows, scaled by the weighted magnitude.
  ctx.strokeStyle = '#ef6c00';
  ctx.lineWidth = 1.5;
  for (const part of frame.parts) {
    const mag = Math.hypot(part.f_h[0], part.f_h[1], part.f_h[2]);
    if (mag < MIN_ARROW_MAG) continue;
    drawArrow(
      ctx,
      cam,
      part.xyz[0],
      part.xyz[1],
      part.f_h[0] * ARROW_SCALE_M,
      part.f_h[1] * ARROW_SCALE_M,
    );
    counts.arrows++;
  }

  // Server goal (authoritative) and the local pending marker, if any.
  const goal = worldToPixel(cam, { x: frame.goal[0], y: frame.goal[1] });
  ctx.strokeStyle = '#2e7d32';
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(goal.px, goal.py, 0.1 * cam.scale, 0, 2 * Math.PI);
  ctx.stroke();
  if (view.pendingGoal) {
    const pending = worldToPixel(cam, { x: view.pendingGoal[0], y: view.pendingGoal[1] });
    ctx.strokeStyle = '#9e9e9e';
    ctx.beginPath();
    ctx.arc(pending.px, pending.py, 0.07 * cam.scale, 0, 2 * Math.PI);
    ctx.stroke();
  }
  return counts;
}

/** Drawn silhouette length: proportional to the crouch factor. */
export function silhouetteLength(heightScale: number): number {
  return STANDING_SILHOUETTE_M * heightScale;
}
