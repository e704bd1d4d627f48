/** Client-side session state: latest frame, trajectory trail, pending goal.
 *
 * The displayed goal always comes from server frames; a click only sets a
 * pending marker that an ack or rejection clears.  Frames with a stale tick
 * are dropped so the rendered tick never decreases.
 */

import type { AckFrame, SceneInfo, StateFrame } from './protocol.js';

export const TRAIL_CAP = 2000;

export interface ViewState {
  sessionId: string | null;
  scene: SceneInfo | null;
  frame: StateFrame | null;
  lastTick: number;
  trail: Array<[number, number]>;
  pendingGoal: [number, number] | null;
  banner: string | null;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    scene: null,
    frame: null,
    lastTick: -1,
    trail: [],
    pendingGoal: null,
    banner: null,
  };
}

export interface FrameResult {
  state: ViewState;
  dropped: boolean;
}

export function applyFrame(state: ViewState, frame: StateFrame): FrameResult {
  if (frame.tick <= state.lastTick) {
    return { state, dropped: true };
  }
  const trail = state.trail.length >= TRAIL_CAP ? state.trail.slice(1) : state.trail.slice();
  trail.push([frame.agent.xy[0], frame.agent.xy[1]]);
  return {
    state: { ...state, frame, lastTick: frame.tick, trail },
    dropped: false,
  };
}

export function applyAck(state: ViewState, _ack: AckFrame): ViewState {
  return { ...state, pendingGoal: null };
}

export function applyRejection(state: ViewState, reason: string): ViewState {
  return { ...state, pendingGoal: null, banner: `goal rejected: ${reason}` };
}

export function markPending(state: ViewState, x: number, y: number): ViewState {
  return { ...state, pendingGoal: [x, y], banner: null };
}

export function applyStreamError(state: ViewState, reason: string): ViewState {
  return { ...state, banner: `stream error: ${reason}` };
}
