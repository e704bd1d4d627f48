/** Wire types for the teleop server (proto 1) plus schema guards.
 *
 * Schema drift must fail loudly: every inbound message passes through a
 * guard, and a mismatch pauses the stream with a visible error instead of
 * rendering garbage.
 */

export const PROTO_VERSION = 1;

export type SessionStatus = 'idle' | 'traversing' | 'reached' | 'collided';

export interface PartFrame {
  xyz: [number, number, number];
  f_h: [number, number, number];
}

export interface StateFrame {
  type: 'state';
  proto: number;
  tick: number;
  t: number;
  agent: { xy: [number, number]; height_scale: number; lean: number };
  parts: PartFrame[];
  goal: [number, number, number];
  status: SessionStatus;
}

export interface AckFrame {
  type: 'ack';
  proto: number;
  tick: number;
  goal: [number, number, number];
}

export interface ErrorFrame {
  type: 'error';
  proto: number;
  reason: string;
}

export type StreamMessage = StateFrame | AckFrame | ErrorFrame;

export interface SceneInfo {
  proto: number;
  resolution: number;
  origin: [number, number, number];
  dims: [number, number, number];
  blocked: number[][];
}

function isVec(value: unknown, n: number): boolean {
  return Array.isArray(value) && value.length === n && value.every((x) => typeof x === 'number');
}

export function parseMessage(raw: string): StreamMessage {
  let data: any;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new Error('stream message is not JSON');
  }
  if (data?.proto !== PROTO_VERSION) {
    throw new Error(`protocol mismatch: expected ${PROTO_VERSION}, got ${data?.proto}`);
  }
  if (data.type === 'ack' && typeof data.tick === 'number' && isVec(data.goal, 3)) {
    return data as AckFrame;
  }
  if (data.type === 'error' && typeof data.reason === 'string') {
    return data as ErrorFrame;
  }
  if (
    data.type === 'state' &&
    typeof data.tick === 'number' &&
    typeof data.t === 'number' &&
    data.agent &&
    isVec(data.agent.xy, 2) &&
    typeof data.agent.height_scale === 'number' &&
    typeof data.agent.lean === 'number' &&
    Array.isArray(data.parts) &&
    data.parts.every((p: any) => isVec(p?.xyz, 3) && isVec(p?.f_h, 3)) &&
    isVec(data.goal, 3) &&
    typeof data.status === 'string'
  ) {
    return data as StateFrame;
  }
  throw new Error(`unrecognized stream message: ${String(data.type)}`);
}

export function parseSceneInfo(data: any): SceneInfo {
  if (data?.proto !== PROTO_VERSION) {
    throw new Error(`protocol mismatch on /scene: ${data?.proto}`);
  }
  if (
    typeof data.resolution !== 'number' ||
    !isVec(data.origin, 3) ||
    !isVec(data.dims, 3) ||
    !Array.isArray(data.blocked)
  ) {
    throw new Error('malformed scene info');
  }
  return data as SceneInfo;
}
