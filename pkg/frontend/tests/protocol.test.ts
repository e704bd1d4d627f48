import { describe, expect, it } from 'vitest';

import { parseMessage, parseSceneInfo } from '../src/protocol.js';

const GOOD_STATE = {
  type: 'state',
  proto: 1,
  tick: 3,
  t: 0.3,
  agent: { xy: [1, 2], height_scale: 1.0, lean: 0.0 },
  parts: [{ xyz: [1, 2, 0.7], f_h: [0.1, 0, 0] }],
  goal: [3, 3, 0.7],
  status: 'traversing',
};

describe('protocol guards', () => {
  it('accepts well-formed frames', () => {
    const frame = parseMessage(JSON.stringify(GOOD_STATE));
    expect(frame.type).toBe('state');
    const ack = parseMessage(JSON.stringify({ type: 'ack', proto: 1, tick: 2, goal: [1, 1, 0.7] }));
    expect(ack.type).toBe('ack');
    const error = parseMessage(JSON.stringify({ type: 'error', proto: 1, reason: 'x' }));
    expect(error.type).toBe('error');
  });

  it('rejects protocol version drift loudly', () => {
    expect(() => parseMessage(JSON.stringify({ ...GOOD_STATE, proto: 2 }))).toThrow(/protocol mismatch/);
  });

  it('rejects malformed frames', () => {
    expect(() => parseMessage('not json')).toThrow(/not JSON/);
    const missingAgent: any = { ...GOOD_STATE };
    delete missingAgent.agent;
    expect(() => parseMessage(JSON.stringify(missingAgent))).toThrow(/unrecognized/);
    const badParts = { ...GOOD_STATE, parts: [{ xyz: [1, 2], f_h: [0, 0, 0] }] };
    expect(() => parseMessage(JSON.stringify(badParts))).toThrow(/unrecognized/);
  });

  it('guards scene info', () => {
    expect(() => parseSceneInfo({ proto: 1, resolution: 'x' })).toThrow(/malformed/);
    const ok = parseSceneInfo({
      proto: 1,
      resolution: 0.05,
      origin: [0, 0, 0],
      dims: [100, 100, 44],
      blocked: [[0, 1]],
    });
    expect(ok.resolution).toBe(0.05);
  });
});
