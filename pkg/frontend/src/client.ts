/** HTTP and stream wiring to the teleop server.
 *
 * The WebSocket constructor and fetch are injectable so the same client
 * drives both the browser and the node test harness.  Goal commands retry
 * with backoff on network failure and surface a banner after three misses.
 */

import { parseMessage, parseSceneInfo, SceneInfo, StreamMessage } from './protocol.js';

export interface SocketLike {
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((err: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;
export type FetchLike = (url: string, init?: any) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<any>;
}>;

export interface TeleopClientOptions {
  baseUrl: string;
  fetchImpl?: FetchLike;
  socketFactory?: SocketFactory;
  retryDelayMs?: number;
}

export interface GoalResult {
  accepted: boolean;
  goal?: [number, number, number];
  reason?: string;
}

const GOAL_ATTEMPTS = 3;

export class TeleopClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;
  private readonly socketFactory: SocketFactory;
  private readonly retryDelayMs: number;
  private socket: SocketLike | null = null;
  sessionId: string | null = null;

  constructor(options: TeleopClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, '');
    this.fetchImpl = options.fetchImpl ?? (globalThis.fetch as unknown as FetchLike);
    this.socketFactory =
      options.socketFactory ??
      ((url: string) => new (globalThis as any).WebSocket(url) as SocketLike);
    this.retryDelayMs = options.retryDelayMs ?? 250;
  }

  async startSession(payload: object = {}): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/session`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (!response.ok) {
      const body = await response.json().catch(() => ({}));
      throw new Error(`session rejected (${response.status}): ${body?.detail ?? ''}`);
    }
    const body = await response.json();
    this.sessionId = body.id as string;
    return this.sessionId;
  }

  async fetchScene(): Promise<SceneInfo> {
    const response = await this.fetchImpl(`${this.baseUrl}/session/${this.sessionId}/scene`);
    if (!response.ok) {
      throw new Error(`scene fetch failed: ${response.status}`);
    }
    return parseSceneInfo(await response.json());
  }

  /** Open the stream; messages are parsed and schema-checked before dispatch. */
  openStream(
    onMessage: (message: StreamMessage) => void,
    onFatal: (reason: string) => void,
  ): void {
    const wsUrl = `${this.baseUrl.replace(/^http/, 'ws')}/session/${this.sessionId}/stream`;
    const socket = this.socketFactory(wsUrl);
    this.socket = socket;
    socket.onmessage = (event) => {
      try {
        onMessage(parseMessage(String(event.data)));
      } catch (err) {
        socket.close();
        onFatal(err instanceof Error ? err.message : String(err));
      }
    };
    socket.onerror = () => onFatal('stream socket error');
    socket.onclose = () => undefined;
  }

  closeStream(): void {
    this.socket?.close();
    this.socket = null;
  }

  /** Send a clicked goal in meters; retries transport failures with backoff. */
  async sendGoal(x: number, y: number): Promise<GoalResult> {
    let lastError = '';
    for (let attempt = 0; attempt < GOAL_ATTEMPTS; attempt++) {
      try {
        const response = await this.fetchImpl(
          `${this.baseUrl}/session/${this.sessionId}/goal`,
          {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify({ x, y }),
          },
        );
        const body = await response.json().catch(() => ({}));
        if (response.ok) {
          return { accepted: true, goal: body.goal };
        }
        return { accepted: false, reason: String(body?.detail ?? response.status) };
      } catch (err) {
        lastError = err instanceof Error ? err.message : String(err);
        await new Promise((resolve) => setTimeout(resolve, this.retryDelayMs * (attempt + 1)));
      }
    }
    return { accepted: false, reason: `network failure: ${lastError}` };
  }
}
