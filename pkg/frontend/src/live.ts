import type { JobRecord } from './types.js';

/** The sliver of EventSource the channel uses (injectable for tests). */
export interface EventSourceLike {
  onmessage: ((event: { data: string }) => void) | null;
  onerror: ((event: unknown) => void) | null;
  onopen: ((event: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface LiveChannelHandlers {
  onRecord(record: JobRecord): void;
  onStateChange(connected: boolean): void;
}

/**
 * Push subscription to the gateway's stream endpoint with automatic
 * reconnects. While disconnected the app falls back to polling; this class
 * only reports connectivity, it does not poll itself.
 */
export class LiveChannel {
  private source: EventSourceLike | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private url: string,
    private factory: EventSourceFactory,
    private handlers: LiveChannelHandlers,
    private reconnectDelayMs = 1000,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.source?.close();
    this.source = null;
  }

  private connect(): void {
    if (this.stopped) return;
    this.source = this.factory(this.url);
    this.source.onopen = () => this.handlers.onStateChange(true);
    this.source.onmessage = (event) => {
      this.handlers.onStateChange(true);
      try {
        this.handlers.onRecord(JSON.parse(event.data) as JobRecord);
      } catch {
        // tolerate malformed frames; the poll fallback will converge
      }
    };
    this.source.onerror = () => {
      this.handlers.onStateChange(false);
      this.source?.close();
      this.source = null;
      if (!this.stopped && this.reconnectTimer === null) {
        this.reconnectTimer = setTimeout(() => {
          this.reconnectTimer = null;
          this.connect();
        }, this.reconnectDelayMs);
      }
    };
  }
}
