/** Live event subscription over SSE with resume-from-sequence.
 *
 * The server tags every event with an `id:` sequence number; on reconnect
 * we pass the last one seen as `?resume=` so nothing is missed.
 */

export interface StreamEvent {
  id: number;
  kind: string;
  payload: Record<string, unknown>;
}

export const EVENT_KINDS = ["pin", "relay", "notification", "fault"] as const;

interface EventSourceLike {
  addEventListener(type: string, handler: (ev: MessageEvent) => void): void;
  close(): void;
  onerror: ((ev: any) => void) | null;
  onopen: ((ev: any) => void) | null;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamOptions {
  onEvent: (event: StreamEvent) => void;
  onStatus?: (status: "connecting" | "open" | "closed") => void;
  factory?: EventSourceFactory;
  /** initial reconnect delay in ms; doubles up to 10 s */
  backoff?: number;
  resumeFrom?: number;
}

export class EventStream {
  private source: EventSourceLike | null = null;
  private lastId: number;
  private stopped = false;
  private delay: number;
  private readonly initialDelay: number;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private base: string, private options: StreamOptions) {
    this.lastId = options.resumeFrom ?? 0;
    this.initialDelay = options.backoff ?? 1000;
    this.delay = this.initialDelay;
  }

  get lastEventId(): number {
    return this.lastId;
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    if (this.source) this.source.close();
    this.options.onStatus?.("closed");
  }

  private connect(): void {
    const factory: EventSourceFactory =
      this.options.factory ?? ((url) => new EventSource(url));
    this.options.onStatus?.("connecting");
    const source = factory(`${this.base}/api/events?resume=${this.lastId}`);
    this.source = source;
    source.onopen = () => {
      this.delay = this.initialDelay;
      this.options.onStatus?.("open");
    };
    for (const kind of EVENT_KINDS) {
      source.addEventListener(kind, (message) => {
        const id = Number(message.lastEventId);
        if (Number.isFinite(id) && id > this.lastId) this.lastId = id;
        this.options.onEvent({
          id,
          kind,
          payload: JSON.parse(message.data as string),
        });
      });
    }
    source.onerror = () => {
      source.close();
      if (this.stopped) return;
      this.options.onStatus?.("connecting");
      this.timer = setTimeout(() => this.connect(), this.delay);
      this.delay = Math.min(this.delay * 2, 10_000);
    };
  }
}
