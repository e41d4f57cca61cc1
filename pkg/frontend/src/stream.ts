// Server-sent events subscription with exponential backoff.

import { backoffMs } from './viewmodel.js';

export type StreamHandler = (event: string, data: unknown) => void;
export type StateHandler = (connected: boolean) => void;

export function openStream(
  base: string,
  onEvent: StreamHandler,
  onState: StateHandler,
  eventNames: string[] = ['notification', 'vehicle', 'chat'],
): () => void {
  let source: EventSource | null = null;
  let attempt = 0;
  let closed = false;

  const connect = () => {
    if (closed) return;
    source = new EventSource(`${base}/api/stream`);
    source.onopen = () => {
      attempt = 0;
      onState(true);
    };
    for (const name of eventNames) {
      source.addEventListener(name, (ev) => {
        try {
          onEvent(name, JSON.parse((ev as MessageEvent).data));
        } catch {
          // malformed stream data: skip the event, keep the stream
        }
      });
    }
    source.onerror = () => {
      source?.close();
      onState(false);
      attempt += 1;
      setTimeout(connect, backoffMs(attempt));
    };
  };

  connect();
  return () => {
    closed = true;
    source?.close();
  };
}
