import { GatewayClient } from './api.js';
import { App } from './app.js';
import { JobCache, MemoryStore } from './cache.js';
import { DomView } from './dom.js';
import type { EventSourceLike } from './live.js';

function storage() {
  try {
    window.localStorage.setItem('qbridge.probe', '1');
    window.localStorage.removeItem('qbridge.probe');
    return window.localStorage;
  } catch {
    return new MemoryStore();
  }
}

function wrapEventSource(url: string): EventSourceLike {
  const source = new EventSource(url);
  const like: EventSourceLike = {
    onmessage: null,
    onerror: null,
    onopen: null,
    close: () => source.close(),
  };
  source.onmessage = (event) => like.onmessage?.({ data: String(event.data) });
  source.onerror = (event) => like.onerror?.(event);
  source.onopen = (event) => like.onopen?.(event);
  return like;
}

const app = new App({
  client: new GatewayClient(window.location.origin),
  view: new DomView(),
  cache: new JobCache(storage()),
  eventSourceFactory: wrapEventSource,
});

const form = document.getElementById('submit-form') as HTMLFormElement;
form.addEventListener('submit', (event) => {
  event.preventDefault();
  const value = (id: string) => (document.getElementById(id) as HTMLInputElement).value;
  void app.submit(
    value('emoticon-a'),
    value('emoticon-b'),
    (document.getElementById('backend-type') as HTMLSelectElement).value,
    Number(value('shots')),
  );
});

void app.start().catch((error) => {
  const box = document.getElementById('form-error') as HTMLDivElement;
  box.hidden = false;
  box.textContent = `could not reach the gateway: ${error}`;
});
