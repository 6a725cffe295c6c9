import type { UiJobView } from './types.js';

/** The subset of the Storage interface the cache needs (injectable). */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const INDEX_KEY = 'qbridge.jobs.index';
const JOB_PREFIX = 'qbridge.job.';

/**
 * Browser-cache persistence for job rows, keyed by process job id, so a
 * reload within a session still shows earlier submissions and results.
 */
export class JobCache {
  constructor(private store: KeyValueStore) {}

  save(view: UiJobView): void {
    this.store.setItem(JOB_PREFIX + view.processJobId, JSON.stringify(view));
    const index = this.index();
    if (!index.includes(view.processJobId)) {
      index.push(view.processJobId);
      this.store.setItem(INDEX_KEY, JSON.stringify(index));
    }
  }

  load(processJobId: string): UiJobView | null {
    const raw = this.store.getItem(JOB_PREFIX + processJobId);
    if (!raw) return null;
    try {
      return JSON.parse(raw) as UiJobView;
    } catch {
      return null;
    }
  }

  all(): UiJobView[] {
    const views: UiJobView[] = [];
    for (const id of this.index()) {
      const view = this.load(id);
      if (view) views.push(view);
    }
    return views.sort((a, b) => a.submittedAt - b.submittedAt);
  }

  clear(): void {
    for (const id of this.index()) {
      this.store.removeItem(JOB_PREFIX + id);
    }
    this.store.removeItem(INDEX_KEY);
  }

  private index(): string[] {
    const raw = this.store.getItem(INDEX_KEY);
    if (!raw) return [];
    try {
      const parsed = JSON.parse(raw);
      return Array.isArray(parsed) ? parsed.filter((v) => typeof v === 'string') : [];
    } catch {
      return [];
    }
  }
}

/** In-memory store for tests and for browsers with storage disabled. */
export class MemoryStore implements KeyValueStore {
  private data = new Map<string, string>();

  getItem(key: string): string | null {
    return this.data.has(key) ? (this.data.get(key) as string) : null;
  }

  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }

  removeItem(key: string): void {
    this.data.delete(key);
  }
}
