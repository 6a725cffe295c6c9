import { describe, expect, it } from 'vitest';

import { JobCache, MemoryStore } from '../src/cache.js';
import type { UiJobView } from '../src/types.js';

function view(id: string, submittedAt: number): UiJobView {
  return {
    processJobId: id,
    inputs: { emoticonA: ';)', emoticonB: ';(', backendType: 'NOISELESS_SIM', shots: 64 },
    status: 'PENDING',
    submittedAt,
  };
}

describe('JobCache', () => {
  it('round-trips a job view by id', () => {
    const cache = new JobCache(new MemoryStore());
    cache.save(view('a', 1));
    expect(cache.load('a')?.processJobId).toBe('a');
    expect(cache.load('missing')).toBeNull();
  });

  it('lists everything in submission order', () => {
    const cache = new JobCache(new MemoryStore());
    cache.save(view('late', 200));
    cache.save(view('early', 100));
    expect(cache.all().map((v) => v.processJobId)).toEqual(['early', 'late']);
  });

  it('updates in place without duplicating the index', () => {
    const cache = new JobCache(new MemoryStore());
    cache.save(view('a', 1));
    cache.save({ ...view('a', 1), status: 'DONE' });
    expect(cache.all()).toHaveLength(1);
    expect(cache.load('a')?.status).toBe('DONE');
  });

  it('survives corrupted entries', () => {
    const store = new MemoryStore();
    const cache = new JobCache(store);
    cache.save(view('ok', 1));
    store.setItem('qbridge.job.ok', '{broken json');
    expect(cache.load('ok')).toBeNull();
    expect(cache.all()).toEqual([]);
  });

  it('clear removes rows and the index', () => {
    const cache = new JobCache(new MemoryStore());
    cache.save(view('a', 1));
    cache.save(view('b', 2));
    cache.clear();
    expect(cache.all()).toEqual([]);
    expect(cache.load('a')).toBeNull();
  });
});
