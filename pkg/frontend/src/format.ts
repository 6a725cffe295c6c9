import type { Bar, JobRecord, UiJobView } from './types.js';

/** Percentage bars from relative frequencies, largest first. */
export function toBars(frequencies: Record<string, number>): Bar[] {
  return Object.entries(frequencies)
    .map(([label, share]) => ({ label, percent: share * 100 }))
    .sort((a, b) => b.percent - a.percent || a.label.localeCompare(b.label));
}

/** Frequencies derived from raw counts when the gateway sent none. */
export function countsToFrequencies(counts: Record<string, number>): Record<string, number> {
  const total = Object.values(counts).reduce((sum, v) => sum + v, 0);
  const frequencies: Record<string, number> = {};
  if (total <= 0) return frequencies;
  for (const [key, value] of Object.entries(counts)) {
    frequencies[key] = value / total;
  }
  return frequencies;
}

/** DONE rows must account for (almost) every shot. */
export function barsSumOk(bars: Bar[], tolerancePercent = 0.1): boolean {
  const sum = bars.reduce((acc, bar) => acc + bar.percent, 0);
  return Math.abs(sum - 100) <= tolerancePercent;
}

export function formatPercent(percent: number): string {
  return `${percent.toFixed(1)}%`;
}

/** Merge a finalized gateway record into the locally cached row. */
export function applyRecord(view: UiJobView, record: JobRecord): UiJobView {
  const updated: UiJobView = { ...view, status: record.status };
  if (record.completedAt) {
    updated.completedAt = record.completedAt;
  }
  const payload = record.resultPayload ?? {};
  updated.backendName = payload.backendName ?? view.backendName;
  if (record.status === 'DONE') {
    const frequencies = payload.frequencies ?? countsToFrequencies(payload.counts ?? {});
    updated.bars = toBars(frequencies);
    updated.counts = payload.counts;
    updated.error = undefined;
  } else if (record.status === 'ERROR') {
    updated.error = payload.errorMessage ?? 'unknown error';
  }
  return updated;
}
