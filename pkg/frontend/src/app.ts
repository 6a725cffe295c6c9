import { GatewayClient, GatewayError } from './api.js';
import { JobCache } from './cache.js';
import { applyRecord, barsSumOk } from './format.js';
import { EventSourceFactory, LiveChannel } from './live.js';
import type { ConnectionState, JobRecord, SessionInfo, UiJobView } from './types.js';
import { validateEmoticon, validateShots } from './validate.js';

export interface AppView {
  showConfirmation(message: string): void;
  showFormError(message: string): void;
  clearFormError(): void;
  setFormLocked(locked: boolean): void;
  renderJobs(views: UiJobView[]): void;
  setAlgorithms(ids: string[]): void;
  setConnection(state: ConnectionState): void;
}

export interface AppOptions {
  client: GatewayClient;
  view: AppView;
  cache: JobCache;
  eventSourceFactory: EventSourceFactory;
  pollIntervalMs?: number;
  now?: () => number;
}

const ALGORITHM_ID = 'smile_super_position';

/**
 * Page controller: one session per page load, one live channel, rows keyed
 * by process job id. While the channel is down, pending rows are polled so
 * results still converge, and every incoming record is checked against the
 * session's client id before it is displayed.
 */
export class App {
  readonly jobs = new Map<string, UiJobView>();
  session: SessionInfo | null = null;

  private channel: LiveChannel | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private channelUp = false;
  private pollIntervalMs: number;
  private now: () => number;

  constructor(private options: AppOptions) {
    this.pollIntervalMs = options.pollIntervalMs ?? 1000;
    this.now = options.now ?? (() => Date.now());
  }

  async start(): Promise<void> {
    const { client, view, cache } = this.options;
    view.setConnection('connecting');
    for (const cached of cache.all()) {
      this.jobs.set(cached.processJobId, cached);
    }
    this.render();

    this.session = await client.createSession();
    try {
      view.setAlgorithms(await client.listAlgorithms());
    } catch {
      view.setAlgorithms([ALGORITHM_ID]);
    }

    this.channel = new LiveChannel(
      client.streamUrl(this.session.clientId),
      this.options.eventSourceFactory,
      {
        onRecord: (record) => this.handleRecord(record),
        onStateChange: (connected) => this.handleChannelState(connected),
      },
    );
    this.channel.start();
    this.ensurePolling();
  }

  stop(): void {
    this.channel?.stop();
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async submit(emoticonA: string, emoticonB: string, backendType: string, shots: number): Promise<void> {
    const { view, client, cache } = this.options;
    view.clearFormError();
    for (const [label, value] of [['first emoticon', emoticonA], ['second emoticon', emoticonB]] as const) {
      const problem = validateEmoticon(value);
      if (problem) {
        view.showFormError(`${label}: ${problem}`);
        return;
      }
    }
    const shotsProblem = validateShots(shots);
    if (shotsProblem) {
      view.showFormError(shotsProblem);
      return;
    }
    if (!this.session) {
      view.showFormError('no session yet; still connecting');
      return;
    }

    view.setFormLocked(true);
    const inputs = { emoticonA, emoticonB, backendType, shots };
    try {
      const processJobId = await client.submitJob({
        clientId: this.session.clientId,
        algorithmId: ALGORITHM_ID,
        params: { emoticonA, emoticonB },
        backendType,
        shots,
      });
      const pending: UiJobView = {
        processJobId,
        inputs,
        status: 'PENDING',
        submittedAt: this.now(),
      };
      this.jobs.set(processJobId, pending);
      cache.save(pending);
      view.showConfirmation(`job ${processJobId} submitted`);
      this.render();
      this.ensurePolling();
    } catch (error) {
      if (error instanceof GatewayError && error.processJobId) {
        const failed: UiJobView = {
          processJobId: error.processJobId,
          inputs,
          status: 'ERROR',
          submittedAt: this.now(),
          error: error.message,
        };
        this.jobs.set(failed.processJobId, failed);
        cache.save(failed);
        this.render();
      } else {
        view.showFormError(error instanceof Error ? error.message : String(error));
      }
      this.unlockIfIdle();
    }
  }

  /** Rows currently displayed, oldest first. */
  rows(): UiJobView[] {
    return [...this.jobs.values()].sort((a, b) => a.submittedAt - b.submittedAt);
  }

  hasPending(): boolean {
    return this.rows().some((row) => row.status === 'PENDING');
  }

  private handleRecord(record: JobRecord): void {
    if (!this.session || record.clientId !== this.session.clientId) {
      console.warn('dropping record for foreign client', record.clientId);
      return;
    }
    const existing = this.jobs.get(record.processJobId);
    if (!existing || existing.status !== 'PENDING') {
      return; // unknown or already final: nothing to update
    }
    const updated = applyRecord(existing, record);
    if (updated.status === 'DONE' && updated.bars && !barsSumOk(updated.bars)) {
      console.warn('percentages do not sum to 100%', updated.bars);
    }
    this.jobs.set(updated.processJobId, updated);
    this.options.cache.save(updated);
    this.render();
    this.unlockIfIdle();
  }

  private handleChannelState(connected: boolean): void {
    this.channelUp = connected;
    this.options.view.setConnection(connected ? 'live' : 'polling');
    this.ensurePolling();
  }

  private ensurePolling(): void {
    if (this.pollTimer !== null) return;
    this.pollTimer = setInterval(() => {
      void this.pollPending();
    }, this.pollIntervalMs);
  }

  private async pollPending(): Promise<void> {
    if (!this.session || this.channelUp) return; // live channel covers us
    const pending = this.rows().filter((row) => row.status === 'PENDING');
    for (const row of pending) {
      try {
        const record = await this.options.client.getJob(this.session.clientId, row.processJobId);
        if (record.status !== 'PENDING') {
          this.handleRecord(record);
        }
      } catch {
        // gateway briefly unreachable; the next tick retries
      }
    }
  }

  private unlockIfIdle(): void {
    if (!this.hasPending()) {
      this.options.view.setFormLocked(false);
    }
  }

  private render(): void {
    this.options.view.renderJobs(this.rows());
  }
}
