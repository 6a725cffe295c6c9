import type { JobRecord, SessionInfo } from './types.js';

export interface ResponseLike {
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<ResponseLike>;

export class GatewayError extends Error {
  constructor(message: string, readonly status: number, readonly processJobId?: string) {
    super(message);
  }
}

export interface SubmitRequest {
  clientId: string;
  algorithmId: string;
  params: Record<string, unknown>;
  backendType: string;
  shots: number;
}

/** Thin typed client over the gateway HTTP API. */
export class GatewayClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async createSession(): Promise<SessionInfo> {
    return (await this.post('/api/sessions', {})) as SessionInfo;
  }

  async submitJob(request: SubmitRequest): Promise<string> {
    const doc = (await this.post('/api/jobs', request)) as { processJobId: string };
    return doc.processJobId;
  }

  async getJob(clientId: string, processJobId: string): Promise<JobRecord> {
    const url =
      `${this.baseUrl}/api/jobs/${encodeURIComponent(processJobId)}` +
      `?clientId=${encodeURIComponent(clientId)}`;
    const response = await this.fetchFn(url);
    const doc = (await response.json()) as Record<string, unknown>;
    if (response.status !== 200) {
      throw new GatewayError(String(doc.error ?? `HTTP ${response.status}`), response.status);
    }
    return doc as unknown as JobRecord;
  }

  async listAlgorithms(): Promise<string[]> {
    const response = await this.fetchFn(`${this.baseUrl}/api/algorithms`);
    const doc = (await response.json()) as { algorithms?: string[] };
    if (response.status !== 200) {
      throw new GatewayError(`HTTP ${response.status}`, response.status);
    }
    return doc.algorithms ?? [];
  }

  streamUrl(clientId: string): string {
    return `${this.baseUrl}/api/stream?clientId=${encodeURIComponent(clientId)}`;
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    const doc = (await response.json()) as Record<string, unknown>;
    if (response.status !== 200) {
      throw new GatewayError(
        String(doc.error ?? `HTTP ${response.status}`),
        response.status,
        typeof doc.processJobId === 'string' ? doc.processJobId : undefined,
      );
    }
    return doc;
  }
}
