export type JobStatus = 'PENDING' | 'DONE' | 'ERROR';

export interface ResultPayload {
  counts?: Record<string, number>;
  frequencies?: Record<string, number>;
  backendName?: string;
  errorMessage?: string;
}

/** Job record as served by the gateway (wire shape). */
export interface JobRecord {
  processJobId: string;
  clientId: string;
  algorithmId: string;
  status: JobStatus;
  submittedAt: number;
  completedAt: number | null;
  resultPayload: ResultPayload | null;
}

export interface SessionInfo {
  clientId: string;
  outputTopic: string;
}

export interface JobInputs {
  emoticonA: string;
  emoticonB: string;
  backendType: string;
  shots: number;
}

export interface Bar {
  label: string;
  percent: number;
}

/** Row model rendered by the UI and cached in local storage. */
export interface UiJobView {
  processJobId: string;
  inputs: JobInputs;
  status: JobStatus;
  submittedAt: number;
  completedAt?: number;
  backendName?: string;
  bars?: Bar[];
  counts?: Record<string, number>;
  error?: string;
}

export type ConnectionState = 'connecting' | 'live' | 'polling';
