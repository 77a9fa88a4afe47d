import type {
  FeedResponse,
  HealthResponse,
  MessageResponse,
  SessionView,
} from './types.js';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    let detail = `HTTP ${res.status}`;
    try {
      const body = await res.json();
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

function post<T>(url: string, body?: unknown): Promise<T> {
  return request<T>(url, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: body === undefined ? '{}' : JSON.stringify(body),
  });
}

export function makeClient(baseUrl = '') {
  return {
    health(): Promise<HealthResponse> {
      return request(`${baseUrl}/healthz`);
    },
    createSession(corpusHash?: string): Promise<SessionView> {
      return post(`${baseUrl}/api/sessions`,
        corpusHash ? { corpus_hash: corpusHash } : undefined);
    },
    getSession(sessionId: string): Promise<SessionView> {
      return request(`${baseUrl}/api/sessions/${encodeURIComponent(sessionId)}`);
    },
    sendMessage(sessionId: string, message: string): Promise<MessageResponse> {
      return post(`${baseUrl}/api/sessions/${encodeURIComponent(sessionId)}/messages`,
        { message });
    },
    abandonSession(sessionId: string): Promise<SessionView> {
      return post(`${baseUrl}/api/sessions/${encodeURIComponent(sessionId)}/abandon`);
    },
    getFeed(sessionId: string): Promise<FeedResponse> {
      return request(`${baseUrl}/api/sessions/${encodeURIComponent(sessionId)}/feed`);
    },
  };
}

export type Client = ReturnType<typeof makeClient>;
