// Typed client for the convshop HTTP service. This is the only place the UI
// talks to the backend; components render exactly what these calls return.

export type Backend = 'rule' | 'tfidf' | 'neural' | 'hybrid';

export interface SessionInfo {
  session_id: string;
  backend: Backend;
  greeting: string;
}

export interface ProductCard {
  id: string;
  profile: string;
  position: number;
}

export interface DebugInfo {
  intent: string;
  state: string;
  entropies: Record<string, number>;
  top_scores: [string, number][];
}

export interface UtteranceReply {
  reply: string;
  reply_intent: string;
  intent: string;
  state: string;
  products: ProductCard[];
  status: 'OPEN' | 'PURCHASED' | 'EXPIRED';
  debug: DebugInfo | null;
}

export interface Turn {
  speaker: 'USER' | 'SYSTEM';
  text: string;
  intent: string;
  slots: Record<string, string[]>;
  state: string;
  items?: string[];
}

export interface Transcript {
  session_id: string;
  status: string;
  backend: Backend;
  turns: Turn[];
  purchased_id: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${base}${path}`, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  });
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body.code ?? 'unknown_error',
      body.message ?? response.statusText);
  }
  return body as T;
}

export class ServiceClient {
  constructor(public baseUrl: string = '') {}

  openSession(backend?: Backend): Promise<SessionInfo> {
    return request<SessionInfo>(this.baseUrl, '/sessions', {
      method: 'POST',
      body: JSON.stringify(backend ? { backend } : {}),
    });
  }

  sendUtterance(sessionId: string, text: string): Promise<UtteranceReply> {
    return request<UtteranceReply>(this.baseUrl, `/sessions/${sessionId}/utterances`, {
      method: 'POST',
      body: JSON.stringify({ text }),
    });
  }

  getTranscript(sessionId: string): Promise<Transcript> {
    return request<Transcript>(this.baseUrl, `/sessions/${sessionId}`);
  }

  getProduct(productId: string): Promise<{ id: string; profile: string }> {
    return request(this.baseUrl, `/products/${productId}`);
  }

  health(): Promise<{ status: string; products: number }> {
    return request(this.baseUrl, '/healthz');
  }
}
