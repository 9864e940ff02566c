/**
 * Typed client for the teaching-service HTTP API.
 *
 * The UI speaks only these documented endpoints; the base URL is
 * configurable so the bundle can be served from any static host.
 */

export interface AgentStep {
  kind: "api" | "nlg" | "sys";
  name: string;
  confidence: number;
  text?: string;
}

export interface UtteranceResponse {
  agent_steps: AgentStep[];
  phase: "AwaitUser" | "AgentActing" | "Ended";
}

export interface PreferenceRecord {
  user_id: string;
  domain: string;
  entity_type: string;
  entity_value: string;
  polarity: string;
  condition?: string;
  updated_at: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class TeachingApi {
  constructor(private baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const payload = await res.json();
        if (payload && typeof payload.error === "string") detail = payload.error;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  async health(): Promise<{ status: string }> {
    return this.request("GET", "/api/health");
  }

  async createSession(userId: string): Promise<string> {
    const body = await this.request<{ session_id: string }>("POST", "/api/session", {
      user_id: userId,
    });
    return body.session_id;
  }

  async sendUtterance(sessionId: string, text: string): Promise<UtteranceResponse> {
    return this.request("POST", `/api/session/${sessionId}/utterance`, { text });
  }

  async preferences(userId: string): Promise<PreferenceRecord[]> {
    return this.request("GET", `/api/preferences/${userId}`);
  }
}
