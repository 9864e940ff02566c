/**
 * Typed client for the teaching-service HTTP API.
 *
 * The UI speaks only these documented endpoints; the base URL is
 * configurable so the bundle can be served from any static host.
 */
export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
export class TeachingApi {
    constructor(baseUrl = "") {
        this.baseUrl = baseUrl;
    }
    async request(method, path, body) {
        const res = await fetch(this.baseUrl + path, {
            method,
            headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
            body: body !== undefined ? JSON.stringify(body) : undefined,
        });
        if (!res.ok) {
            let detail = res.statusText;
            try {
                const payload = await res.json();
                if (payload && typeof payload.error === "string")
                    detail = payload.error;
            }
            catch {
                /* non-JSON error body */
            }
            throw new ApiError(res.status, detail);
        }
        return (await res.json());
    }
    async health() {
        return this.request("GET", "/api/health");
    }
    async createSession(userId) {
        const body = await this.request("POST", "/api/session", {
            user_id: userId,
        });
        return body.session_id;
    }
    async sendUtterance(sessionId, text) {
        return this.request("POST", `/api/session/${sessionId}/utterance`, { text });
    }
    async preferences(userId) {
        return this.request("GET", `/api/preferences/${userId}`);
    }
}
