// Typed client for the local daemon JSON API. All state lives server-side;
// this module never stores secrets anywhere but function arguments/results.

export interface SiteEntry {
  site_key: string;
  version: number;
  has_offset: boolean;
  has_reminder: boolean;
}

export interface DaemonConfig {
  clipboard_clear_seconds: number;
}

export class ApiError extends Error {
  constructor(public code: number, message: string) {
    super(message);
  }
}

export class DaemonUnreachable extends Error {}

type FetchLike = typeof fetch;

export class DaemonClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
  ): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch {
      throw new DaemonUnreachable("daemon unreachable");
    }
    const data = await resp.json();
    if (!resp.ok) {
      throw new ApiError(data.code ?? resp.status, data.message ?? "request failed");
    }
    return data as T;
  }

  async openSession(userPassword: string): Promise<void> {
    await this.request("POST", "/session", { user_password: userPassword });
  }

  async closeSession(): Promise<void> {
    await this.request("POST", "/session/close");
  }

  async listSites(): Promise<SiteEntry[]> {
    const data = await this.request<{ sites: SiteEntry[] }>("GET", "/sites");
    return data.sites;
  }

  async generate(site: string, objectPath?: string): Promise<string> {
    const data = await this.request<{ password: string }>("POST", "/generate", {
      site,
      ...(objectPath ? { object_path: objectPath } : {}),
    });
    return data.password;
  }

  async pin(site: string, desired: string): Promise<void> {
    await this.request("POST", "/pin", { site, desired });
  }

  async rotate(site: string): Promise<void> {
    await this.request("POST", "/rotate", { site });
  }

  async reminder(site: string): Promise<string | null> {
    const data = await this.request<{ reminder: string | null }>(
      "GET",
      `/reminder/${encodeURIComponent(site)}`,
    );
    return data.reminder;
  }

  async config(): Promise<DaemonConfig> {
    return this.request<DaemonConfig>("GET", "/config");
  }
}
