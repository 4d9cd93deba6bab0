// Typed client for the program-debugging HTTP API. All rewards and edit
// distances are computed server-side; this client only moves JSON.

export interface TaskInfo {
  kind: string;
  height: number;
  width: number;
  horizon: number;
  reward_range: [number, number];
}

export interface Frame {
  agent_row: number;
  agent_col: number;
  agent_dir: "north" | "east" | "south" | "west";
  markers: number[][];
  action: string | null;
  node_id: number | null;
  token_span?: [number, number];
}

export interface Trace {
  width: number;
  height: number;
  walls: boolean[][];
  frames: Frame[];
  actions: string[];
  terminated: string;
}

export interface SessionStartResponse extends Trace {
  session: string;
  orig_reward: number;
  best_reward: number;
  budget: number;
}

export interface SessionSubmitResponse extends Trace {
  reward: number;
  distance: number;
  within_budget: boolean;
  best_so_far: number;
  orig_reward: number;
}

export interface ApiErrorDetail {
  error: string;
  message: string;
  index?: number;
  distance?: number;
  budget?: number;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: ApiErrorDetail) {
    super(detail.message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      const detail: ApiErrorDetail = payload.detail ?? {
        error: "http",
        message: `request failed with status ${response.status}`,
      };
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  async tasks(): Promise<TaskInfo[]> {
    const response = await this.fetchImpl(this.baseUrl + "/tasks");
    if (!response.ok) {
      throw new ApiError(response.status, {
        error: "http",
        message: "task list unavailable",
      });
    }
    return (await response.json()) as TaskInfo[];
  }

  parse(program: string): Promise<{ ok: boolean; error?: { index: number; message: string } }> {
    return this.post("/parse", { program });
  }

  startSession(task: string, program: string, budget: number, seed = 0): Promise<SessionStartResponse> {
    return this.post("/session/start", { task, program, budget, seed });
  }

  submit(session: string, edited: string): Promise<SessionSubmitResponse> {
    return this.post("/session/submit", { session, edited });
  }

  editDistance(original: string, edited: string): Promise<{ distance: number }> {
    return this.post("/edit-distance", { original, edited });
  }
}
