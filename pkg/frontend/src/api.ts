/** Typed client for the session API. */

import { Box, asList } from "./geometry";

export interface SessionCreated {
  session_id: string;
  world_w: number;
  world_h: number;
}

export interface OperationDto {
  kind: string;
  amount: number;
}

export interface RecommendResponse {
  operations: OperationDto[];
  view: number[];
  crop: number[];
  confidence: number;
  converged: boolean;
  step_index: number;
  next_viewport: number[];
}

export interface TrajectoryStepDto {
  viewport: number[];
  operations: OperationDto[];
  view: number[];
  crop: number[];
  confidence: number;
  converged: boolean;
  next_viewport: number[];
  iou_to_previous: number;
}

export interface TrajectoryResponse {
  session_id: string;
  world_w: number;
  world_h: number;
  steps: TrajectoryStepDto[];
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const body = await resp.json();
        detail = body.detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  createSession(image: Blob, filename = "world.png"): Promise<SessionCreated> {
    const form = new FormData();
    form.append("image", image, filename);
    return this.request<SessionCreated>("/v1/sessions", { method: "POST", body: form });
  }

  recommend(sessionId: string, viewport: Box, orientation: string): Promise<RecommendResponse> {
    return this.request<RecommendResponse>(`/v1/sessions/${sessionId}/recommend`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ viewport: asList(viewport), orientation }),
    });
  }

  trajectory(sessionId: string): Promise<TrajectoryResponse> {
    return this.request<TrajectoryResponse>(`/v1/sessions/${sessionId}`);
  }

  deleteSession(sessionId: string): Promise<{ deleted: string }> {
    return this.request<{ deleted: string }>(`/v1/sessions/${sessionId}`, { method: "DELETE" });
  }
}
