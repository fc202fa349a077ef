/** Typed client for the /v1 API. Every id rendered by the UI round-trips
 * through these wire types unchanged. */

export interface AnswerView {
  answer_id: string;
  label: string;
}

export interface QuestionView {
  question_id: string;
  prompt: string;
  answers: AnswerView[];
}

export interface NextDocument {
  doc_id: string;
  text: string;
  question: QuestionView;
}

export interface AnswerResult {
  status: "next" | "complete";
  question?: QuestionView;
  consensus?: { label: string | null; support: number; total: number };
}

export interface ProjectView {
  project_id: string;
  title: string;
  keywords: string[];
  query: string;
  start_question: string;
  sentiment_question: string;
  classes: string[];
  consensus_k: number;
  model_version: number;
}

export interface TrendPoint {
  bucket_start: string;
  counts: Record<string, number>;
  ma_1d: Record<string, number>;
  r: number;
  index: number;
}

export interface QueueEntryView {
  doc_id: string;
  priority: number;
  uncertainty: number;
  labels_received: number;
  in_flight: number;
}

export interface QueueSnapshot {
  size: number;
  capacity: number;
  min_priority: number | null;
  max_priority: number | null;
  entries: QueueEntryView[];
}

export interface Violation {
  code: string;
  message: string;
  offset?: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public violations: Violation[] = [],
  ) {
    super(message);
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `HTTP ${res.status}`;
  let violations: Violation[] = [];
  try {
    const body = await res.json();
    if (body?.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
      violations = body.error.violations ?? [];
    }
  } catch {
    // non-JSON error body; keep defaults
  }
  return new ApiError(res.status, code, message, violations);
}

export class Client {
  constructor(private base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.base + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (res.status === 204) return null as T;
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  listProjects(): Promise<ProjectView[]> {
    return this.request("GET", "/v1/projects");
  }

  createProject(config: unknown): Promise<ProjectView> {
    return this.request("POST", "/v1/projects", config);
  }

  /** null means the queue has nothing eligible for this user (HTTP 204). */
  nextDocument(projectId: string, user: string): Promise<NextDocument | null> {
    return this.request("GET",
      `/v1/projects/${encodeURIComponent(projectId)}/next?user=${encodeURIComponent(user)}`);
  }

  submitAnswer(projectId: string, user: string, doc: string,
               question: string, answer: string): Promise<AnswerResult> {
    return this.request("POST",
      `/v1/projects/${encodeURIComponent(projectId)}/answers`,
      { user, doc, question, answer });
  }

  trends(projectId: string, from: string, to: string): Promise<TrendPoint[]> {
    const params = `from=${encodeURIComponent(from)}&to=${encodeURIComponent(to)}`;
    return this.request("GET",
      `/v1/projects/${encodeURIComponent(projectId)}/trends?${params}`);
  }

  queue(projectId: string): Promise<QueueSnapshot> {
    return this.request("GET", `/v1/projects/${encodeURIComponent(projectId)}/queue`);
  }
}

/** Anonymous annotator identity, persisted per browser. */
export function sessionUserId(storage: Storage): string {
  const KEY = "labelloop-user";
  let id = storage.getItem(KEY);
  if (!id) {
    id = "anon-" + Math.random().toString(36).slice(2, 10);
    storage.setItem(KEY, id);
  }
  return id;
}
