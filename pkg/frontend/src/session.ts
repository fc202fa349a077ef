/** Annotation session state machine.
 *
 * The server owns the question sequence; the client only renders the
 * current question and follows whatever the answer endpoint returns, so
 * questions can never be skipped client-side.
 */
import { ApiError, Client, NextDocument, QuestionView } from "./api";

export type SessionState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "empty" }
  | { kind: "question"; doc: NextDocument; question: QuestionView; answered: number }
  | { kind: "completed"; docId: string; sessionsDone: number }
  | { kind: "expired"; message: string }
  | { kind: "error"; message: string };

export class AnnotationSession {
  state: SessionState = { kind: "idle" };
  sessionsDone = 0;
  private doc: NextDocument | null = null;

  constructor(
    private client: Client,
    private projectId: string,
    private user: string,
  ) {}

  /** Fetch the next document; empty queue is a normal state, not an error. */
  async start(): Promise<SessionState> {
    this.state = { kind: "loading" };
    try {
      const doc = await this.client.nextDocument(this.projectId, this.user);
      if (doc === null) {
        this.doc = null;
        this.state = { kind: "empty" };
      } else {
        this.doc = doc;
        this.state = { kind: "question", doc, question: doc.question, answered: 0 };
      }
    } catch (err) {
      this.state = { kind: "error", message: describe(err) };
    }
    return this.state;
  }

  /** Submit the chosen answer for the current question. */
  async answer(answerId: string): Promise<SessionState> {
    if (this.state.kind !== "question" || !this.doc) {
      throw new Error("no active question");
    }
    const { question, answered } = this.state;
    try {
      const result = await this.client.submitAnswer(
        this.projectId, this.user, this.doc.doc_id,
        question.question_id, answerId);
      if (result.status === "next" && result.question) {
        this.state = {
          kind: "question", doc: this.doc,
          question: result.question, answered: answered + 1,
        };
      } else {
        this.sessionsDone += 1;
        this.state = {
          kind: "completed", docId: this.doc.doc_id,
          sessionsDone: this.sessionsDone,
        };
        this.doc = null;
      }
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 410)) {
        // stale or expired session: prompt a restart, create no extra rows
        this.doc = null;
        this.state = { kind: "expired", message: err.message };
      } else {
        this.state = { kind: "error", message: describe(err) };
      }
    }
    return this.state;
  }

  /** After completion the flow immediately asks for the next document. */
  async continueFlow(): Promise<SessionState> {
    if (this.state.kind !== "completed" && this.state.kind !== "expired"
        && this.state.kind !== "empty") {
      throw new Error("flow not ready to continue");
    }
    return this.start();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}
