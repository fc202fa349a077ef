/** Annotation view: document text, the current question, answer buttons.
 *
 * Buttons mirror the server's answers exactly; number keys 1..9 activate
 * them for keyboard-only use.
 */
import { SessionState } from "../session";

export function renderSession(state: SessionState): string {
  switch (state.kind) {
    case "idle":
    case "loading":
      return `<p class="status">loading…</p>`;
    case "empty":
      return `
        <div class="empty-state">
          <p>Nothing to label right now.</p>
          <button id="retry" autofocus>Check again</button>
        </div>`;
    case "expired":
      return `
        <div class="expired-state">
          <p>This session is no longer valid (${escapeHtml(state.message)}).</p>
          <button id="restart" autofocus>Start a new session</button>
        </div>`;
    case "error":
      return `<div class="error-state"><p>Something went wrong:
        ${escapeHtml(state.message)}</p><button id="retry">Retry</button></div>`;
    case "completed":
      return `
        <div class="completed-state">
          <p>Thanks! Sessions completed: ${state.sessionsDone}.</p>
        </div>`;
    case "question": {
      const buttons = state.question.answers.map((a, i) => `
        <button class="answer" data-answer-id="${escapeHtml(a.answer_id)}"
                accesskey="${i + 1}">
          <span class="key-hint">${i + 1}</span> ${escapeHtml(a.label)}
        </button>`).join("");
      return `
        <blockquote class="doc-text" data-doc-id="${escapeHtml(state.doc.doc_id)}">
          ${escapeHtml(state.doc.text)}
        </blockquote>
        <h2 class="prompt" data-question-id="${escapeHtml(state.question.question_id)}">
          ${escapeHtml(state.question.prompt)}
        </h2>
        <div class="answers" role="group" aria-label="answers">${buttons}</div>`;
    }
  }
}

export function attachSessionHandlers(
  root: HTMLElement,
  onAnswer: (answerId: string) => void,
  onContinue: () => void,
): void {
  root.querySelectorAll<HTMLButtonElement>("button.answer").forEach((btn) => {
    btn.addEventListener("click", () => onAnswer(btn.dataset.answerId!));
  });
  root.querySelector("#retry")?.addEventListener("click", onContinue);
  root.querySelector("#restart")?.addEventListener("click", onContinue);
  root.onkeydown = (ev) => {
    const n = Number(ev.key);
    if (!Number.isInteger(n) || n < 1) return;
    const buttons = root.querySelectorAll<HTMLButtonElement>("button.answer");
    if (n <= buttons.length) buttons[n - 1].click();
  };
}

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => ({
    "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;",
  })[ch]!);
}
