/** Admin view: project creation form, validation errors inline, queue table.
 *
 * The query field gets parse errors rendered directly beneath it with a
 * caret marking the reported byte offset.
 */
import { ApiError, Client, ProjectView, QueueSnapshot, Violation } from "../api";
import { escapeHtml } from "./annotate";

export function renderAdmin(projects: ProjectView[]): string {
  const rows = projects.map((p) => `
    <tr>
      <td>${escapeHtml(p.project_id)}</td>
      <td>${escapeHtml(p.title)}</td>
      <td><code>${escapeHtml(p.query)}</code></td>
      <td>${p.consensus_k}</td>
      <td>v${p.model_version}</td>
    </tr>`).join("");
  return `
    <section class="admin">
      <h2>Projects</h2>
      <table class="project-list">
        <thead><tr><th>id</th><th>title</th><th>query</th><th>k</th><th>model</th></tr></thead>
        <tbody>${rows || `<tr><td colspan="5">none yet</td></tr>`}</tbody>
      </table>

      <h2>New project</h2>
      <form id="create-project">
        <label>Project id <input name="project_id" required></label>
        <label>Title <input name="title"></label>
        <label>Keywords (comma separated) <input name="keywords"></label>
        <label>Query
          <input name="query" id="query-field" spellcheck="false"
                 placeholder="(keyword1 OR keyword2) AND keyword3">
        </label>
        <div id="query-errors" class="field-errors" aria-live="polite"></div>
        <label>Config JSON (question sequence, class map, …)
          <textarea name="config_json" rows="10" spellcheck="false"></textarea>
        </label>
        <div id="config-errors" class="field-errors" aria-live="polite"></div>
        <button type="submit">Create</button>
      </form>

      <h2>Label queue</h2>
      <div id="queue-table"></div>
    </section>`;
}

export function renderQueueTable(snapshot: QueueSnapshot): string {
  const fmt = (value: number | null) => value === null ? "–" : value.toFixed(3);
  const rows = snapshot.entries.slice(0, 25).map((e) => `
    <tr>
      <td><code>${escapeHtml(e.doc_id)}</code></td>
      <td>${e.priority.toFixed(3)}</td>
      <td>${e.uncertainty.toFixed(3)}</td>
      <td>${e.labels_received}</td>
      <td>${e.in_flight}</td>
    </tr>`).join("");
  return `
    <p>size ${snapshot.size} / ${snapshot.capacity},
       priority ${fmt(snapshot.min_priority)} … ${fmt(snapshot.max_priority)}</p>
    <table>
      <thead><tr><th>doc</th><th>priority</th><th>uncertainty</th>
                 <th>labels</th><th>in flight</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

/** Parse errors render under the query input with a caret at the offset. */
export function renderQueryViolations(query: string, violations: Violation[]): string {
  return violations.map((v) => {
    if (v.offset === undefined) {
      return `<p class="violation">${escapeHtml(v.message)}</p>`;
    }
    const caret = " ".repeat(v.offset) + "^";
    return `
      <div class="violation parse-error" data-offset="${v.offset}">
        <p>${escapeHtml(v.message)} (offset ${v.offset})</p>
        <pre class="offset-marker">${escapeHtml(query)}\n${caret}</pre>
      </div>`;
  }).join("");
}

export interface AdminFormData {
  project_id: string;
  title: string;
  keywords: string[];
  query: string;
  configJson: string;
}

export function buildProjectConfig(form: AdminFormData): Record<string, unknown> {
  let extra: Record<string, unknown> = {};
  if (form.configJson.trim()) {
    extra = JSON.parse(form.configJson);
  }
  return {
    project_id: form.project_id,
    title: form.title || form.project_id,
    keywords: form.keywords,
    query: form.query,
    ...extra,
  };
}

export async function submitProject(
  client: Client,
  form: AdminFormData,
  queryErrorsEl: HTMLElement,
  configErrorsEl: HTMLElement,
): Promise<ProjectView | null> {
  queryErrorsEl.innerHTML = "";
  configErrorsEl.innerHTML = "";
  let config: Record<string, unknown>;
  try {
    config = buildProjectConfig(form);
  } catch (err) {
    configErrorsEl.innerHTML =
      `<p class="violation">config JSON: ${escapeHtml(String(err))}</p>`;
    return null;
  }
  try {
    return await client.createProject(config);
  } catch (err) {
    if (err instanceof ApiError && err.status === 422) {
      const parseErrors = err.violations.filter((v) => v.code === "parse_error");
      const others = err.violations.filter((v) => v.code !== "parse_error");
      queryErrorsEl.innerHTML = renderQueryViolations(form.query, parseErrors);
      configErrorsEl.innerHTML = others.map((v) =>
        `<p class="violation">${escapeHtml(v.message)}</p>`).join("");
      return null;
    }
    configErrorsEl.innerHTML =
      `<p class="violation">${escapeHtml(String(err))}</p>`;
    return null;
  }
}
