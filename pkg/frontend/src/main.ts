/** Single-page app entry: hash routing between annotate / admin / trends. */
import { Client, ProjectView, sessionUserId } from "./api";
import { AnnotationSession } from "./session";
import { attachSessionHandlers, escapeHtml, renderSession } from "./views/annotate";
import {
  AdminFormData,
  renderAdmin,
  renderQueueTable,
  submitProject,
} from "./views/admin";
import { renderDashboard } from "./views/dashboard";

const client = new Client("");
const user = sessionUserId(window.localStorage);
const app = document.getElementById("app")!;
let queueTimer: number | undefined;

function nav(projects: ProjectView[], current: string): string {
  const options = projects.map((p) =>
    `<option value="${escapeHtml(p.project_id)}">${escapeHtml(p.title)}</option>`).join("");
  return `
    <nav>
      <strong>labelloop</strong>
      <select id="project-select" aria-label="project">${options}</select>
      <a href="#/annotate">annotate</a>
      <a href="#/trends">trends</a>
      <a href="#/admin">admin</a>
      <span class="user">you are ${escapeHtml(user)}</span>
      <span class="route">${escapeHtml(current)}</span>
    </nav>`;
}

async function annotatePage(projectId: string) {
  const session = new AnnotationSession(client, projectId, user);

  const rerender = () => {
    const pane = document.getElementById("pane")!;
    pane.innerHTML = renderSession(session.state);
    attachSessionHandlers(pane,
      async (answerId) => {
        const state = await session.answer(answerId);
        rerender();
        if (state.kind === "completed") {
          // the flow immediately asks for the next document
          await session.continueFlow();
          rerender();
        }
      },
      async () => {
        await session.continueFlow();
        rerender();
      });
  };

  await session.start();
  rerender();
}

async function adminPage(projectId: string) {
  const pane = document.getElementById("pane")!;
  const projects = await client.listProjects();
  pane.innerHTML = renderAdmin(projects);

  const form = pane.querySelector<HTMLFormElement>("#create-project")!;
  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    const fields: AdminFormData = {
      project_id: String(data.get("project_id") ?? ""),
      title: String(data.get("title") ?? ""),
      keywords: String(data.get("keywords") ?? "")
        .split(",").map((s) => s.trim()).filter(Boolean),
      query: String(data.get("query") ?? ""),
      configJson: String(data.get("config_json") ?? ""),
    };
    const created = await submitProject(
      client, fields,
      document.getElementById("query-errors")!,
      document.getElementById("config-errors")!);
    if (created) route();  // re-render with the new project listed
  });

  const refreshQueue = async () => {
    try {
      const snapshot = await client.queue(projectId);
      const table = document.getElementById("queue-table");
      if (table) table.innerHTML = renderQueueTable(snapshot);
    } catch {
      // project may not exist yet; leave the table empty
    }
  };
  await refreshQueue();
  queueTimer = window.setInterval(refreshQueue, 5000);
}

async function trendsPage(projectId: string) {
  const pane = document.getElementById("pane")!;
  const to = new Date();
  const from = new Date(to.getTime() - 21 * 86400 * 1000);
  const projects = await client.listProjects();
  const project = projects.find((p) => p.project_id === projectId);
  const points = await client.trends(projectId, from.toISOString(), to.toISOString());
  pane.innerHTML = renderDashboard(points, project?.classes ??
    ["positive", "negative", "neutral", "irrelevant"]);
}

async function route() {
  if (queueTimer) { window.clearInterval(queueTimer); queueTimer = undefined; }
  const hash = window.location.hash || "#/annotate";
  const projects = await client.listProjects();
  const stored = window.localStorage.getItem("labelloop-project");
  const projectId = stored && projects.some((p) => p.project_id === stored)
    ? stored : projects[0]?.project_id ?? "";
  app.innerHTML = nav(projects, hash) + `<main id="pane"></main>`;
  const select = document.getElementById("project-select") as HTMLSelectElement | null;
  if (select) {
    select.value = projectId;
    select.addEventListener("change", () => {
      window.localStorage.setItem("labelloop-project", select.value);
      route();
    });
  }
  try {
    if (hash.startsWith("#/admin")) await adminPage(projectId);
    else if (hash.startsWith("#/trends")) await trendsPage(projectId);
    else await annotatePage(projectId);
  } catch (err) {
    document.getElementById("pane")!.innerHTML =
      `<div class="error-state"><p>${escapeHtml(String(err))}</p></div>`;
  }
}

window.addEventListener("hashchange", route);
route();
