/** Admin form contract: 422 violations render inline at the query offset. */
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { Client } from "../src/api";
import {
  renderAdmin,
  renderQueryViolations,
  renderQueueTable,
  submitProject,
} from "../src/views/admin";
import { LiveServer, startServer } from "./server";

let server: LiveServer;
let client: Client;

beforeAll(async () => {
  server = await startServer(3);
  client = new Client(server.base);
});

afterAll(async () => {
  await server.stop();
});

const SEQUENCE_CONFIG = {
  question_sequence: {
    start: "q1",
    questions: [
      { question_id: "q1", prompt: "Relevant?", answers: [
        { answer_id: "yes", label: "Yes" }, { answer_id: "no", label: "No" }] },
      { question_id: "q2", prompt: "Sentiment?", answers: [
        { answer_id: "pos", label: "Positive" },
        { answer_id: "neg", label: "Negative" },
        { answer_id: "neu", label: "Neutral" }] },
    ],
    transitions: [
      { question_id: "q1", answer_id: "yes", next_question_id: "q2" }],
  },
  sentiment_question: "q2",
  class_map: { pos: "positive", neg: "negative", neu: "neutral" },
};

describe("project creation", () => {
  it("renders a parse error inline at the reported offset", async () => {
    const queryErrors = document.createElement("div");
    const configErrors = document.createElement("div");
    const created = await submitProject(client, {
      project_id: "badquery",
      title: "Bad query",
      keywords: [],
      query: "a AND",
      configJson: JSON.stringify(SEQUENCE_CONFIG),
    }, queryErrors, configErrors);

    expect(created).toBeNull();
    const violation = queryErrors.querySelector<HTMLElement>(".parse-error");
    expect(violation).not.toBeNull();
    expect(violation!.dataset.offset).toBe("5");
    // the caret sits under the byte offset in the echoed query
    const marker = violation!.querySelector("pre.offset-marker")!.textContent!;
    const [echoed, caretLine] = marker.split("\n");
    expect(echoed).toBe("a AND");
    expect(caretLine.indexOf("^")).toBe(5);
  });

  it("creates a valid project which then appears in the list", async () => {
    const queryErrors = document.createElement("div");
    const configErrors = document.createElement("div");
    const created = await submitProject(client, {
      project_id: "measles",
      title: "Measles watch",
      keywords: ["measles", "mumps"],
      query: "",
      configJson: JSON.stringify(SEQUENCE_CONFIG),
    }, queryErrors, configErrors);
    expect(created?.project_id).toBe("measles");
    expect(queryErrors.innerHTML).toBe("");

    const projects = await client.listProjects();
    const ids = projects.map((p) => p.project_id);
    expect(ids).toContain("measles");
    const html = renderAdmin(projects);
    expect(html).toContain("measles");
    expect(html).toContain("(measles OR mumps)"); // canonical echoed form
  });

  it("surfaces sequence violations under the config field", async () => {
    const broken = JSON.parse(JSON.stringify(SEQUENCE_CONFIG));
    broken.question_sequence.transitions.push(
      { question_id: "q2", answer_id: "pos", next_question_id: "q1" });
    const queryErrors = document.createElement("div");
    const configErrors = document.createElement("div");
    const created = await submitProject(client, {
      project_id: "cyclic",
      title: "",
      keywords: ["x"],
      query: "",
      configJson: JSON.stringify(broken),
    }, queryErrors, configErrors);
    expect(created).toBeNull();
    expect(configErrors.textContent).toContain("cycle");
  });
});

describe("queue table", () => {
  it("shows size and per-entry label progress", async () => {
    const snapshot = await client.queue("vaccine_sentiment");
    const html = renderQueueTable(snapshot);
    const host = document.createElement("div");
    host.innerHTML = html;
    expect(host.textContent).toContain(`size ${snapshot.size} / ${snapshot.capacity}`);
    expect(host.querySelectorAll("tbody tr").length)
      .toBe(Math.min(snapshot.entries.length, 25));
  });
});

describe("offset rendering edge cases", () => {
  it("violations without offsets render as plain messages", () => {
    const html = renderQueryViolations("whatever", [
      { code: "invalid_config", message: "class_map misses answer 'neu'" }]);
    expect(html).toContain("class_map misses answer");
    expect(html).not.toContain("offset-marker");
  });
});
