// Chat client over the session API: one active session per tab, strictly
// turn-based (the composer is disabled while a turn is in flight, and the
// inspector panels are re-polled after every reply). No orchestration logic
// lives here; the server's answers are rendered as-is.

import {
  ApiClient,
  ApiError,
  AskedQuestion,
  ExplainDoc,
  ExplainKind,
  StateDoc,
  TraceDoc,
} from "./api.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export class App {
  readonly root: HTMLElement;
  readonly api: ApiClient;
  sessionId = "";

  private messagesBox!: HTMLElement;
  private askArea!: HTMLElement;
  private composer!: HTMLFormElement;
  private composerInput!: HTMLInputElement;
  private statePanel!: HTMLElement;
  private planPanel!: HTMLElement;
  private tracePanel!: HTMLElement;
  private explainButtons!: HTMLElement;
  private explainOutput!: HTMLElement;
  private inflight: Promise<unknown> = Promise.resolve();
  private busy = false;

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.api = api;
  }

  static async create(root: HTMLElement, api: ApiClient): Promise<App> {
    const app = new App(root, api);
    app.buildSkeleton();
    app.sessionId = await api.createSession();
    app.root.querySelector("[data-testid=session-id]")!.textContent = app.sessionId;
    await app.refreshPanels();
    return app;
  }

  /** Resolves once every in-flight request chain has settled. */
  async whenIdle(): Promise<void> {
    let previous;
    do {
      previous = this.inflight;
      await previous.catch(() => undefined);
    } while (previous !== this.inflight);
  }

  private track<T>(work: Promise<T>): Promise<T> {
    this.inflight = this.inflight.then(() => work.catch(() => undefined));
    return work;
  }

  private buildSkeleton(): void {
    this.root.innerHTML = "";
    const layout = el("div", { class: "layout" });

    const chat = el("section", { class: "chat" });
    chat.append(el("header", { class: "chat-header" }, "conductor"));
    chat.append(el("small", { "data-testid": "session-id" }, ""));
    this.messagesBox = el("div", { class: "messages", "data-testid": "messages" });
    this.askArea = el("div", { class: "ask-area", "data-testid": "ask-area" });
    this.composer = el("form", { class: "composer" });
    this.composerInput = el("input", {
      type: "text",
      placeholder: "Say something…",
      "data-testid": "composer-input",
    });
    const sendButton = el("button", { type: "submit", "data-testid": "composer-send" }, "Send");
    this.composer.append(this.composerInput, sendButton);
    this.composer.addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.composerInput.value.trim();
      if (!text) return;
      this.composerInput.value = "";
      void this.send(text);
    });
    chat.append(this.messagesBox, this.askArea, this.composer);

    const panels = el("aside", { class: "panels" });
    this.statePanel = el("section", { class: "panel", "data-testid": "state-panel" });
    this.planPanel = el("section", { class: "panel", "data-testid": "plan-panel" });
    this.explainButtons = el("section", { class: "panel", "data-testid": "explain-panel" });
    this.explainOutput = el("section", { class: "panel", "data-testid": "explain-output" });
    this.tracePanel = el("section", { class: "panel", "data-testid": "trace-panel" });
    panels.append(
      this.statePanel,
      this.planPanel,
      this.explainButtons,
      this.explainOutput,
      this.tracePanel,
    );

    layout.append(chat, panels);
    this.root.append(layout);
  }

  private bubble(kind: "user" | "bot" | "error", text: string): void {
    const node = el("div", { class: `bubble ${kind}`, "data-kind": kind }, text);
    this.messagesBox.append(node);
  }

  /** Send one utterance and render the reply; panels refresh afterwards. */
  send(text: string): Promise<void> {
    if (this.busy) return this.whenIdle();
    this.busy = true;
    this.setComposerEnabled(false);
    this.bubble("user", text);
    const work = (async () => {
      try {
        const turn = await this.api.postEvent(this.sessionId, text);
        for (const message of turn.messages) this.bubble("bot", message);
        this.renderAsk(turn.asked);
        await this.refreshPanels();
      } catch (error) {
        this.bubble("error", error instanceof Error ? error.message : String(error));
      } finally {
        this.busy = false;
        this.setComposerEnabled(true);
      }
    })();
    return this.track(work);
  }

  private setComposerEnabled(enabled: boolean): void {
    this.composerInput.disabled = !enabled;
    (this.composer.querySelector("button") as HTMLButtonElement).disabled = !enabled;
  }

  private renderAsk(asked: AskedQuestion | null): void {
    this.askArea.innerHTML = "";
    if (asked === null) return;
    if (asked.ask_kind === "slot_fill") {
      const form = el("form", { class: "ask slot-fill", "data-testid": "slot-form" });
      form.append(el("label", { "data-testid": "slot-prompt" }, asked.prompt));
      const input = el("input", { type: "text", "data-testid": "slot-input" });
      const submit = el("button", { type: "submit", "data-testid": "slot-submit" }, "Answer");
      form.append(input, submit);
      form.addEventListener("submit", (event) => {
        event.preventDefault();
        const value = input.value.trim();
        if (!value) return;
        this.askArea.innerHTML = "";
        void this.send(value);
      });
      this.askArea.append(form);
      return;
    }
    const box = el("div", { class: "ask authorize", "data-testid": "authorize-box" });
    box.append(el("p", { "data-testid": "authorize-prompt" }, asked.prompt));
    const allow = el("button", { type: "button", "data-testid": "authorize-allow" }, "Allow");
    const deny = el("button", { type: "button", "data-testid": "authorize-deny" }, "Deny");
    allow.addEventListener("click", () => {
      this.askArea.innerHTML = "";
      void this.send("yes");
    });
    deny.addEventListener("click", () => {
      this.askArea.innerHTML = "";
      void this.send("no");
    });
    box.append(allow, deny);
    this.askArea.append(box);
  }

  // -- inspector panels ------------------------------------------------------

  async refreshPanels(): Promise<void> {
    const [state, trace] = await Promise.all([
      this.api.state(this.sessionId),
      this.api.trace(this.sessionId),
    ]);
    this.renderState(state);
    this.renderPlans(state, trace);
    this.renderExplainButtons(state);
    this.renderTrace(trace);
  }

  private renderState(state: StateDoc): void {
    this.statePanel.innerHTML = "";
    this.statePanel.append(el("h3", {}, "Memory & goals"));

    const goals = el("ul", { class: "goal-stack", "data-testid": "goal-stack" });
    state.goal_stack.forEach((entry, index) => {
      const active = index === state.goal_stack.length - 1;
      const item = el(
        "li",
        { class: active ? "goal active" : "goal", "data-goal": entry.goal.join(",") },
        entry.goal.join(", "),
      );
      if (active) item.append(el("span", { class: "badge" }, " active"));
      goals.append(item);
    });
    for (const entry of state.finished_goals) {
      const item = el(
        "li",
        { class: `goal ${entry.status}`, "data-goal": entry.goal.join(",") },
        entry.goal.join(", "),
      );
      item.append(el("span", { class: "badge" }, ` ${entry.status}`));
      goals.append(item);
    }
    this.statePanel.append(goals);

    const table = el("table", { class: "ltm", "data-testid": "ltm-table" });
    for (const row of state.ltm) {
      const tr = el("tr", { "data-element": row.element });
      tr.append(
        el("td", {}, row.element),
        el("td", { class: row.sensitive ? "value masked" : "value" }, row.value),
        el("td", { class: "prov" }, row.provenance.kind),
      );
      table.append(tr);
    }
    this.statePanel.append(table);

    if (state.learned.length) {
      this.statePanel.append(el("h4", {}, "Learned"));
      const learned = el("ul", { "data-testid": "learned-list" });
      for (const fact of state.learned) learned.append(el("li", {}, fact));
      this.statePanel.append(learned);
    }
  }

  private renderPlans(state: StateDoc, trace: TraceDoc): void {
    this.planPanel.innerHTML = "";
    this.planPanel.append(el("h3", {}, "Plans"));
    const outcomes = new Map<string, string>();
    for (const record of trace.records) {
      outcomes.set(
        record.action_id,
        record.invalid_invocation ? "invalid" : record.success ? "executed" : "failed",
      );
    }
    const snapshots = [...trace.plans];
    const latest = snapshots[snapshots.length - 1];
    if (latest) {
      const list = el("ol", { class: "plan latest", "data-testid": "latest-plan" });
      for (const step of latest.steps) {
        let status = outcomes.get(step) ?? "planned";
        if (state.pruned.includes(step)) status = "pruned";
        const item = el("li", { class: `step ${status}`, "data-action": step }, step);
        item.append(el("span", { class: "badge" }, ` ${status}`));
        list.append(item);
      }
      this.planPanel.append(
        el("p", {}, `turn ${latest.turn}: ${latest.goal.join(", ")} (${latest.status})`),
        list,
      );
    } else {
      this.planPanel.append(el("p", {}, "No plan yet."));
    }
    const timeline = el("ul", { class: "plan-timeline", "data-testid": "plan-timeline" });
    snapshots.forEach((snapshot, index) => {
      timeline.append(
        el(
          "li",
          { "data-turn": String(snapshot.turn) },
          `#${index} turn ${snapshot.turn} → ${snapshot.goal.join(", ")}: ` +
            `${snapshot.status} (${snapshot.steps.length} steps)`,
        ),
      );
    });
    this.planPanel.append(timeline);
  }

  private renderExplainButtons(state: StateDoc): void {
    this.explainButtons.innerHTML = "";
    this.explainButtons.append(el("h3", {}, "Ask about"));

    const goals = new Map<string, string[]>();
    for (const entry of [...state.finished_goals, ...state.goal_stack]) {
      goals.set(entry.goal.join(","), entry.goal);
    }
    for (const [key, goal] of goals) {
      const button = el(
        "button",
        { type: "button", "data-testid": `summary-${key}` },
        `Summary: ${goal.join(", ")}`,
      );
      button.addEventListener("click", () => void this.track(this.runExplain("what")));
      this.explainButtons.append(button);
    }

    for (const row of state.ltm) {
      const group = el("div", { class: "fact-buttons", "data-element": row.element });
      group.append(el("span", {}, row.element + " "));
      const actions: [string, () => Promise<void>][] = [
        ["How", () => this.runExplain("how", row.element)],
        ["Why", () => this.runExplain("why", row.element, "final")],
        ["Why chain", () => this.runExplain("why", row.element, "chain")],
        ["Chain", () => this.runExplain("chain", row.element)],
      ];
      for (const [label, handler] of actions) {
        const id = label.toLowerCase().replace(" ", "-");
        const button = el(
          "button",
          { type: "button", "data-testid": `${id}-${row.element}` },
          label,
        );
        button.addEventListener("click", () => void this.track(handler()));
        group.append(button);
      }
      this.explainButtons.append(group);
    }
  }

  private async runExplain(
    kind: ExplainKind,
    element?: string,
    mode?: "final" | "chain",
  ): Promise<void> {
    try {
      const doc = await this.api.explain(this.sessionId, kind, element, mode);
      this.renderExplainOutput(doc);
    } catch (error) {
      this.explainOutput.innerHTML = "";
      this.explainOutput.append(
        el(
          "p",
          { class: "error", "data-testid": "explain-error" },
          error instanceof ApiError ? error.message : String(error),
        ),
      );
    }
  }

  private renderExplainOutput(doc: ExplainDoc): void {
    this.explainOutput.innerHTML = "";
    this.explainOutput.append(el("h3", {}, `Explanation (${doc.kind})`));
    const lines = el("div", { class: "explain-text", "data-testid": "explain-text" });
    for (const line of doc.text) lines.append(el("p", {}, line));
    this.explainOutput.append(lines);

    if (doc.kind === "chain" && doc.structured.steps) {
      const list = el("ol", { class: "chain", "data-testid": "chain-steps" });
      for (const step of doc.structured.steps) {
        const label = step.attribution
          ? `${step.skill_id}: ${step.focus} ← ${step.attribution.element}` +
            ` (${step.attribution.weight.toFixed(2)})`
          : `${step.skill_id}: ${step.focus} (no attribution)`;
        const item = el("li", { "data-skill": step.skill_id, "data-focus": step.focus }, label);
        list.append(item);
      }
      this.explainOutput.append(list);
    }
    const raw = el("pre", { class: "structured", "data-testid": "explain-structured" });
    raw.textContent = JSON.stringify(doc.structured, null, 2);
    this.explainOutput.append(raw);
  }

  private renderTrace(trace: TraceDoc): void {
    this.tracePanel.innerHTML = "";
    this.tracePanel.append(el("h3", {}, "Trace"));
    const list = el("ol", { class: "trace", "data-testid": "trace-list" });
    for (const record of trace.records) {
      const status = record.invalid_invocation ? "invalid" : record.success ? "ok" : "fail";
      list.append(
        el(
          "li",
          { class: `record ${status}`, "data-seq": String(record.seq) },
          `${record.seq}: ${record.action_id} [${status}]`,
        ),
      );
    }
    this.tracePanel.append(list);
  }
}
