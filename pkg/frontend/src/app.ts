// DOM wiring: one keydown listener feeding the reducers, one render pass
// reading the state back out.  All suggestion traffic goes through the
// scheduler so typing bursts collapse into single requests and stale
// replies are dropped.

import { Candidate, ServiceClient, SuggestRequest, SuggestResponse } from "./client.js";
import { SuggestScheduler } from "./scheduler.js";
import {
  SessionState,
  accept,
  applyResponse,
  backspace,
  commitTurn,
  dismiss,
  formatTes,
  initialState,
  keystroke,
  sessionTes,
} from "./state.js";

const ENTROPY_STOPS: Array<number | null> = [null, 3, 0.6];
const MIN_CONF_OFF = -10;
const INSPECTOR_TOPK = 10;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const typedEl = el<HTMLSpanElement>("typed");
const ghostEl = el<HTMLSpanElement>("ghost");
const composerEl = el<HTMLDivElement>("composer");
const conversationEl = el<HTMLUListElement>("conversation");
const inspectorEl = el<HTMLDetailsElement>("inspector");
const candidatesEl = el<HTMLOListElement>("candidates");
const statusEl = el<HTMLSpanElement>("status");

const originEl = el<HTMLInputElement>("origin");
const modelEl = el<HTMLSelectElement>("model");
const rerankEl = el<HTMLInputElement>("rerank");
const entropyEl = el<HTMLInputElement>("entropy");
const entropyLabelEl = el<HTMLSpanElement>("entropy-label");
const minConfEl = el<HTMLInputElement>("minconf");
const minConfLabelEl = el<HTMLSpanElement>("minconf-label");

let state: SessionState = initialState();
let lastCandidates: Candidate[] = [];
let lastLatencyUs: number | null = null;

const client = new ServiceClient(originEl.value);

const scheduler = new SuggestScheduler<SuggestRequest, SuggestResponse>(
  (req) => client.suggest(req, inspectorEl.open ? INSPECTOR_TOPK : 0),
  (res) => {
    state = applyResponse(state, res.suggestion);
    lastCandidates = res.candidates ?? [];
    lastLatencyUs = res.latency_us;
    render();
  },
  () => {
    // Request failed: clear the ghost, the next keystroke retries.
    state = dismiss(state);
    render();
  },
);

function entropyStop(): number | null {
  return ENTROPY_STOPS[Number(entropyEl.value)] ?? null;
}

function buildRequest(): SuggestRequest {
  const req: SuggestRequest = {
    prefix: state.draft,
    context: state.conversation,
    model: modelEl.value,
    rerank: rerankEl.checked,
  };
  const threshold = entropyStop();
  if (threshold !== null) {
    req.stop = { kind: "entropy", threshold };
  }
  if (Number(minConfEl.value) > MIN_CONF_OFF) {
    req.min_confidence = Number(minConfEl.value);
  }
  return req;
}

function requestSuggestion(): void {
  if (state.draft === "") {
    scheduler.cancel();
    return;
  }
  scheduler.schedule(buildRequest());
}

function onKeyDown(event: KeyboardEvent): void {
  if (event.key === "Tab") {
    event.preventDefault();
    state = accept(state);
    requestSuggestion();
  } else if (event.key === "Escape") {
    state = dismiss(state);
    scheduler.cancel();
  } else if (event.key === "Backspace") {
    state = backspace(state);
    requestSuggestion();
  } else if (event.key === "Enter") {
    state = commitTurn(state);
    scheduler.cancel();
  } else if (event.key.length === 1 && !event.ctrlKey && !event.metaKey) {
    event.preventDefault();
    state = keystroke(state, event.key);
    requestSuggestion();
  } else {
    return;
  }
  render();
}

function render(): void {
  typedEl.textContent = state.draft;
  ghostEl.textContent = state.ghost ?? "";

  conversationEl.replaceChildren(
    ...state.conversation.map((turn) => {
      const li = document.createElement("li");
      li.textContent = turn;
      return li;
    }),
  );

  el<HTMLSpanElement>("stat-typed").textContent = String(state.keystrokesTyped);
  el<HTMLSpanElement>("stat-accepted").textContent = String(state.charsAccepted);
  el<HTMLSpanElement>("stat-shown").textContent = String(state.suggestionsShown);
  el<HTMLSpanElement>("stat-taken").textContent = String(state.suggestionsAccepted);
  el<HTMLSpanElement>("stat-tes").textContent = formatTes(sessionTes(state));
  statusEl.textContent =
    lastLatencyUs === null ? "" : `last suggest ${(lastLatencyUs / 1000).toFixed(1)} ms`;

  candidatesEl.replaceChildren(
    ...lastCandidates.map((cand) => {
      const li = document.createElement("li");
      li.textContent = `${JSON.stringify(cand.text)}  score ${cand.score.toFixed(4)}  ${cand.source}`;
      return li;
    }),
  );
}

async function loadModels(): Promise<void> {
  try {
    const body = await client.models();
    modelEl.replaceChildren(
      ...body.models.map((name) => {
        const option = document.createElement("option");
        option.value = name;
        option.textContent = name;
        return option;
      }),
    );
    statusEl.textContent = `connected, models: ${body.models.join(", ")}`;
  } catch {
    statusEl.textContent = `cannot reach ${client.origin}`;
  }
}

originEl.addEventListener("change", () => {
  client.origin = originEl.value;
  void loadModels();
});
entropyEl.addEventListener("input", () => {
  const threshold = entropyStop();
  entropyLabelEl.textContent = threshold === null ? "off" : String(threshold);
  requestSuggestion();
});
minConfEl.addEventListener("input", () => {
  const value = Number(minConfEl.value);
  minConfLabelEl.textContent = value > MIN_CONF_OFF ? value.toFixed(1) : "off";
  requestSuggestion();
});
modelEl.addEventListener("change", requestSuggestion);
rerankEl.addEventListener("change", requestSuggestion);
inspectorEl.addEventListener("toggle", requestSuggestion);

composerEl.addEventListener("keydown", onKeyDown);
composerEl.focus();
render();
void loadModels();
