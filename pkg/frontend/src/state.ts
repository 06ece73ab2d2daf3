// Session state machine for the inline ghosting demo.
//
// Everything here is a pure function from state to state; the DOM layer
// dispatches events into these reducers and re-renders the result, so every
// invariant is testable without a browser.  Ghost text only ever enters the
// draft through acceptClicked, and each draft character remembers whether it
// was typed or accepted so the counters stay exact even across backspace.

export type CharOrigin = "typed" | "accepted";

export interface SessionState {
  /** Committed turns, oldest first; sent as request context. */
  conversation: string[];
  draft: string;
  /** Provenance of each draft character, aligned with `draft`. */
  draftOrigins: CharOrigin[];
  /** Current suggestion rendered after the caret, or null. */
  ghost: string | null;
  keystrokesTyped: number;
  charsAccepted: number;
  suggestionsShown: number;
  suggestionsAccepted: number;
}

export function initialState(): SessionState {
  return {
    conversation: [],
    draft: "",
    draftOrigins: [],
    ghost: null,
    keystrokesTyped: 0,
    charsAccepted: 0,
    suggestionsShown: 0,
    suggestionsAccepted: 0,
  };
}

/** Append one printable character.  A character matching the head of the
 * ghost keeps the remainder of the ghost alive; anything else dismisses it. */
export function keystroke(state: SessionState, key: string): SessionState {
  if (key.length !== 1) return state;
  let ghost = null;
  if (state.ghost !== null && state.ghost.startsWith(key)) {
    ghost = state.ghost.length > 1 ? state.ghost.slice(1) : null;
  }
  return {
    ...state,
    draft: state.draft + key,
    draftOrigins: [...state.draftOrigins, "typed"],
    ghost,
    keystrokesTyped: state.keystrokesTyped + 1,
  };
}

/** Tab: commit the ghost into the draft.  With no ghost this is a no-op and
 * in particular does not insert a tab character. */
export function accept(state: SessionState): SessionState {
  if (state.ghost === null) return state;
  const ghost = state.ghost;
  return {
    ...state,
    draft: state.draft + ghost,
    draftOrigins: [
      ...state.draftOrigins,
      ...Array.from(ghost, (): CharOrigin => "accepted"),
    ],
    ghost: null,
    charsAccepted: state.charsAccepted + ghost.length,
    suggestionsAccepted: state.suggestionsAccepted + 1,
  };
}

/** Escape: dismiss the ghost, leave the draft alone. */
export function dismiss(state: SessionState): SessionState {
  return state.ghost === null ? state : { ...state, ghost: null };
}

/** Remove the last draft character and return its count to the matching
 * counter, so committed content always reconciles with the counters. */
export function backspace(state: SessionState): SessionState {
  if (state.draft === "") {
    return dismiss(state);
  }
  const origin = state.draftOrigins[state.draftOrigins.length - 1];
  return {
    ...state,
    draft: state.draft.slice(0, -1),
    draftOrigins: state.draftOrigins.slice(0, -1),
    ghost: null,
    keystrokesTyped: state.keystrokesTyped - (origin === "typed" ? 1 : 0),
    charsAccepted: state.charsAccepted - (origin === "accepted" ? 1 : 0),
  };
}

/** Enter: move a non-empty draft into the conversation. */
export function commitTurn(state: SessionState): SessionState {
  if (state.draft === "") return state;
  return {
    ...state,
    conversation: [...state.conversation, state.draft],
    draft: "",
    draftOrigins: [],
    ghost: null,
  };
}

/** Install a suggestion that survived the request-id guard.  An empty
 * suggestion is an abstention and renders nothing. */
export function applyResponse(state: SessionState, suggestion: string): SessionState {
  if (suggestion === "") {
    return { ...state, ghost: null };
  }
  return {
    ...state,
    ghost: suggestion,
    suggestionsShown: state.suggestionsShown + 1,
  };
}

/** Live typing-effort-saved ratio; null until something was typed or accepted. */
export function sessionTes(state: SessionState): number | null {
  const denominator = state.keystrokesTyped + state.charsAccepted;
  if (denominator === 0) return null;
  return 1 - state.keystrokesTyped / denominator;
}

export function formatTes(tes: number | null): string {
  return tes === null ? "n/a" : `${(100 * tes).toFixed(1)}%`;
}
