// Shareable view state: everything needed to reproduce what the user sees
// lives in the URL query string and round-trips without loss.

export interface ViewState {
  view: "browse" | "detail" | "coverage";
  country: string;
  cofog: string;
  type: string;
  q: string;
  opportunity: string;
  institution: string;
  cursor: string;
  scope: string; // coverage dashboard COFOG scope ("" = all)
}

export const DEFAULT_STATE: ViewState = {
  view: "browse",
  country: "",
  cofog: "",
  type: "",
  q: "",
  opportunity: "",
  institution: "",
  cursor: "",
  scope: "",
};

const KEYS: [keyof ViewState, string][] = [
  ["view", "view"],
  ["country", "country"],
  ["cofog", "cofog"],
  ["type", "type"],
  ["q", "q"],
  ["opportunity", "opp"],
  ["institution", "inst"],
  ["cursor", "cursor"],
  ["scope", "scope"],
];

export function serializeState(state: ViewState): string {
  const params = new URLSearchParams();
  for (const [key, param] of KEYS) {
    const value = state[key];
    if (value !== DEFAULT_STATE[key]) {
      params.set(param, value);
    }
  }
  const text = params.toString();
  return text ? `?${text}` : "";
}

export function parseState(search: string): ViewState {
  const params = new URLSearchParams(search.startsWith("?") ? search.slice(1) : search);
  const state: ViewState = { ...DEFAULT_STATE };
  for (const [key, param] of KEYS) {
    const value = params.get(param);
    if (value === null) continue;
    if (key === "view") {
      if (value === "browse" || value === "detail" || value === "coverage") {
        state.view = value;
      }
    } else {
      state[key] = value;
    }
  }
  return state;
}
