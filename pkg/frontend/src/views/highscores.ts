/**
 * Sortable highscore table. Clicking Time / Energy / EDP refetches with that
 * sort key; a scope selector switches between the public list and joined
 * groups. Row order always mirrors the API response: no client-side sorting.
 */

import { ApiClient, GroupView, HighscoreTable, SortKey } from "../api.js";
import { el, fmtEdp, fmtGoodness, fmtJoules, fmtSeconds } from "../format.js";

export interface HighscoreController {
  root: HTMLElement;
  refresh(): Promise<void>;
  setSort(sort: SortKey): Promise<void>;
  setScope(scope: string): Promise<void>;
  readonly state: { scope: string; sort: SortKey };
}

export function createHighscoreView(
  api: ApiClient,
  problemId: string,
  joinedGroups: GroupView[],
): HighscoreController {
  const state = { scope: "public", sort: "edp" as SortKey };
  const root = el("section", { class: "highscores" });

  async function render(): Promise<void> {
    let table: HighscoreTable;
    try {
      table = await api.highscores(problemId, state.scope, state.sort);
    } catch (err) {
      root.replaceChildren(
        el("p", { class: "error" }, `could not load highscores: ${(err as Error).message}`),
      );
      return;
    }

    const scopeSelect = el("select", { class: "scope-select", "aria-label": "Choose Highscore" });
    const addOption = (label: string, value: string) => {
      const option = el("option", { value }, label);
      if (state.scope === value) option.setAttribute("selected", "selected");
      scopeSelect.append(option);
    };
    addOption("Public", "public");
    for (const group of joinedGroups) {
      addOption(group.name, `group:${group.id}`);
    }
    scopeSelect.addEventListener("change", () => void setScope(scopeSelect.value));

    const header = el(
      "div",
      { class: "highscore-header" },
      el("h3", {}, "Highscores"),
      el("label", {}, "Choose Highscore ", scopeSelect),
    );

    const withGoodness = table.goodness_label !== null;
    const headRow = el("tr", {}, el("th", {}, "#"), el("th", {}, "User"));
    const sortable: [string, SortKey][] = [
      ["Time (s)", "time"],
      ["Energy (J)", "energy"],
      ["EDP (J·s)", "edp"],
    ];
    for (const [label, key] of sortable) {
      const th = el("th", {
        class: `sortable${state.sort === key ? " sorted" : ""}`,
        "data-sort": key,
        role: "button",
      });
      th.textContent = state.sort === key ? `${label} ▲` : label;
      th.addEventListener("click", () => void setSort(key));
      headRow.append(th);
    }
    if (withGoodness) headRow.append(el("th", {}, table.goodness_label ?? "goodness"));
    headRow.append(el("th", {}, "Filename"));

    const tbody = el("tbody", {});
    table.entries.forEach((entry, i) => {
      const row = el(
        "tr",
        { class: "score-row", "data-submission": String(entry.submission_id) },
        el("td", {}, String(i + 1)),
        el("td", { class: "cell-user" }, entry.username),
        el("td", { class: "cell-time" }, fmtSeconds(entry.time)),
        el("td", { class: "cell-energy" }, fmtJoules(entry.energy)),
        el("td", { class: "cell-edp" }, fmtEdp(entry.edp)),
      );
      if (withGoodness) row.append(el("td", { class: "cell-goodness" }, fmtGoodness(entry.goodness)));
      row.append(el("td", { class: "cell-filename" }, entry.filename));
      tbody.append(row);
    });

    const content =
      table.entries.length === 0
        ? el("p", { class: "empty-state" }, "No public results yet.")
        : el("table", { class: "score-table" }, el("thead", {}, headRow), tbody);

    root.replaceChildren(header, content);
  }

  async function setSort(sort: SortKey): Promise<void> {
    state.sort = sort;
    await render();
  }

  async function setScope(scope: string): Promise<void> {
    state.scope = scope;
    await render();
  }

  return { root, refresh: render, setSort, setScope, state };
}
