/** Problem list: the landing view. */

import { ApiClient } from "../api.js";
import { el } from "../format.js";

export function createProblemList(api: ApiClient): { root: HTMLElement; load: () => Promise<void> } {
  const root = el("div", { class: "problem-list" });

  async function load(): Promise<void> {
    const problems = await api.listProblems();
    const rows = problems.map((p) =>
      el(
        "li",
        { class: "problem-item" },
        el("a", { href: `#/problems/${encodeURIComponent(p.id)}`, class: "problem-link" }, p.title),
        el(
          "span",
          { class: "problem-meta" },
          ` — ${p.test_case_count} tests, ${p.time_limit}s limit` +
            (p.goodness_label ? `, ranked with ${p.goodness_label}` : ""),
        ),
      ),
    );
    root.replaceChildren(
      el("h2", {}, "Problems"),
      rows.length ? el("ul", { class: "problems" }, ...rows) : el("p", {}, "No problems published."),
    );
  }

  return { root, load };
}
