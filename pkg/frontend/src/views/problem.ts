/**
 * Problem page: statement, upload control, own-submission history with live
 * status, visibility toggles, and the highscore tables.
 */

import { ApiClient, SubmissionView } from "../api.js";
import { el, fmtEdp, fmtJoules, fmtSeconds, verdictLabel } from "../format.js";
import { SubmissionPoller, isFinal } from "../poll.js";
import { ClientSession } from "../session.js";
import { createHighscoreView } from "./highscores.js";

export function createProblemPage(
  api: ApiClient,
  session: ClientSession,
  problemId: string,
): { root: HTMLElement; load: () => Promise<void> } {
  const root = el("div", { class: "problem-page" });
  const pollers: SubmissionPoller[] = [];

  function historyRow(sub: SubmissionView): HTMLTableRowElement {
    const row = el("tr", { class: "history-row", "data-id": String(sub.id) });
    renderHistoryRow(row, sub);
    return row;
  }

  function renderHistoryRow(row: HTMLTableRowElement, sub: SubmissionView): void {
    const cells: (Node | string)[] = [
      el("td", {}, String(sub.id)),
      el("td", {}, sub.filename),
      el("td", { class: "cell-status" }, sub.status),
    ];
    const result = sub.result;
    if (result && result.verdict === "accepted") {
      cells.push(
        el("td", { class: "cell-verdict verdict-accepted" }, "accepted"),
        el("td", { class: "cell-time" }, result.time !== undefined ? fmtSeconds(result.time) : ""),
        el("td", { class: "cell-energy" }, result.energy !== undefined ? fmtJoules(result.energy) : ""),
        el("td", { class: "cell-edp" }, result.edp !== undefined ? fmtEdp(result.edp) : ""),
      );
    } else if (result) {
      const detail =
        result.failed_test_index !== undefined ? ` (test ${result.failed_test_index})` : "";
      cells.push(
        el("td", { class: "cell-verdict verdict-rejected" }, verdictLabel(result.verdict) + detail),
        el("td", {}, ""),
        el("td", {}, ""),
        el("td", {}, ""),
      );
    } else {
      cells.push(el("td", { class: "cell-verdict" }, "…"), el("td", {}, ""), el("td", {}, ""), el("td", {}, ""));
    }
    cells.push(visibilityCell(sub));
    row.replaceChildren(...cells);
  }

  function visibilityCell(sub: SubmissionView): HTMLTableCellElement {
    const cell = el("td", { class: "cell-visibility" });
    if (!sub.visibility) return cell;
    const button = el(
      "button",
      { class: "visibility-toggle", "data-id": String(sub.id) },
      sub.visibility === "public" ? "Make-Private" : "Make-Public",
    );
    button.addEventListener("click", () => {
      const target = sub.visibility === "public" ? "private" : "public";
      const previous = sub.visibility;
      sub.visibility = target; // optimistic
      button.textContent = target === "public" ? "Make-Private" : "Make-Public";
      api
        .setVisibility(sub.id, target as "public" | "private")
        .then(() => highscores.refresh())
        .catch((err) => {
          sub.visibility = previous; // revert on failure
          button.textContent = previous === "public" ? "Make-Private" : "Make-Public";
          showError(`visibility change failed: ${(err as Error).message}`);
        });
    });
    cell.append(button);
    return cell;
  }

  const errorBox = el("p", { class: "error", hidden: "hidden" });

  function showError(message: string): void {
    errorBox.textContent = message;
    errorBox.removeAttribute("hidden");
  }

  const historyBody = el("tbody", { class: "history-body" });

  function watchSubmission(row: HTMLTableRowElement, id: number): void {
    const poller = new SubmissionPoller(api, id, (view) => {
      renderHistoryRow(row, view);
      if (isFinal(view.status)) void highscores.refresh();
    });
    pollers.push(poller);
    poller.start();
  }

  const fileInput = el("input", { type: "file", class: "upload-file" }) as HTMLInputElement;
  const uploadButton = el("button", { class: "upload-button" }, "Upload solution");
  const compileBox = el("pre", { class: "compile-diagnostics", hidden: "hidden" });

  uploadButton.addEventListener("click", () => {
    const file = fileInput.files?.[0];
    if (!file) {
      showError("choose a file first");
      return;
    }
    compileBox.setAttribute("hidden", "hidden");
    api
      .upload(problemId, file, "c-gcc")
      .then(async (reply) => {
        if (!reply.compile.ok) {
          // immediate feedback: no queue wait for broken sources
          compileBox.textContent = reply.compile.diagnostics;
          compileBox.removeAttribute("hidden");
        }
        const view = await api.getSubmission(reply.id);
        const row = historyRow(view);
        historyBody.prepend(row);
        if (!isFinal(view.status)) watchSubmission(row, reply.id);
      })
      .catch((err) => showError(`upload failed: ${(err as Error).message}`));
  });

  const highscores = createHighscoreView(api, problemId, []);

  async function load(): Promise<void> {
    for (const poller of pollers) poller.stop();
    pollers.length = 0;

    const problem = await api.getProblem(problemId);
    const statement = el("article", { class: "statement" });
    statement.innerHTML = renderMarkdownish(problem.statement);

    const uploadSection = session.signedIn
      ? el(
          "section",
          { class: "upload" },
          el("h3", {}, "Submit a solution"),
          fileInput,
          uploadButton,
          compileBox,
        )
      : el("p", { class: "login-hint" }, "Sign in to submit a solution.");

    const historySection = el("section", { class: "history" });
    if (session.signedIn) {
      const submissions = await api.mySubmissions(problemId);
      historyBody.replaceChildren();
      for (const sub of [...submissions].reverse()) {
        const row = historyRow(sub);
        historyBody.append(row);
        if (!isFinal(sub.status)) watchSubmission(row, sub.id);
      }
      historySection.append(
        el("h3", {}, "Your submissions"),
        el(
          "table",
          { class: "history-table" },
          el(
            "thead",
            {},
            el(
              "tr",
              {},
              el("th", {}, "#"),
              el("th", {}, "File"),
              el("th", {}, "Status"),
              el("th", {}, "Verdict"),
              el("th", {}, "Time (s)"),
              el("th", {}, "Energy (J)"),
              el("th", {}, "EDP (J·s)"),
              el("th", {}, ""),
            ),
          ),
          historyBody,
        ),
      );
    }

    const joined = session.signedIn
      ? (await api.listGroups()).filter((g) => g.joined)
      : [];
    const scoreView = createHighscoreView(api, problemId, joined);
    // keep the single refresh entry point used by toggles/uploads
    highscores.root.replaceChildren(scoreView.root);
    highscores.refresh = scoreView.refresh;
    await scoreView.refresh();

    root.replaceChildren(
      el("h2", {}, problem.title),
      el(
        "p",
        { class: "limits" },
        `time limit ${problem.time_limit}s · memory ${problem.memory_limit} MiB`,
      ),
      statement,
      el("h3", {}, "Input"),
      el("p", {}, problem.input_spec),
      el("h3", {}, "Output"),
      el("p", {}, problem.output_spec),
      errorBox,
      uploadSection,
      historySection,
      highscores.root,
    );
  }

  return { root, load };
}

/** Minimal markdown: headings and paragraphs only (statements are trusted
 * operator content, but escape anyway). */
export function renderMarkdownish(text: string): string {
  const escape = (s: string) =>
    s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
  return text
    .split(/\n{2,}/)
    .map((block) => {
      const m = /^(#{1,3})\s+(.*)$/.exec(block.trim());
      if (m) {
        const level = m[1].length + 1; // statement h1 renders as h2 on page
        return `<h${level}>${escape(m[2])}</h${level}>`;
      }
      return `<p>${escape(block.trim())}</p>`;
    })
    .join("\n");
}
