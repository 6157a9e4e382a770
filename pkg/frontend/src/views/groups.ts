/** Group manager: list public groups, join, create with selected problems. */

import { ApiClient } from "../api.js";
import { el } from "../format.js";
import { ClientSession } from "../session.js";

export function createGroupsPage(
  api: ApiClient,
  session: ClientSession,
): { root: HTMLElement; load: () => Promise<void> } {
  const root = el("div", { class: "groups-page" });

  async function load(): Promise<void> {
    const groups = await api.listGroups();
    const list = el("ul", { class: "group-list" });
    for (const group of groups) {
      const item = el(
        "li",
        { class: "group-item", "data-id": String(group.id) },
        el("strong", {}, group.name),
        el("span", {}, ` — ${group.problem_ids.length} problems`),
      );
      if (session.signedIn && !group.joined) {
        const join = el("button", { class: "join-button" }, "Join");
        join.addEventListener("click", () => {
          api
            .joinGroup(group.id)
            .then(load)
            .catch((err) => showError(`join failed: ${(err as Error).message}`));
        });
        item.append(" ", join);
      } else if (group.joined) {
        item.append(" ", el("em", { class: "joined-tag" }, "joined"));
      }
      list.append(item);
    }

    const errorBox = el("p", { class: "error", hidden: "hidden" });
    function showError(message: string): void {
      errorBox.textContent = message;
      errorBox.removeAttribute("hidden");
    }

    const children: (Node | string)[] = [el("h2", {}, "Groups"), errorBox, list];
    if (session.signedIn) {
      const nameInput = el("input", { type: "text", placeholder: "group name", class: "group-name" }) as HTMLInputElement;
      const problemsInput = el("input", {
        type: "text",
        placeholder: "problem ids, comma separated",
        class: "group-problems",
      }) as HTMLInputElement;
      const visibilitySelect = el("select", { class: "group-visibility" });
      visibilitySelect.append(
        el("option", { value: "public" }, "public"),
        el("option", { value: "unlisted" }, "unlisted"),
      );
      const createButton = el("button", { class: "create-group" }, "Create group");
      createButton.addEventListener("click", () => {
        const ids = problemsInput.value
          .split(",")
          .map((s) => s.trim())
          .filter(Boolean);
        api
          .createGroup(nameInput.value.trim(), visibilitySelect.value, ids)
          .then(load)
          .catch((err) => showError(`create failed: ${(err as Error).message}`));
      });
      children.push(
        el(
          "section",
          { class: "create-group-form" },
          el("h3", {}, "New group"),
          nameInput,
          problemsInput,
          visibilitySelect,
          createButton,
        ),
      );
    }
    root.replaceChildren(...children);
  }

  return { root, load };
}
