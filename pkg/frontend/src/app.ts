/** Hash-routed single-page app over the judge API. */

import { ApiClient } from "./api.js";
import { el } from "./format.js";
import { ClientSession } from "./session.js";
import { createGroupsPage } from "./views/groups.js";
import { createLoginPage } from "./views/login.js";
import { createProblemList } from "./views/problems.js";
import { createProblemPage } from "./views/problem.js";

export function startApp(container: HTMLElement, api = new ApiClient("")): void {
  const session = new ClientSession(api);
  const outlet = el("main", { class: "outlet" });
  const nav = el("nav", { class: "topnav" });

  function renderNav(): void {
    const links: (Node | string)[] = [
      el("a", { href: "#/problems" }, "Problems"),
      " ",
      el("a", { href: "#/groups" }, "Groups"),
      " ",
    ];
    if (session.signedIn) {
      const logout = el("button", { class: "logout-button" }, `Sign out (${session.username})`);
      logout.addEventListener("click", () => void session.logout().then(route));
      links.push(logout);
    } else {
      links.push(el("a", { href: "#/login", class: "login-link" }, "Sign in"));
    }
    nav.replaceChildren(...links);
  }

  session.onChange(renderNav);

  async function route(): Promise<void> {
    renderNav();
    const hash = window.location.hash || "#/problems";
    const problemMatch = /^#\/problems\/([^/]+)$/.exec(hash);
    try {
      if (hash === "#/login") {
        const page = createLoginPage(api, session, () => {
          window.location.hash = "#/problems";
        });
        outlet.replaceChildren(page.root);
        await page.load();
      } else if (hash === "#/groups") {
        const page = createGroupsPage(api, session);
        outlet.replaceChildren(page.root);
        await page.load();
      } else if (problemMatch) {
        const page = createProblemPage(api, session, decodeURIComponent(problemMatch[1]));
        outlet.replaceChildren(page.root);
        await page.load();
      } else {
        const page = createProblemList(api);
        outlet.replaceChildren(page.root);
        await page.load();
      }
    } catch (err) {
      outlet.replaceChildren(
        el("p", { class: "error" }, `failed to load this view: ${(err as Error).message}`),
      );
    }
  }

  window.addEventListener("hashchange", () => void route());
  container.replaceChildren(el("h1", { class: "brand" }, "Energy Judge"), nav, outlet);
  void route();
}

declare global {
  interface Window {
    __cmbStarted?: boolean;
  }
}

if (typeof document !== "undefined" && document.getElementById("app") && !window.__cmbStarted) {
  window.__cmbStarted = true;
  startApp(document.getElementById("app") as HTMLElement);
}
