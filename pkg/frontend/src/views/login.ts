/** Sign-in / register form. */

import { ApiClient } from "../api.js";
import { el } from "../format.js";
import { ClientSession } from "../session.js";

export function createLoginPage(
  api: ApiClient,
  session: ClientSession,
  onDone: () => void,
): { root: HTMLElement; load: () => Promise<void> } {
  const root = el("div", { class: "login-page" });

  async function load(): Promise<void> {
    const username = el("input", { type: "text", placeholder: "username", class: "login-username" }) as HTMLInputElement;
    const password = el("input", {
      type: "password",
      placeholder: "password",
      class: "login-password",
    }) as HTMLInputElement;
    const errorBox = el("p", { class: "error", hidden: "hidden" });

    function fail(message: string): void {
      errorBox.textContent = message;
      errorBox.removeAttribute("hidden");
    }

    const loginButton = el("button", { class: "login-button" }, "Sign in");
    loginButton.addEventListener("click", () => {
      session
        .login(username.value.trim(), password.value)
        .then(onDone)
        .catch((err) => fail((err as Error).message));
    });

    const registerButton = el("button", { class: "register-button" }, "Register");
    registerButton.addEventListener("click", () => {
      api
        .register(username.value.trim(), password.value)
        .then(() => session.login(username.value.trim(), password.value))
        .then(onDone)
        .catch((err) => fail((err as Error).message));
    });

    root.replaceChildren(
      el("h2", {}, "Sign in"),
      errorBox,
      el("div", { class: "login-form" }, username, password, loginButton, registerButton),
    );
  }

  return { root, load };
}
