/** Entry point: mount the app and keep the session id in the URL hash so a
 * reload re-attaches to the same server-side session. */

import { ApiClient } from "./api.js";
import { renderApp } from "./dom.js";
import { SessionViewModel } from "./viewmodel.js";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app element");
  const api = new ApiClient("");
  const vm = new SessionViewModel(api);

  const hash = window.location.hash.replace(/^#/, "");
  if (hash) {
    await vm.resume(hash);
  } else {
    const params = new URLSearchParams(window.location.search);
    await vm.start(
      params.get("instance") ?? "biegelinie",
      params.get("mode") ?? "exercise",
    );
    window.location.hash = vm.sessionId;
  }
  renderApp(vm, root);
}

void boot();
