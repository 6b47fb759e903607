/** Entry point: wires the static page to the state machine. */

import { ApiClient } from "./api.js";
import { App } from "./app.js";

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node as T;
}

export function bootstrap(client: ApiClient = new ApiClient()): App {
  const app = new App(client, {
    output: byId("output"),
    validation: byId("validation"),
  });

  const textInput = byId<HTMLInputElement>("text-input");
  const fileInput = byId<HTMLInputElement>("file-input");
  const kInput = byId<HTMLInputElement>("k-input");
  const form = byId<HTMLFormElement>("query-form");
  const galleryNote = byId("gallery-note");

  kInput.value = String(app.k);
  const syncK = () => {
    const parsed = Number.parseInt(kInput.value, 10);
    if (Number.isFinite(parsed) && parsed >= 1) app.k = parsed;
  };
  kInput.addEventListener("change", syncK);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    syncK();
    const file = fileInput.files?.[0];
    if (file) {
      void app.submitImage(file);
      fileInput.value = "";
    } else {
      void app.submitText(textInput.value);
    }
  });

  client
    .health()
    .then((health) => {
      kInput.max = String(health.max_k);
      app.k = Math.min(app.k, health.max_k);
      kInput.value = String(app.k);
      galleryNote.textContent = `${health.gallery_size} items · ${health.dim}-d vectors`;
    })
    .catch(() => {
      galleryNote.textContent = "service unreachable";
    });

  return app;
}

if (typeof document !== "undefined" && document.getElementById("query-form")) {
  bootstrap();
}
