/** UI state machine: one in-flight query at a time, results shown only when idle. */

import { ApiClient, ApiError, QueryResponse } from "./api.js";
import { QueryPreview, renderError, renderPreview, renderResults } from "./render.js";

export type UiState =
  | { status: "idle"; response?: QueryResponse; preview?: QueryPreview }
  | { status: "loading"; preview: QueryPreview }
  | { status: "error"; message: string; retriable: boolean; preview?: QueryPreview };

export interface AppElements {
  output: HTMLElement;
  validation: HTMLElement;
}

type Submission =
  | { kind: "text"; text: string }
  | { kind: "image"; file: File };

export class App {
  state: UiState = { status: "idle" };
  k = 10;

  private inflight: AbortController | null = null;
  private lastSubmission: Submission | null = null;

  constructor(
    private client: ApiClient,
    private elements: AppElements,
  ) {}

  submitText(raw: string): Promise<void> {
    const text = raw.trim();
    if (!text) {
      // Client-side check: never bother the service with an empty query.
      this.elements.validation.textContent = "enter a description first";
      return Promise.resolve();
    }
    this.elements.validation.textContent = "";
    return this.run({ kind: "text", text });
  }

  submitImage(file: File): Promise<void> {
    this.elements.validation.textContent = "";
    return this.run({ kind: "image", file });
  }

  retry(): Promise<void> {
    if (!this.lastSubmission) return Promise.resolve();
    return this.run(this.lastSubmission);
  }

  private previewOf(submission: Submission): QueryPreview {
    if (submission.kind === "text") return { kind: "text", text: submission.text };
    const canPreview = typeof URL.createObjectURL === "function";
    return {
      kind: "image",
      objectUrl: canPreview ? URL.createObjectURL(submission.file) : undefined,
    };
  }

  private async run(submission: Submission): Promise<void> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.lastSubmission = submission;

    const preview = this.previewOf(submission);
    this.setState({ status: "loading", preview });

    let response: QueryResponse;
    try {
      response =
        submission.kind === "text"
          ? await this.client.queryText(submission.text, this.k, controller.signal)
          : await this.client.queryImage(submission.file, this.k, controller.signal);
    } catch (err) {
      if (controller.signal.aborted) return; // superseded by a newer submission
      const apiErr = err instanceof ApiError ? err : null;
      this.setState({
        status: "error",
        message: apiErr ? apiErr.message : String(err),
        retriable: apiErr ? apiErr.retriable : false,
        preview,
      });
      return;
    }
    if (controller.signal.aborted) return;
    this.inflight = null;
    this.setState({ status: "idle", response, preview });
  }

  setState(state: UiState): void {
    this.state = state;
    this.render();
  }

  private render(): void {
    const { output } = this.elements;
    output.replaceChildren();
    if (this.state.preview) output.appendChild(renderPreview(this.state.preview));

    switch (this.state.status) {
      case "loading":
        output.appendChild(spinner());
        break;
      case "error": {
        const banner = renderError(this.state.message, this.state.retriable);
        banner.querySelector("button.retry-button")?.addEventListener("click", () => {
          void this.retry();
        });
        output.appendChild(banner);
        break;
      }
      case "idle":
        if (this.state.response) {
          output.appendChild(renderResults(this.state.response, this.client));
        }
        break;
    }
  }
}

function spinner(): HTMLElement {
  const node = document.createElement("p");
  node.className = "loading-indicator";
  node.textContent = "searching…";
  return node;
}
