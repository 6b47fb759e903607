/** DOM builders for the results view. Pure functions of the response payload. */

import { ApiClient, Candidate, QueryResponse, RankedResult } from "./api.js";

export const PLACEHOLDER_SRC =
  "data:image/svg+xml," +
  encodeURIComponent(
    '<svg xmlns="http://www.w3.org/2000/svg" width="160" height="160">' +
      '<rect width="100%" height="100%" fill="#2a2f36"/>' +
      '<text x="50%" y="50%" fill="#717a86" font-size="13" text-anchor="middle" dominant-baseline="middle">no image</text>' +
      "</svg>",
  );

export interface QueryPreview {
  kind: "text" | "image";
  text?: string;
  objectUrl?: string;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** What was asked, shown above everything else so results have context. */
export function renderPreview(preview: QueryPreview): HTMLElement {
  const box = el("section", "query-preview");
  box.appendChild(el("h2", "panel-title", "Query"));
  if (preview.kind === "text") {
    box.appendChild(el("blockquote", "preview-text", preview.text ?? ""));
  } else {
    const img = el("img", "preview-image");
    img.src = preview.objectUrl ?? PLACEHOLDER_SRC;
    img.alt = "query image";
    box.appendChild(img);
  }
  return box;
}

export function renderCandidates(candidates: Candidate[]): HTMLElement {
  const panel = el("section", "candidates");
  panel.appendChild(el("h2", "panel-title", "Candidate classes"));
  const list = el("ol", "candidate-list");
  // Server order is authoritative — append as received.
  for (const c of candidates) {
    const item = el("li", "candidate");
    item.appendChild(el("span", "candidate-class", c.class));
    item.appendChild(el("span", "candidate-score", c.score.toFixed(4)));
    item.appendChild(el("span", "candidate-support", `${c.support} hit${c.support === 1 ? "" : "s"}`));
    list.appendChild(item);
  }
  panel.appendChild(list);
  return panel;
}

function renderCard(result: RankedResult, client: ApiClient): HTMLElement {
  const card = el("article", "card");
  card.dataset.rank = String(result.rank);

  const img = el("img", "card-image");
  img.src = client.imageUrl(result.id);
  img.alt = result.caption ?? result.id;
  img.onerror = () => {
    img.onerror = null;
    img.src = PLACEHOLDER_SRC;
  };
  card.appendChild(img);

  const meta = el("div", "card-meta");
  meta.appendChild(el("span", "card-rank", `#${result.rank}`));
  meta.appendChild(el("span", "card-class", result.class));
  meta.appendChild(el("span", "card-score", result.score.toFixed(4)));
  card.appendChild(meta);
  if (result.caption) card.appendChild(el("p", "card-caption", result.caption));
  return card;
}

/** Result grid in the exact order the service ranked them. */
export function renderResults(response: QueryResponse, client: ApiClient): HTMLElement {
  const section = el("section", "results");
  if (response.results.length === 0) {
    section.appendChild(el("p", "empty-state", "no matches"));
    return section;
  }
  section.appendChild(renderCandidates(response.candidates));
  const grid = el("div", "card-grid");
  for (const result of response.results) {
    grid.appendChild(renderCard(result, client));
  }
  section.appendChild(grid);
  const ms = response.timing.search_ms.toFixed(1);
  section.appendChild(
    el("p", "timing", `${response.results.length} of ${response.gallery_count} gallery items · ${ms} ms`),
  );
  return section;
}

export function renderError(message: string, retriable: boolean): HTMLElement {
  const banner = el("div", "error-banner");
  banner.setAttribute("role", "alert");
  banner.appendChild(el("span", "error-message", message));
  if (retriable) {
    const retry = el("button", "retry-button", "Retry");
    retry.type = "button";
    banner.appendChild(retry);
  }
  return banner;
}
