/**
 * DOM rendering helpers. Pure formatting: every figure comes straight
 * from an API payload, with percentages produced only at display time.
 */

import type { PredictedAnswer, QuestionPayload } from "./api.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function formatPercent(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

export function formatEntropy(h: number): string {
  return h.toFixed(4);
}

/** Answer buttons: boolean questions read as incorrect/correct, points
 * questions as the 0..max point labels the blueprint declares. */
export function optionLabels(question: QuestionPayload): string[] {
  if (question.scale === "boolean") {
    return ["incorrect", "correct"];
  }
  return question.states.map((s) => `${s} pt`);
}

export function renderQuestionCard(
  question: QuestionPayload,
  step: number,
  onPick: (state1Based: number) => void,
): HTMLElement {
  const card = el("div", "question-card");
  card.append(el("div", "question-step", `Question ${step + 1}`));
  card.append(el("h2", "question-text", question.text));
  const row = el("div", "options");
  optionLabels(question).forEach((label, i) => {
    const button = el("button", "option", label);
    button.dataset.state = String(i + 1);
    button.addEventListener("click", () => onPick(i + 1));
    row.append(button);
  });
  card.append(row);
  return card;
}

export function renderPosteriorBars(
  posteriors: Record<string, number[]>,
): HTMLElement {
  const wrap = el("div", "posteriors");
  for (const [skill, probs] of Object.entries(posteriors)) {
    const block = el("div", "skill-block");
    block.append(el("div", "skill-name", skill));
    probs.forEach((p, i) => {
      const row = el("div", "bar-row");
      row.append(el("span", "bar-label", `state ${i + 1}`));
      const track = el("div", "bar-track");
      const fill = el("div", "bar-fill");
      fill.style.width = `${p * 100}%`;
      track.append(fill);
      row.append(track);
      const value = el("span", "bar-value", formatPercent(p));
      value.dataset.raw = String(p);
      row.append(value);
      block.append(row);
    });
    wrap.append(block);
  }
  return wrap;
}

export function renderEntropyTrace(trace: number[]): HTMLElement {
  const wrap = el("div", "entropy-trace");
  wrap.append(el("div", "trace-title", "Entropy by step"));
  const list = el("ol", "trace-list");
  list.start = 0;
  trace.forEach((h) => {
    const item = el("li", "trace-item", formatEntropy(h));
    item.dataset.raw = String(h);
    list.append(item);
  });
  wrap.append(list);
  return wrap;
}

export function renderPredictedTable(
  predicted: Record<string, PredictedAnswer>,
): HTMLElement {
  const table = el("table", "predicted");
  const head = el("tr");
  for (const title of ["question", "predicted state", "p(state)", "tie"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const [qid, pred] of Object.entries(predicted)) {
    const row = el("tr");
    row.append(el("td", undefined, qid));
    row.append(el("td", undefined, String(pred.state)));
    const prob = pred.probabilities[pred.state - 1] ?? 0;
    const cell = el("td", undefined, formatPercent(prob));
    cell.dataset.raw = String(prob);
    row.append(cell);
    row.append(el("td", undefined, pred.tie ? "yes" : ""));
    table.append(row);
  }
  return table;
}

export function renderBanner(message: string, onRetry?: () => void): HTMLElement {
  const banner = el("div", "banner", message);
  if (onRetry) {
    const button = el("button", "retry", "Retry");
    button.addEventListener("click", onRetry);
    banner.append(button);
  }
  return banner;
}
