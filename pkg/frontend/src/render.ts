/** DOM construction and update for the three console panels:
 * feature entry form, live pin gauges, and the event/notification feed. */

import type { PredictResponse } from "./api.js";
import type { DashboardState } from "./state.js";

export const CLASS_LABELS = ["low RUL", "mid RUL", "high RUL"];

export interface FeatureRange {
  min: number;
  max: number;
}

export interface ConsoleHandles {
  form: HTMLFormElement;
  inputs: Map<string, HTMLInputElement>;
  fieldErrors: Map<string, HTMLElement>;
  submit: HTMLButtonElement;
  prediction: HTMLElement;
  pinsBody: HTMLElement;
  relayIndicator: HTMLElement;
  manualBadge: HTMLElement;
  banner: HTMLElement;
  connectionBanner: HTMLElement;
  feed: HTMLElement;
  errorBox: HTMLElement;
  relayOn: HTMLButtonElement;
  relayOff: HTMLButtonElement;
  release: HTMLButtonElement;
  tokenInput: HTMLInputElement;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document, tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function buildConsole(root: HTMLElement, featureNames: string[]): ConsoleHandles {
  const doc = root.ownerDocument;
  root.textContent = "";

  const connectionBanner = el(doc, "div", "banner banner-offline hidden",
    "Disconnected from service - retrying");
  root.appendChild(connectionBanner);
  const banner = el(doc, "div", "banner banner-charge hidden");
  root.appendChild(banner);

  const layout = el(doc, "div", "layout");
  root.appendChild(layout);

  // feature entry panel
  const formPanel = el(doc, "section", "panel");
  formPanel.appendChild(el(doc, "h2", undefined, "Feed a cycle"));
  const form = el(doc, "form");
  form.id = "feature-form";
  const inputs = new Map<string, HTMLInputElement>();
  const fieldErrors = new Map<string, HTMLElement>();
  for (const name of featureNames) {
    const row = el(doc, "label", "field");
    row.appendChild(el(doc, "span", "field-name", name));
    const input = el(doc, "input");
    input.name = name;
    input.setAttribute("inputmode", "decimal");
    row.appendChild(input);
    const err = el(doc, "span", "field-error");
    row.appendChild(err);
    form.appendChild(row);
    inputs.set(name, input);
    fieldErrors.set(name, err);
  }
  const submit = el(doc, "button", "primary", "Predict");
  submit.type = "submit";
  form.appendChild(submit);
  formPanel.appendChild(form);
  const prediction = el(doc, "div", "prediction");
  prediction.id = "prediction";
  formPanel.appendChild(prediction);
  layout.appendChild(formPanel);

  // live pins panel
  const pinsPanel = el(doc, "section", "panel");
  const pinsHeader = el(doc, "h2", undefined, "Live pins");
  pinsPanel.appendChild(pinsHeader);
  const relayRow = el(doc, "div", "relay-row");
  const relayIndicator = el(doc, "span", "relay-indicator unknown", "relay —");
  relayIndicator.id = "relay-indicator";
  relayRow.appendChild(relayIndicator);
  const manualBadge = el(doc, "span", "badge hidden", "MANUAL");
  manualBadge.id = "manual-badge";
  relayRow.appendChild(manualBadge);
  const relayOn = el(doc, "button", undefined, "Relay on");
  const relayOff = el(doc, "button", undefined, "Relay off");
  const release = el(doc, "button", undefined, "Release");
  relayOn.id = "relay-on";
  relayOff.id = "relay-off";
  release.id = "relay-release";
  for (const button of [relayOn, relayOff, release]) relayRow.appendChild(button);
  pinsPanel.appendChild(relayRow);
  const pinsBody = el(doc, "div", "pins");
  pinsBody.id = "pins";
  pinsPanel.appendChild(pinsBody);
  layout.appendChild(pinsPanel);

  // feed panel
  const feedPanel = el(doc, "section", "panel");
  feedPanel.appendChild(el(doc, "h2", undefined, "Events"));
  const tokenRow = el(doc, "label", "field");
  tokenRow.appendChild(el(doc, "span", "field-name", "API token"));
  const tokenInput = el(doc, "input");
  tokenInput.id = "token";
  tokenInput.type = "password";
  tokenRow.appendChild(tokenInput);
  feedPanel.appendChild(tokenRow);
  const errorBox = el(doc, "div", "error-box hidden");
  errorBox.id = "error-box";
  feedPanel.appendChild(errorBox);
  const feed = el(doc, "ul", "feed");
  feed.id = "feed";
  feedPanel.appendChild(feed);
  layout.appendChild(feedPanel);

  return {
    form, inputs, fieldErrors, submit, prediction, pinsBody, relayIndicator,
    manualBadge, banner, connectionBanner, feed, errorBox, relayOn, relayOff,
    release, tokenInput,
  };
}

export function renderFieldErrors(handles: ConsoleHandles,
                                  errors: Record<string, string>): void {
  for (const [name, box] of handles.fieldErrors) {
    box.textContent = errors[name] ?? "";
  }
}

export function renderPrediction(handles: ConsoleHandles,
                                 response: PredictResponse): void {
  const doc = handles.prediction.ownerDocument;
  handles.prediction.textContent = "";
  const headline = el(doc, "div", "prediction-class",
    `class ${response.class} (${CLASS_LABELS[response.class] ?? "?"}) - relay ${response.relay}`);
  headline.id = "prediction-class";
  handles.prediction.appendChild(headline);
  const bars = el(doc, "div", "prob-bars");
  response.probabilities.forEach((p, i) => {
    const row = el(doc, "div", "prob-row");
    row.appendChild(el(doc, "span", "prob-label", CLASS_LABELS[i] ?? `class ${i}`));
    const track = el(doc, "div", "prob-track");
    const fill = el(doc, "div", "prob-fill");
    fill.style.width = `${(p * 100).toFixed(1)}%`;
    track.appendChild(fill);
    row.appendChild(track);
    row.appendChild(el(doc, "span", "prob-value", `${(p * 100).toFixed(1)}%`));
    bars.appendChild(row);
  });
  handles.prediction.appendChild(bars);
}

export function renderPins(handles: ConsoleHandles, state: DashboardState,
                           ranges: Record<string, FeatureRange> = {},
                           pinNames: Record<string, string> = {}): void {
  const doc = handles.pinsBody.ownerDocument;
  handles.pinsBody.textContent = "";
  for (const [pin, value] of Object.entries(state.pins)) {
    const row = el(doc, "div", "pin-row");
    row.dataset.pin = pin;
    const label = pinNames[pin] ? `${pin} ${pinNames[pin]}` : pin;
    row.appendChild(el(doc, "span", "pin-label", label));
    const track = el(doc, "div", "pin-track");
    const fill = el(doc, "div", "pin-fill");
    const range = ranges[pin];
    if (value !== null && range && range.max > range.min) {
      const frac = Math.min(1, Math.max(0, (value - range.min) / (range.max - range.min)));
      fill.style.width = `${(frac * 100).toFixed(1)}%`;
    } else {
      fill.style.width = value === null ? "0%" : "100%";
    }
    track.appendChild(fill);
    row.appendChild(track);
    row.appendChild(el(doc, "span", "pin-value",
      value === null ? "—" : String(Math.round(value * 1000) / 1000)));
    handles.pinsBody.appendChild(row);
  }
}

export function renderRelay(handles: ConsoleHandles, relay: "on" | "off" | null,
                            mode?: string): void {
  handles.relayIndicator.textContent = relay === null ? "relay —" : `relay ${relay}`;
  handles.relayIndicator.className =
    `relay-indicator ${relay === "on" ? "on" : relay === "off" ? "off" : "unknown"}`;
  if (mode !== undefined) {
    handles.manualBadge.classList.toggle("hidden", mode !== "MANUAL_OVERRIDE");
  }
}

export function renderNotifications(handles: ConsoleHandles,
                                    state: DashboardState): void {
  const doc = handles.feed.ownerDocument;
  handles.feed.textContent = "";
  for (const note of state.notifications) {
    const item = el(doc, "li", `feed-item feed-${note.kind}`, note.text);
    item.dataset.eventId = String(note.id);
    handles.feed.appendChild(item);
  }
}

export function showChargeBanner(handles: ConsoleHandles): void {
  handles.banner.textContent = "Charge needed - relay switched on";
  handles.banner.classList.remove("hidden");
}

export function renderConnection(handles: ConsoleHandles,
                                 status: "connecting" | "open" | "closed"): void {
  const offline = status !== "open";
  handles.connectionBanner.classList.toggle("hidden", !offline);
  handles.submit.disabled = offline;
}

export function renderError(handles: ConsoleHandles, message: string | null): void {
  handles.errorBox.classList.toggle("hidden", message === null);
  handles.errorBox.textContent = message ?? "";
}
