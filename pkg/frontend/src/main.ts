/** Console bootstrap: fetch model metadata, build the panels, subscribe
 * to the event stream, and wire the form and relay controls. */

import { ApiClient, ApiError } from "./api.js";
import { EventSourceFactory, EventStream } from "./events.js";
import { applyEvent, initialState } from "./state.js";
import { validateFeatures } from "./form.js";
import {
  FeatureRange,
  buildConsole,
  renderConnection,
  renderError,
  renderFieldErrors,
  renderNotifications,
  renderPins,
  renderPrediction,
  renderRelay,
  showChargeBanner,
} from "./render.js";

const PIN_FEATURE_ORDER = [
  "cycle_index", "discharge_time_s", "time_at_4p15v_s",
  "time_constant_current_s", "decrement_3p6_3p4v_s",
  "max_voltage_discharge_v", "min_voltage_charge_v", "charging_time_s",
  "total_time_s",
];

export interface BootOptions {
  api?: ApiClient;
  eventSourceFactory?: EventSourceFactory;
  retryMs?: number;
}

export async function boot(root: HTMLElement, options: BootOptions = {}): Promise<void> {
  const api = options.api ?? new ApiClient("");
  let model;
  try {
    model = await api.model();
  } catch (err) {
    root.textContent = err instanceof ApiError && err.status === 404
      ? "Service is up but no model is loaded."
      : "Cannot reach the telemetry service.";
    setTimeout(() => boot(root, options), options.retryMs ?? 3000);
    return;
  }

  const handles = buildConsole(root, model.feature_names);
  let state = initialState();

  // gauge ranges come from the training-data summary in the model file
  const ranges: Record<string, FeatureRange> = {};
  const pinNames: Record<string, string> = { V9: "class", V10: "relay" };
  const featureRanges =
    (model.metadata.feature_ranges ?? {}) as Record<string, FeatureRange>;
  PIN_FEATURE_ORDER.forEach((feature, i) => {
    pinNames[`V${i}`] = feature;
    if (featureRanges[feature]) ranges[`V${i}`] = featureRanges[feature];
  });
  ranges.V9 = { min: 0, max: 2 };
  ranges.V10 = { min: 0, max: 1 };

  const redraw = () => {
    renderPins(handles, state, ranges, pinNames);
    renderRelay(handles, state.relay);
    renderNotifications(handles, state);
  };
  redraw();

  handles.tokenInput.addEventListener("change", () => {
    api.setToken(handles.tokenInput.value || null);
  });

  handles.form.addEventListener("submit", async (submitEvent) => {
    submitEvent.preventDefault();
    const raw: Record<string, string> = {};
    for (const [name, input] of handles.inputs) raw[name] = input.value;
    const result = validateFeatures(raw);
    if (!result.ok) {
      renderFieldErrors(handles, result.errors);
      return;
    }
    renderFieldErrors(handles, {});
    try {
      const response = await api.predict(result.values);
      renderError(handles, null);
      renderPrediction(handles, response);
      renderRelay(handles, response.relay, response.mode);
    } catch (err) {
      renderError(handles, err instanceof Error ? err.message : String(err));
    }
  });

  const relayCall = (state_: "on" | "off" | null, mode: "manual" | "release") =>
    async () => {
      try {
        const response = await api.setRelay(state_, mode);
        renderError(handles, null);
        renderRelay(handles, response.relay, response.mode);
      } catch (err) {
        renderError(handles, err instanceof Error ? err.message : String(err));
      }
    };
  handles.relayOn.addEventListener("click", relayCall("on", "manual"));
  handles.relayOff.addEventListener("click", relayCall("off", "manual"));
  handles.release.addEventListener("click", relayCall(null, "release"));

  const stream = new EventStream("", {
    onEvent: (event) => {
      state = applyEvent(state, event);
      if (event.kind === "notification" && event.payload.kind === "charge_needed") {
        showChargeBanner(handles);
      }
      redraw();
    },
    onStatus: (status) => renderConnection(handles, status),
    factory: options.eventSourceFactory,
  });
  stream.start();
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) void boot(root);
}
