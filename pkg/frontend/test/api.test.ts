import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { stubFetch } from "./stubs.js";

const PREDICT_OK = { class: 0, probabilities: [0.9, 0.06, 0.04], relay: "on", mode: "AUTO" };

describe("ApiClient", () => {
  it("posts the documented predict body", async () => {
    const { calls, fetchFn } = stubFetch(() => ({ body: PREDICT_OK }));
    const api = new ApiClient("", null, fetchFn);
    const response = await api.predict({ cycle_index: 5, discharge_time_s: 1800 });
    expect(response.class).toBe(0);
    expect(calls[0].url).toBe("/api/predict");
    expect(calls[0].init?.method).toBe("POST");
    expect(calls[0].body).toEqual({
      features: { cycle_index: 5, discharge_time_s: 1800 },
    });
  });

  it("posts the documented relay bodies", async () => {
    const { calls, fetchFn } = stubFetch(() => ({ body: { relay: "off", mode: "MANUAL_OVERRIDE" } }));
    const api = new ApiClient("", null, fetchFn);
    await api.setRelay("off", "manual");
    expect(calls[0].url).toBe("/api/relay");
    expect(calls[0].body).toEqual({ state: "off", mode: "manual" });
    await api.setRelay(null, "release");
    expect(calls[1].body).toEqual({ mode: "release" });
  });

  it("sends the token header when configured", async () => {
    const { calls, fetchFn } = stubFetch(() => ({ body: PREDICT_OK }));
    const api = new ApiClient("", "sekrit", fetchFn);
    await api.predict({ a: 1 });
    const headers = calls[0].init?.headers as Record<string, string>;
    expect(headers["X-Api-Token"]).toBe("sekrit");
  });

  it("surfaces server error details verbatim", async () => {
    const { fetchFn } = stubFetch(() =>
      ({ status: 400, body: { detail: "missing feature: charging_time_s" } }));
    const api = new ApiClient("", null, fetchFn);
    await expect(api.predict({})).rejects.toThrowError(
      "missing feature: charging_time_s");
    await api.predict({}).catch((err: ApiError) => expect(err.status).toBe(400));
  });
});
