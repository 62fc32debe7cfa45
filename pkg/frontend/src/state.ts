/** Dashboard state is a pure fold over the server's event stream: the
 * console never computes predictions or policy locally. */

import type { StreamEvent } from "./events.js";

export interface NotificationEntry {
  id: number;
  kind: string;
  text: string;
}

export interface DashboardState {
  pins: Record<string, number | null>;
  relay: "on" | "off" | null;
  faulted: boolean;
  notifications: NotificationEntry[]; // most recent first
  lastEventId: number;
}

export const PIN_IDS = Array.from({ length: 11 }, (_, i) => `V${i}`);

export function initialState(): DashboardState {
  const pins: Record<string, number | null> = {};
  for (const pin of PIN_IDS) pins[pin] = null;
  return { pins, relay: null, faulted: false, notifications: [], lastEventId: 0 };
}

export function applyEvent(state: DashboardState, event: StreamEvent): DashboardState {
  const next: DashboardState = {
    ...state,
    pins: { ...state.pins },
    notifications: state.notifications,
    lastEventId: Math.max(state.lastEventId, event.id),
  };
  switch (event.kind) {
    case "pin": {
      const pin = String(event.payload.pin);
      next.pins[pin] = event.payload.value as number | null;
      break;
    }
    case "relay":
      next.relay = event.payload.state as "on" | "off";
      break;
    case "notification":
      next.notifications = [
        {
          id: event.id,
          kind: String(event.payload.kind ?? "notification"),
          text: event.payload.kind === "charge_needed"
            ? "Charge needed: relay switched on"
            : JSON.stringify(event.payload),
        },
        ...state.notifications,
      ].slice(0, 50);
      break;
    case "fault":
      next.faulted = event.payload.status !== "recovered";
      next.notifications = [
        {
          id: event.id,
          kind: "fault",
          text: next.faulted ? `Fault: ${event.payload.status}` : "Fault recovered",
        },
        ...state.notifications,
      ].slice(0, 50);
      break;
  }
  return next;
}
