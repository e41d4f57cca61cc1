// Thin fetch wrappers over the C2 HTTP API.

import { ChatResponse, MissionView, NotificationView, VehicleView } from './types.js';

export async function fetchVehicles(base: string): Promise<VehicleView[]> {
  const r = await fetch(`${base}/api/vehicles`);
  if (!r.ok) throw new Error(`vehicles: HTTP ${r.status}`);
  return r.json();
}

export async function fetchMission(base: string): Promise<MissionView> {
  const r = await fetch(`${base}/api/mission`);
  if (!r.ok) throw new Error(`mission: HTTP ${r.status}`);
  return r.json();
}

export async function fetchNotifications(base: string): Promise<NotificationView[]> {
  const r = await fetch(`${base}/api/notifications`);
  if (!r.ok) throw new Error(`notifications: HTTP ${r.status}`);
  return r.json();
}

export async function postChat(base: string, session: string, text: string): Promise<ChatResponse> {
  const r = await fetch(`${base}/api/chat`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ session, text }),
  });
  if (!r.ok) throw new Error(`chat: HTTP ${r.status}`);
  return r.json();
}

export async function postCommand(
  base: string, vehicleId: number, cmd: string,
): Promise<{ cmd_seq: number }> {
  const r = await fetch(`${base}/api/command`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ vehicle_id: vehicleId, cmd }),
  });
  if (!r.ok) throw new Error(`command: HTTP ${r.status}`);
  return r.json();
}
