// Console state and the pure reducers the UI renders from.
// Everything that arrives (snapshots, stream events, chat turns) flows
// through here; the DOM layer only draws what this module holds.

import {
  ChatTurn,
  ConnectionState,
  MissionView,
  NotificationView,
  PendingCommand,
  VehicleView,
} from './types.js';

export interface ConsoleState {
  connection: ConnectionState;
  vehicles: Map<number, VehicleView>;
  mission: MissionView | null;
  notifications: Map<number, NotificationView>;
  chat: ChatTurn[];
  commands: PendingCommand[];
}

export function initialState(): ConsoleState {
  return {
    connection: 'connecting',
    vehicles: new Map(),
    mission: null,
    notifications: new Map(),
    chat: [],
    commands: [],
  };
}

export function setConnection(state: ConsoleState, connection: ConnectionState): void {
  state.connection = connection;
}

export function applyVehicles(state: ConsoleState, vehicles: VehicleView[]): void {
  for (const v of vehicles) applyVehicle(state, v);
}

export function applyVehicle(state: ConsoleState, vehicle: VehicleView): void {
  state.vehicles.set(vehicle.id, vehicle);
}

export function applyMission(state: ConsoleState, mission: MissionView): void {
  state.mission = mission;
}

export function applyNotifications(state: ConsoleState, items: NotificationView[]): void {
  for (const n of items) applyNotification(state, n);
}

// Upsert by id: an "update" event (e.g. an unpin) replaces the stored copy,
// so a pinned warning disappears from the pinned area exactly when the
// service says so and never before.
export function applyNotification(state: ConsoleState, n: NotificationView): void {
  state.notifications.set(n.id, n);
  const cmdSeq = typeof n.params?.cmd_seq === 'number' ? (n.params.cmd_seq as number) : null;
  if (cmdSeq !== null) {
    for (const cmd of state.commands) {
      if (cmd.cmdSeq === cmdSeq && cmd.phase === 'pending') {
        cmd.phase = n.kind === 'command_acked' ? 'acked' : 'failed';
      }
    }
  }
  // objective / mission state changes ride dedicated refetches; nothing here
}

export function pinnedNotifications(state: ConsoleState): NotificationView[] {
  return [...state.notifications.values()]
    .filter((n) => n.pinned)
    .sort((a, b) => a.id - b.id);
}

export function recentNotifications(state: ConsoleState, limit = 50): NotificationView[] {
  return [...state.notifications.values()].sort((a, b) => b.id - a.id).slice(0, limit);
}

export function addChatTurn(state: ConsoleState, turn: ChatTurn): void {
  state.chat.push(turn);
}

export function trackCommand(state: ConsoleState, cmd: PendingCommand): void {
  state.commands.push(cmd);
}

export function commandPhaseFor(state: ConsoleState, vehicleId: number): PendingCommand | null {
  const mine = state.commands.filter((c) => c.vehicleId === vehicleId);
  return mine.length ? mine[mine.length - 1] : null;
}

// CSS class per asset state; stale and lost get visibly distinct styling.
export function vehicleClass(v: VehicleView): string {
  return `vehicle-${v.asset_state}`;
}

export function staleLabel(v: VehicleView): string {
  if (v.asset_state === 'online' || v.age_s === null) return '';
  return `last heard ${v.age_s} s ago`;
}

export function sortedVehicles(state: ConsoleState): VehicleView[] {
  return [...state.vehicles.values()].sort((a, b) => a.id - b.id);
}

// Exponential backoff for stream reconnects, capped at 15 s.
export function backoffMs(attempt: number): number {
  return Math.min(1000 * 2 ** Math.max(0, attempt - 1), 15000);
}
