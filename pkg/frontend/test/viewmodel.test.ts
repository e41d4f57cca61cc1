import { describe, expect, it } from 'vitest';

import {
  addChatTurn,
  applyNotification,
  applyVehicle,
  backoffMs,
  commandPhaseFor,
  initialState,
  pinnedNotifications,
  sortedVehicles,
  staleLabel,
  trackCommand,
  vehicleClass,
} from '../src/viewmodel.js';
import { NotificationView, VehicleView } from '../src/types.js';

function vehicle(overrides: Partial<VehicleView> = {}): VehicleView {
  return {
    id: 1,
    name: 'iver-1',
    kind: 'auv',
    asset_state: 'online',
    last_contact_ms: 1000,
    age_s: 2,
    position: { lat: 56.45, lon: -5.43 },
    position_enu: { x: 100, y: 50 },
    battery_pct: 90,
    speed_kn: 2.5,
    heading_deg: 90,
    depth_m: 0,
    fault_bits: 0,
    objective_id: null,
    objective_pct: 0,
    ...overrides,
  };
}

function notification(overrides: Partial<NotificationView> = {}): NotificationView {
  return {
    id: 1,
    t_ms: 1000,
    severity: 'warning',
    pinned: true,
    kind: 'fault',
    text: '⚠ FAULT: Vehicle 1 reports a motor fault.',
    vehicle_id: 1,
    objective_id: null,
    params: {},
    ...overrides,
  };
}

describe('pinned warnings', () => {
  it('persist across many chat turns', () => {
    const state = initialState();
    applyNotification(state, notification({ severity: 'critical' }));
    for (let i = 0; i < 50; i++) {
      addChatTurn(state, { sender: 'operator', text: `turn ${i}` });
      addChatTurn(state, { sender: 'c2', text: `reply ${i}` });
    }
    const pinned = pinnedNotifications(state);
    expect(pinned).toHaveLength(1);
    expect(pinned[0].text).toContain('FAULT');
    expect(state.chat).toHaveLength(100);
  });

  it('disappear only when an unpin update arrives', () => {
    const state = initialState();
    applyNotification(state, notification());
    expect(pinnedNotifications(state)).toHaveLength(1);
    // more notifications do not dislodge the pin
    applyNotification(state, notification({ id: 2, pinned: false, kind: 'discovered' }));
    expect(pinnedNotifications(state)).toHaveLength(1);
    // the unpin update does
    applyNotification(state, notification({ pinned: false, update: true }));
    expect(pinnedNotifications(state)).toHaveLength(0);
  });

  it('orders pinned chips by notification id', () => {
    const state = initialState();
    applyNotification(state, notification({ id: 5 }));
    applyNotification(state, notification({ id: 2, text: 'earlier' }));
    expect(pinnedNotifications(state).map((n) => n.id)).toEqual([2, 5]);
  });
});

describe('vehicle presentation', () => {
  it('maps asset states to css classes', () => {
    expect(vehicleClass(vehicle())).toBe('vehicle-online');
    expect(vehicleClass(vehicle({ asset_state: 'lost' }))).toBe('vehicle-lost');
  });

  it('labels stale and lost vehicles with their age', () => {
    expect(staleLabel(vehicle())).toBe('');
    expect(staleLabel(vehicle({ asset_state: 'stale', age_s: 120 }))).toBe(
      'last heard 120 s ago',
    );
    expect(staleLabel(vehicle({ asset_state: 'lost', age_s: 400 }))).toBe(
      'last heard 400 s ago',
    );
  });

  it('keeps the latest record per vehicle, sorted by id', () => {
    const state = initialState();
    applyVehicle(state, vehicle({ id: 2, battery_pct: 80 }));
    applyVehicle(state, vehicle({ id: 1 }));
    applyVehicle(state, vehicle({ id: 2, battery_pct: 75 }));
    const vehicles = sortedVehicles(state);
    expect(vehicles.map((v) => v.id)).toEqual([1, 2]);
    expect(vehicles[1].battery_pct).toBe(75);
  });
});

describe('command tracking', () => {
  it('moves pending to acked when the matching notification arrives', () => {
    const state = initialState();
    trackCommand(state, { cmdSeq: 7, vehicleId: 1, cmd: 'StartMission', phase: 'pending' });
    applyNotification(
      state,
      notification({
        id: 9, kind: 'command_acked', pinned: false, severity: 'info',
        params: { cmd_seq: 7 },
      }),
    );
    expect(commandPhaseFor(state, 1)?.phase).toBe('acked');
  });

  it('marks failed commands prominently', () => {
    const state = initialState();
    trackCommand(state, { cmdSeq: 8, vehicleId: 1, cmd: 'AbortToRecovery', phase: 'pending' });
    applyNotification(
      state,
      notification({
        id: 10, kind: 'command_failed', pinned: false, severity: 'critical',
        params: { cmd_seq: 8 },
      }),
    );
    expect(commandPhaseFor(state, 1)?.phase).toBe('failed');
  });

  it('ignores notifications for other command sequences', () => {
    const state = initialState();
    trackCommand(state, { cmdSeq: 3, vehicleId: 1, cmd: 'StartMission', phase: 'pending' });
    applyNotification(
      state,
      notification({ id: 11, kind: 'command_acked', params: { cmd_seq: 99 } }),
    );
    expect(commandPhaseFor(state, 1)?.phase).toBe('pending');
  });
});

describe('reconnect backoff', () => {
  it('doubles and saturates at 15 s', () => {
    expect(backoffMs(1)).toBe(1000);
    expect(backoffMs(2)).toBe(2000);
    expect(backoffMs(3)).toBe(4000);
    expect(backoffMs(10)).toBe(15000);
  });
});
