import { describe, expect, it } from 'vitest';

import { collectExtent, fitTransform, niceRound, toScreen } from '../src/map.js';
import { initialState, applyMission, applyVehicle } from '../src/viewmodel.js';
import { MissionView, VehicleView } from '../src/types.js';

const MISSION: MissionView = {
  origin: { lat: 56.45, lon: -5.44 },
  launch_enu: { x: 0, y: 0 },
  recovery_enu: { x: 100, y: 0 },
  shore_enu: { x: -50, y: -50 },
  objectives: [
    {
      id: 1,
      name: 'survey a',
      state: 'pending',
      kind: 'survey',
      area_enu: [
        { x: 0, y: 100 }, { x: 200, y: 100 }, { x: 200, y: 180 }, { x: 0, y: 180 },
      ],
    },
  ],
  rehearsal_tracks: { '1': [{ x: 0, y: 0 }, { x: 0, y: 100 }] },
  progress: { objectives: { '1': 0 }, overall: 0 },
  clock_ms: 0,
};

describe('fitTransform', () => {
  it('keeps every point inside the canvas with margin', () => {
    const points = collectExtentOfMission();
    const t = fitTransform(points, 800, 600, 40);
    for (const p of points) {
      const [x, y] = toScreen(t, p);
      expect(x).toBeGreaterThanOrEqual(39.99);
      expect(x).toBeLessThanOrEqual(760.01);
      expect(y).toBeGreaterThanOrEqual(39.99);
      expect(y).toBeLessThanOrEqual(560.01);
    }
  });

  it('puts north up: larger y means smaller screen y', () => {
    const t = fitTransform([{ x: 0, y: 0 }, { x: 0, y: 100 }], 400, 400);
    const [, yLow] = toScreen(t, { x: 0, y: 0 });
    const [, yHigh] = toScreen(t, { x: 0, y: 100 });
    expect(yHigh).toBeLessThan(yLow);
  });

  it('survives an empty mission', () => {
    const t = fitTransform([], 400, 400);
    const [x, y] = toScreen(t, { x: 0, y: 0 });
    expect(Number.isFinite(x) && Number.isFinite(y)).toBe(true);
  });

  function collectExtentOfMission() {
    const state = initialState();
    applyMission(state, MISSION);
    applyVehicle(state, {
      id: 1, name: 'iver-1', kind: 'auv', asset_state: 'online',
      last_contact_ms: 0, age_s: 0, position: null,
      position_enu: { x: 150, y: 150 }, battery_pct: 100, speed_kn: 0,
      heading_deg: 0, depth_m: 0, fault_bits: 0, objective_id: null, objective_pct: 0,
    } as VehicleView);
    return collectExtent(state);
  }
});

describe('niceRound', () => {
  it('rounds up to 1/2/5 steps', () => {
    expect(niceRound(3)).toBe(5);
    expect(niceRound(12)).toBe(20);
    expect(niceRound(70)).toBe(100);
    expect(niceRound(100)).toBe(100);
    expect(niceRound(420)).toBe(500);
  });
});
