// 2D local-plane map: ENU meters onto a canvas, north up.

import { ConsoleState, vehicleClass } from './viewmodel.js';
import { EnuXY, MissionView, VehicleView } from './types.js';

export interface Transform {
  scale: number; // px per meter
  offsetX: number;
  offsetY: number;
}

export function collectExtent(state: ConsoleState): EnuXY[] {
  const points: EnuXY[] = [];
  const mission = state.mission;
  if (mission) {
    points.push(mission.launch_enu, mission.recovery_enu, mission.shore_enu);
    for (const obj of mission.objectives) {
      if (obj.area_enu) points.push(...obj.area_enu);
      if (obj.target_enu) points.push(obj.target_enu);
    }
    for (const track of Object.values(mission.rehearsal_tracks)) points.push(...track);
  }
  for (const v of state.vehicles.values()) {
    if (v.position_enu) points.push(v.position_enu);
  }
  return points;
}

export function fitTransform(points: EnuXY[], width: number, height: number, margin = 40): Transform {
  if (!points.length) return { scale: 1, offsetX: width / 2, offsetY: height / 2 };
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const p of points) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const spanX = Math.max(maxX - minX, 10);
  const spanY = Math.max(maxY - minY, 10);
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  // y grows north: flip for screen coordinates
  return {
    scale,
    offsetX: margin + (width - 2 * margin - spanX * scale) / 2 - minX * scale,
    offsetY: height - margin - (height - 2 * margin - spanY * scale) / 2 + minY * scale,
  };
}

export function toScreen(t: Transform, p: EnuXY): [number, number] {
  return [p.x * t.scale + t.offsetX, t.offsetY - p.y * t.scale];
}

const STATE_COLORS: Record<string, string> = {
  pending: '#7a7f8a',
  active: '#f2b134',
  complete: '#3fae66',
  aborted: '#c54747',
};

export function drawMap(canvas: HTMLCanvasElement, state: ConsoleState): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = '#0d1b2a';
  ctx.fillRect(0, 0, width, height);
  const t = fitTransform(collectExtent(state), width, height);
  const mission = state.mission;
  if (!mission) return;

  drawScaleBar(ctx, t, width, height);
  for (const obj of mission.objectives) {
    if (obj.area_enu) drawArea(ctx, t, obj.area_enu, obj.state, obj.name);
    if (obj.target_enu) drawTarget(ctx, t, obj.target_enu, obj.state, obj.name);
  }
  for (const [vid, track] of Object.entries(mission.rehearsal_tracks)) {
    drawTrack(ctx, t, track, vid);
  }
  drawMarker(ctx, t, mission.shore_enu, '#e0e1dd', 'shore', 'square');
  drawMarker(ctx, t, mission.launch_enu, '#8ecae6', 'launch', 'circle');
  drawMarker(ctx, t, mission.recovery_enu, '#8ecae6', 'recovery', 'circle');
  for (const v of state.vehicles.values()) drawVehicle(ctx, t, v);
}

function drawArea(
  ctx: CanvasRenderingContext2D, t: Transform, corners: EnuXY[], state: string, name: string,
): void {
  ctx.beginPath();
  corners.forEach((p, i) => {
    const [x, y] = toScreen(t, p);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.closePath();
  ctx.fillStyle = STATE_COLORS[state] + '33';
  ctx.strokeStyle = STATE_COLORS[state];
  ctx.lineWidth = 1.5;
  ctx.fill();
  ctx.stroke();
  const [lx, ly] = toScreen(t, corners[0]);
  ctx.fillStyle = '#cfd8e3';
  ctx.font = '11px sans-serif';
  ctx.fillText(name, lx + 4, ly - 4);
}

function drawTarget(
  ctx: CanvasRenderingContext2D, t: Transform, p: EnuXY, state: string, name: string,
): void {
  const [x, y] = toScreen(t, p);
  ctx.strokeStyle = STATE_COLORS[state];
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.arc(x, y, 6, 0, Math.PI * 2);
  ctx.moveTo(x - 9, y);
  ctx.lineTo(x + 9, y);
  ctx.moveTo(x, y - 9);
  ctx.lineTo(x, y + 9);
  ctx.stroke();
  ctx.fillStyle = '#cfd8e3';
  ctx.font = '11px sans-serif';
  ctx.fillText(name, x + 10, y - 8);
}

function drawTrack(ctx: CanvasRenderingContext2D, t: Transform, track: EnuXY[], vid: string): void {
  if (track.length < 2) return;
  ctx.beginPath();
  track.forEach((p, i) => {
    const [x, y] = toScreen(t, p);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.strokeStyle = '#55687d';
  ctx.setLineDash([5, 4]);
  ctx.lineWidth = 1;
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawMarker(
  ctx: CanvasRenderingContext2D, t: Transform, p: EnuXY, color: string,
  label: string, shape: 'square' | 'circle',
): void {
  const [x, y] = toScreen(t, p);
  ctx.fillStyle = color;
  if (shape === 'square') {
    ctx.fillRect(x - 4, y - 4, 8, 8);
  } else {
    ctx.beginPath();
    ctx.arc(x, y, 4, 0, Math.PI * 2);
    ctx.fill();
  }
  ctx.font = '11px sans-serif';
  ctx.fillText(label, x + 6, y + 4);
}

function drawVehicle(ctx: CanvasRenderingContext2D, t: Transform, v: VehicleView): void {
  if (!v.position_enu) return;
  const [x, y] = toScreen(t, v.position_enu);
  const heading = ((v.heading_deg ?? 0) * Math.PI) / 180;
  const colors: Record<string, string> = {
    online: v.kind === 'relay_usv' ? '#f4d35e' : '#43d17b',
    stale: '#d9a53f',
    lost: '#e05656',
    undiscovered: '#586575',
  };
  const color = colors[v.asset_state] ?? '#888';
  ctx.save();
  ctx.translate(x, y);
  if (v.kind === 'relay_usv') {
    ctx.rotate(Math.PI / 4);
    ctx.fillStyle = color;
    ctx.fillRect(-6, -6, 12, 12); // diamond for the relay
  } else {
    ctx.rotate(heading);
    ctx.beginPath();
    ctx.moveTo(0, -10);
    ctx.lineTo(6, 8);
    ctx.lineTo(-6, 8);
    ctx.closePath();
    ctx.fillStyle = color;
    if (v.asset_state === 'lost') {
      ctx.globalAlpha = 0.6;
      ctx.setLineDash([3, 2]);
      ctx.strokeStyle = color;
      ctx.stroke();
    }
    ctx.fill();
  }
  ctx.restore();
  ctx.fillStyle = color;
  ctx.font = '12px sans-serif';
  const suffix = v.asset_state === 'online' ? '' : ` (${v.asset_state}, ${v.age_s ?? '?'} s)`;
  ctx.fillText(`${v.name}${suffix}`, x + 10, y - 10);
  if (v.battery_pct !== null) {
    ctx.fillStyle = '#9fb2c8';
    ctx.font = '10px sans-serif';
    ctx.fillText(`${v.battery_pct}%`, x + 10, y + 2);
  }
}

function drawScaleBar(
  ctx: CanvasRenderingContext2D, t: Transform, width: number, height: number,
): void {
  const targetPx = 120;
  const meters = niceRound(targetPx / t.scale);
  const px = meters * t.scale;
  ctx.strokeStyle = '#9fb2c8';
  ctx.fillStyle = '#9fb2c8';
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(16, height - 16);
  ctx.lineTo(16 + px, height - 16);
  ctx.stroke();
  ctx.font = '10px sans-serif';
  ctx.fillText(`${meters} m`, 16, height - 22);
}

export function niceRound(m: number): number {
  const pow = 10 ** Math.floor(Math.log10(Math.max(m, 1)));
  for (const mult of [1, 2, 5, 10]) {
    if (mult * pow >= m) return mult * pow;
  }
  return 10 * pow;
}
