// Console wiring: map pane on the left, chat with pinned warnings on the
// right, command buttons below the vehicle list. All state comes from the
// C2 API; reloading rebuilds the same view from service state.

import { fetchMission, fetchNotifications, fetchVehicles, postChat, postCommand } from './api.js';
import { drawMap } from './map.js';
import { openStream } from './stream.js';
import {
  ConsoleState,
  addChatTurn,
  applyMission,
  applyNotification,
  applyNotifications,
  applyVehicle,
  applyVehicles,
  commandPhaseFor,
  initialState,
  pinnedNotifications,
  setConnection,
  sortedVehicles,
  staleLabel,
  trackCommand,
  vehicleClass,
} from './viewmodel.js';
import { NotificationView, VehicleView } from './types.js';

const BASE = '';
const SESSION = `console-${Math.random().toString(36).slice(2, 8)}`;

const state: ConsoleState = initialState();

const el = (id: string) => document.getElementById(id)!;
const canvas = () => el('map') as HTMLCanvasElement;

let selectedVehicle: number | null = null;

function render(): void {
  renderBanner();
  renderVehicles();
  renderPinned();
  renderMap();
  renderCommandButtons();
}

function renderBanner(): void {
  const banner = el('banner');
  banner.className = `banner ${state.connection}`;
  banner.textContent =
    state.connection === 'connected'
      ? ''
      : state.connection === 'connecting'
        ? 'connecting to C2...'
        : 'disconnected from C2, retrying...';
  banner.style.display = state.connection === 'connected' ? 'none' : 'block';
}

function renderVehicles(): void {
  const list = el('vehicles');
  list.innerHTML = '';
  for (const v of sortedVehicles(state)) {
    const row = document.createElement('div');
    row.className = `vehicle-row ${vehicleClass(v)}${selectedVehicle === v.id ? ' selected' : ''}`;
    const age = staleLabel(v);
    row.innerHTML =
      `<span class="v-name">${v.name}</span>` +
      `<span class="v-state">${v.asset_state}${age ? ' · ' + age : ''}</span>` +
      `<span class="v-batt">${v.battery_pct ?? '--'}%</span>`;
    row.onclick = () => {
      selectedVehicle = v.id;
      render();
    };
    list.appendChild(row);
  }
}

function renderPinned(): void {
  const pane = el('pinned');
  pane.innerHTML = '';
  for (const n of pinnedNotifications(state)) {
    const chip = document.createElement('div');
    chip.className = `pinned-chip ${n.severity}`;
    chip.textContent = n.text;
    pane.appendChild(chip);
  }
  pane.style.display = pane.childElementCount ? 'block' : 'none';
}

function renderMap(): void {
  drawMap(canvas(), state);
}

function renderCommandButtons(): void {
  const start = el('cmd-start') as HTMLButtonElement;
  const abort = el('cmd-abort') as HTMLButtonElement;
  const status = el('cmd-status');
  const enabled = state.connection === 'connected' && selectedVehicle !== null;
  start.disabled = !enabled;
  abort.disabled = !enabled;
  status.textContent = '';
  status.className = 'cmd-status';
  if (selectedVehicle !== null) {
    const cmd = commandPhaseFor(state, selectedVehicle);
    if (cmd) {
      status.textContent = `${cmd.cmd} #${cmd.cmdSeq}: ${cmd.phase}`;
      status.className = `cmd-status ${cmd.phase}`;
      if (cmd.phase === 'pending') {
        start.disabled = true;
        abort.disabled = true;
      }
    }
  }
}

function appendChatBubble(sender: string, text: string): void {
  const log = el('chat-log');
  const bubble = document.createElement('div');
  bubble.className = `turn ${sender}`;
  bubble.textContent = text;
  log.appendChild(bubble);
  log.scrollTop = log.scrollHeight;
}

async function sendChat(): Promise<void> {
  const input = el('chat-input') as HTMLInputElement;
  const text = input.value.trim();
  if (!text) return;
  appendChatBubble('operator', text);
  addChatTurn(state, { sender: 'operator', text });
  input.value = '';
  try {
    const reply = await postChat(BASE, SESSION, text);
    appendChatBubble('c2', reply.reply_text);
    addChatTurn(state, { sender: 'c2', text: reply.reply_text });
  } catch (err) {
    appendChatBubble('system', `send failed: ${err}`);
    input.value = text; // keep what the operator typed
  }
}

async function sendCommand(cmd: 'StartMission' | 'AbortToRecovery'): Promise<void> {
  if (selectedVehicle === null) return;
  try {
    const { cmd_seq } = await postCommand(BASE, selectedVehicle, cmd);
    trackCommand(state, { cmdSeq: cmd_seq, vehicleId: selectedVehicle, cmd, phase: 'pending' });
  } catch (err) {
    appendChatBubble('system', `command failed: ${err}`);
  }
  render();
}

async function loadSnapshot(): Promise<void> {
  const [vehicles, mission, notifications] = await Promise.all([
    fetchVehicles(BASE),
    fetchMission(BASE),
    fetchNotifications(BASE),
  ]);
  applyVehicles(state, vehicles);
  applyMission(state, mission);
  applyNotifications(state, notifications);
  render();
}

function onStreamEvent(event: string, data: unknown): void {
  if (event === 'vehicle') {
    applyVehicle(state, data as VehicleView);
  } else if (event === 'notification') {
    const n = data as NotificationView;
    applyNotification(state, n);
    if (!n.update) appendChatBubble('system', n.text);
    // objective states changed? cheap to refetch the mission snapshot
    if (n.kind === 'objective_complete' || n.kind === 'mission_complete') {
      fetchMission(BASE).then((m) => {
        applyMission(state, m);
        render();
      });
    }
  }
  render();
}

function onStreamState(connected: boolean): void {
  setConnection(state, connected ? 'connected' : 'disconnected');
  if (connected) {
    loadSnapshot().catch(() => setConnection(state, 'disconnected'));
  }
  render();
}

function init(): void {
  el('chat-send').onclick = () => void sendChat();
  (el('chat-input') as HTMLInputElement).onkeydown = (ev) => {
    if (ev.key === 'Enter') void sendChat();
  };
  el('cmd-start').onclick = () => void sendCommand('StartMission');
  el('cmd-abort').onclick = () => void sendCommand('AbortToRecovery');
  loadSnapshot().catch(() => {
    setConnection(state, 'disconnected');
    render();
  });
  openStream(BASE, onStreamEvent, onStreamState);
  const resize = () => {
    const pane = el('map-pane');
    canvas().width = pane.clientWidth;
    canvas().height = pane.clientHeight;
    render();
  };
  window.addEventListener('resize', resize);
  resize();
  setInterval(render, 2000); // ages tick even without traffic
}

document.addEventListener('DOMContentLoaded', init);
