// Payload shapes of the C2 HTTP API.

export interface EnuXY {
  x: number;
  y: number;
}

export interface VehicleView {
  id: number;
  name: string;
  kind: string;
  asset_state: 'undiscovered' | 'online' | 'stale' | 'lost';
  last_contact_ms: number | null;
  age_s: number | null;
  position: { lat: number; lon: number } | null;
  position_enu: EnuXY | null;
  battery_pct: number | null;
  speed_kn: number | null;
  heading_deg: number | null;
  depth_m: number | null;
  fault_bits: number;
  objective_id: number | null;
  objective_pct: number;
}

export interface ObjectiveView {
  id: number;
  name: string;
  state: 'pending' | 'active' | 'complete' | 'aborted';
  kind: 'survey' | 'reacquire';
  area_enu?: EnuXY[];
  target_enu?: EnuXY;
}

export interface MissionView {
  origin: { lat: number; lon: number };
  launch_enu: EnuXY;
  recovery_enu: EnuXY;
  shore_enu: EnuXY;
  objectives: ObjectiveView[];
  rehearsal_tracks: Record<string, EnuXY[]>;
  progress: { objectives: Record<string, number>; overall: number };
  clock_ms: number;
}

export interface NotificationView {
  id: number;
  t_ms: number;
  severity: 'info' | 'warning' | 'critical';
  pinned: boolean;
  kind: string;
  text: string;
  vehicle_id: number | null;
  objective_id: number | null;
  params: Record<string, unknown>;
  update?: boolean;
}

export interface ChatResponse {
  reply_text: string;
  intent_name: string;
  ok: boolean;
  slots: { vehicle: number | null; objective: number | null };
}

export type ConnectionState = 'connecting' | 'connected' | 'disconnected';

export interface ChatTurn {
  sender: 'operator' | 'c2' | 'system';
  text: string;
}

export type CommandPhase = 'pending' | 'acked' | 'failed';

export interface PendingCommand {
  cmdSeq: number;
  vehicleId: number;
  cmd: string;
  phase: CommandPhase;
}
