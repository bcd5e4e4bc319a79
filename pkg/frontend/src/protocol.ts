/** Wire types and helpers for the rigging session service.
 *
 * HTTP: POST /sessions with a raw OBJ body creates a session and returns the
 * rig summary; DELETE /sessions/{id} closes it. WS /sessions/{id}/stream
 * sends one topology message on connect, then answers each handles message
 * with a deformed frame (latest-wins while the solver is busy).
 */

export interface SessionSummary {
  session_id: string;
  joint_count: number;
  bone_count: number;
  chain_count: number;
  vertex_count: number;
  joints: number[][];
  bones: number[][];
  handle_candidates: number[];
}

export interface HandleTarget {
  joint: number;
  x: number;
  y: number;
  z: number;
}

export interface DistortionReport {
  global_distortion: number;
  per_joint_angle_deg: Record<string, number>;
  flagged_joints: number[];
  per_region_distortion: Record<string, number>;
  steps_used: number;
}

export interface TopologyMessage {
  type: "topology";
  faces: number[][];
  joints: number[][];
  bones: number[][];
}

export interface FrameMessage {
  type: "frame";
  revision: number;
  vertices: number[][];
  report: DistortionReport;
}

export interface ErrorMessage {
  type: "error";
  code: number;
  message: string;
}

export type ServerMessage = TopologyMessage | FrameMessage | ErrorMessage;

export class ProtocolError extends Error {}

/** HTTP failure carrying the service's status code and detail text. */
export class ServiceError extends Error {
  constructor(
    public readonly code: number,
    detail: string,
  ) {
    super(detail);
  }
}

function isNumberGrid(value: unknown): value is number[][] {
  return (
    Array.isArray(value) &&
    value.every((row) => Array.isArray(row) && row.every((x) => typeof x === "number"))
  );
}

export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (err) {
    throw new ProtocolError(`message is not JSON: ${err}`);
  }
  if (typeof data !== "object" || data === null || typeof (data as any).type !== "string") {
    throw new ProtocolError("message has no type field");
  }
  const msg = data as Record<string, unknown>;
  switch (msg.type) {
    case "topology": {
      if (!isNumberGrid(msg.faces) || !isNumberGrid(msg.joints) || !isNumberGrid(msg.bones)) {
        throw new ProtocolError("malformed topology message");
      }
      return msg as unknown as TopologyMessage;
    }
    case "frame": {
      const report = msg.report as Record<string, unknown> | undefined;
      if (
        typeof msg.revision !== "number" ||
        !isNumberGrid(msg.vertices) ||
        typeof report !== "object" ||
        report === null ||
        typeof report.global_distortion !== "number" ||
        typeof report.steps_used !== "number" ||
        !Array.isArray(report.flagged_joints)
      ) {
        throw new ProtocolError("malformed frame message");
      }
      return msg as unknown as FrameMessage;
    }
    case "error": {
      if (typeof msg.code !== "number") {
        throw new ProtocolError("malformed error message");
      }
      return msg as unknown as ErrorMessage;
    }
    default:
      throw new ProtocolError(`unknown message type ${JSON.stringify(msg.type)}`);
  }
}

export function handlesMessage(revision: number, handles: HandleTarget[]): string {
  return JSON.stringify({ type: "handles", revision, handles });
}

export function streamUrl(baseUrl: string, sessionId: string): string {
  return `${baseUrl.replace(/^http/, "ws")}/sessions/${sessionId}/stream`;
}

export async function createSession(baseUrl: string, objText: string): Promise<SessionSummary> {
  const resp = await fetch(`${baseUrl}/sessions`, { method: "POST", body: objText });
  if (!resp.ok) {
    let detail = `upload failed (${resp.status})`;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ServiceError(resp.status, detail);
  }
  return (await resp.json()) as SessionSummary;
}

export async function closeSession(baseUrl: string, sessionId: string): Promise<void> {
  const resp = await fetch(`${baseUrl}/sessions/${sessionId}`, { method: "DELETE" });
  if (!resp.ok) {
    throw new ServiceError(resp.status, `close failed (${resp.status})`);
  }
}
