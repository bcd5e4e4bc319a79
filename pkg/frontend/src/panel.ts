/** Distortion readout: turns a frame's report into display lines. Values are
 * shown exactly as received — this panel never recomputes anything.
 */

import type { DistortionReport } from "./protocol.js";

export function reportLines(report: DistortionReport): string[] {
  const lines = [
    `global distortion: ${report.global_distortion}`,
    `steps used: ${report.steps_used}`,
  ];
  if (report.flagged_joints.length === 0) {
    lines.push("no large-angle joints");
  } else {
    for (const joint of report.flagged_joints) {
      lines.push(`joint ${joint}: ${report.per_joint_angle_deg[String(joint)]} deg`);
    }
  }
  return lines;
}

export function uploadBanner(code: number, detail: string): string {
  return `upload failed (${code}): ${detail}`;
}
