/** Scene-graph side of the editor: the deforming surface, one draggable
 * marker per joint, and bone lines. Owns no numbers of its own — geometry
 * comes from service messages and marker drags come from the caller.
 *
 * Rendering (WebGLRenderer, canvas, resize) lives in main.ts so this class
 * also works headless.
 */

import * as THREE from "three";
import type { DistortionReport, FrameMessage, TopologyMessage } from "./protocol.js";

export const MARKER_COLOR = 0x3377cc;
export const FLAGGED_COLOR = 0xcc2222;
export const MARKER_RADIUS = 0.045;

export class RigViewer {
  readonly scene = new THREE.Scene();
  surface: THREE.Mesh | null = null;
  markers: THREE.Mesh[] = [];
  boneLines: THREE.LineSegments | null = null;
  /** Angle text for flagged joints, degrees exactly as reported. */
  readonly flaggedAngles = new Map<number, number>();
  private geometry: THREE.BufferGeometry | null = null;
  private bones: number[][] = [];

  constructor() {
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.6));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(3, 5, 4);
    this.scene.add(sun);
  }

  /** Build the static topology: face index, joint markers, bone lines.
   * Vertex positions arrive with the first frame.
   */
  applyTopology(topology: TopologyMessage, vertexCount: number): void {
    this.clear();
    this.bones = topology.bones;

    this.geometry = new THREE.BufferGeometry();
    this.geometry.setAttribute(
      "position",
      new THREE.BufferAttribute(new Float32Array(vertexCount * 3), 3),
    );
    this.geometry.setIndex(topology.faces.flat());
    this.surface = new THREE.Mesh(
      this.geometry,
      new THREE.MeshStandardMaterial({ color: 0xb0b4bb, flatShading: true }),
    );
    this.surface.visible = false; // until the first frame fills positions
    this.scene.add(this.surface);

    const markerGeometry = new THREE.SphereGeometry(MARKER_RADIUS, 12, 8);
    this.markers = topology.joints.map(([x, y, z], joint) => {
      const marker = new THREE.Mesh(
        markerGeometry,
        new THREE.MeshBasicMaterial({ color: MARKER_COLOR }),
      );
      marker.position.set(x, y, z);
      marker.userData.joint = joint;
      this.scene.add(marker);
      return marker;
    });

    this.boneLines = new THREE.LineSegments(
      new THREE.BufferGeometry(),
      new THREE.LineBasicMaterial({ color: 0x222222 }),
    );
    this.refreshBoneLines(topology.joints.map(([x, y, z]) => new THREE.Vector3(x, y, z)));
    this.scene.add(this.boneLines);
  }

  /** Replace the vertex buffer with a frame's positions and retint markers
   * from its report. Topology is untouched by design.
   */
  applyFrame(frame: FrameMessage): void {
    if (!this.geometry || !this.surface) return;
    const attr = this.geometry.getAttribute("position") as THREE.BufferAttribute;
    const flat = attr.array as Float32Array;
    frame.vertices.forEach(([x, y, z], i) => {
      flat[3 * i] = x;
      flat[3 * i + 1] = y;
      flat[3 * i + 2] = z;
    });
    attr.needsUpdate = true;
    this.geometry.computeVertexNormals();
    this.surface.visible = true;
    this.applyReport(frame.report);
  }

  /** Tint flagged joints red and record their reported angles verbatim. */
  applyReport(report: DistortionReport): void {
    this.flaggedAngles.clear();
    const flagged = new Set(report.flagged_joints);
    this.markers.forEach((marker, joint) => {
      const material = marker.material as THREE.MeshBasicMaterial;
      material.color.setHex(flagged.has(joint) ? FLAGGED_COLOR : MARKER_COLOR);
    });
    for (const joint of report.flagged_joints) {
      const angle = report.per_joint_angle_deg[String(joint)];
      if (angle !== undefined) this.flaggedAngles.set(joint, angle);
    }
  }

  /** Move one marker (the active drag) and keep bone lines attached. */
  moveMarker(joint: number, target: THREE.Vector3): void {
    const marker = this.markers[joint];
    if (!marker) return;
    marker.position.copy(target);
    this.refreshBoneLines(this.markers.map((m) => m.position));
  }

  /** Pickable marker meshes for raycasting in the caller. */
  pickables(): THREE.Object3D[] {
    return this.markers;
  }

  private refreshBoneLines(joints: THREE.Vector3[]): void {
    if (!this.boneLines) return;
    const points: THREE.Vector3[] = [];
    for (const [a, b] of this.bones) {
      if (joints[a] && joints[b]) points.push(joints[a], joints[b]);
    }
    this.boneLines.geometry.dispose();
    this.boneLines.geometry = new THREE.BufferGeometry().setFromPoints(points);
  }

  private clear(): void {
    for (const marker of this.markers) this.scene.remove(marker);
    if (this.surface) this.scene.remove(this.surface);
    if (this.boneLines) this.scene.remove(this.boneLines);
    this.markers = [];
    this.surface = null;
    this.boneLines = null;
    this.geometry = null;
    this.flaggedAngles.clear();
  }
}
