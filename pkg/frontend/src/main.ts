/** Browser entry point: upload a mesh, then drag joint markers and watch the
 * deformed surface, red large-angle flags, and the distortion panel update
 * from the service's frames.
 */

import * as THREE from "three";
import { reportLines, uploadBanner } from "./panel.js";
import {
  createSession,
  handlesMessage,
  parseServerMessage,
  ServiceError,
  streamUrl,
  type HandleTarget,
  type SessionSummary,
} from "./protocol.js";
import { ViewState } from "./viewstate.js";
import { RigViewer } from "./viewer.js";

const BASE_URL = `${location.protocol}//${location.host}`;

const fileInput = document.getElementById("mesh-file") as HTMLInputElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const panel = document.getElementById("panel") as HTMLDivElement;
const labels = document.getElementById("labels") as HTMLDivElement;
const container = document.getElementById("scene") as HTMLDivElement;

const renderer = new THREE.WebGLRenderer({ antialias: true });
renderer.setSize(container.clientWidth, container.clientHeight);
container.appendChild(renderer.domElement);

const camera = new THREE.PerspectiveCamera(
  45,
  container.clientWidth / container.clientHeight,
  0.01,
  100,
);
const viewer = new RigViewer();
const view = new ViewState();
const raycaster = new THREE.Raycaster();

let socket: WebSocket | null = null;
let summary: SessionSummary | null = null;
let targets: number[][] = []; // current handle targets, one row per joint

function showBanner(text: string): void {
  banner.textContent = text;
  banner.style.display = text ? "block" : "none";
}

function showPanel(lines: string[]): void {
  panel.textContent = lines.join("\n");
}

function showLabels(): void {
  const parts: string[] = [];
  for (const [joint, angle] of viewer.flaggedAngles) {
    parts.push(`joint ${joint}: ${angle} deg`);
  }
  labels.textContent = parts.join("   ");
}

function fitCamera(joints: number[][]): void {
  const box = new THREE.Box3();
  for (const [x, y, z] of joints) box.expandByPoint(new THREE.Vector3(x, y, z));
  const center = box.getCenter(new THREE.Vector3());
  const size = Math.max(box.getSize(new THREE.Vector3()).length(), 1.0);
  camera.position.set(center.x, center.y + 0.4 * size, center.z + 1.6 * size);
  camera.lookAt(center);
}

function currentHandles(): HandleTarget[] {
  return targets.map(([x, y, z], joint) => ({ joint, x, y, z }));
}

function sendHandles(): void {
  if (!socket || socket.readyState !== WebSocket.OPEN) return;
  socket.send(handlesMessage(view.nextRevision(), currentHandles()));
}

function openStream(s: SessionSummary): void {
  socket = new WebSocket(streamUrl(BASE_URL, s.session_id));
  socket.onmessage = (event: MessageEvent) => {
    const msg = parseServerMessage(String(event.data));
    if (msg.type === "topology") {
      viewer.applyTopology(msg, s.vertex_count);
      fitCamera(msg.joints);
      sendHandles(); // identity pose; the reply carries the rest vertices
    } else if (msg.type === "frame") {
      if (!view.acceptFrame(msg.revision)) return; // stale under latest-wins
      viewer.applyFrame(msg);
      showPanel(reportLines(msg.report));
      showLabels();
    } else {
      showBanner(`service error ${msg.code}: ${msg.message}`);
    }
  };
  socket.onclose = () => showBanner("stream closed");
}

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  showBanner("");
  socket?.close();
  try {
    summary = await createSession(BASE_URL, await file.text());
  } catch (err) {
    showBanner(err instanceof ServiceError ? uploadBanner(err.code, err.message) : String(err));
    return;
  }
  targets = summary.joints.map((p) => [...p]);
  showPanel([
    `${summary.vertex_count} vertices, ${summary.joint_count} joints, ` +
      `${summary.chain_count} chains`,
  ]);
  openStream(summary);
});

function pointerNdc(event: PointerEvent): THREE.Vector2 {
  const rect = renderer.domElement.getBoundingClientRect();
  return new THREE.Vector2(
    ((event.clientX - rect.left) / rect.width) * 2 - 1,
    -((event.clientY - rect.top) / rect.height) * 2 + 1,
  );
}

renderer.domElement.addEventListener("pointerdown", (event: PointerEvent) => {
  raycaster.setFromCamera(pointerNdc(event), camera);
  const hit = raycaster.intersectObjects(viewer.pickables())[0];
  if (hit) {
    const joint = hit.object.userData.joint as number;
    view.beginDrag(joint, (hit.object as THREE.Mesh).position, camera);
  }
});

renderer.domElement.addEventListener("pointermove", (event: PointerEvent) => {
  if (view.selectedHandle === null) return;
  const target = view.dragTarget(pointerNdc(event), camera);
  if (!target) return;
  targets[view.selectedHandle] = [target.x, target.y, target.z];
  viewer.moveMarker(view.selectedHandle, target);
  if (view.maySend(performance.now())) sendHandles();
});

renderer.domElement.addEventListener("pointerup", () => {
  if (view.selectedHandle === null) return;
  view.endDrag();
  sendHandles(); // settle exactly where the drag ended
});

window.addEventListener("resize", () => {
  renderer.setSize(container.clientWidth, container.clientHeight);
  camera.aspect = container.clientWidth / container.clientHeight;
  camera.updateProjectionMatrix();
});

function animate(): void {
  requestAnimationFrame(animate);
  renderer.render(viewer.scene, camera);
}
animate();
