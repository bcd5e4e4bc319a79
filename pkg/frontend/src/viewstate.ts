/** Interaction state: handle selection, the screen-parallel drag plane,
 * outgoing-update throttling, and revision bookkeeping for incoming frames.
 */

import { Camera, Plane, Raycaster, Vector2, Vector3 } from "three";

export const MAX_SEND_HZ = 30;

export class ViewState {
  selectedHandle: number | null = null;
  readonly dragPlane = new Plane();
  /** Revision of the most recent handles message sent. */
  pendingRevision = 0;
  /** Revision of the most recent frame actually rendered. */
  ackedRevision = 0;
  private lastSendMs = Number.NEGATIVE_INFINITY;
  private readonly raycaster = new Raycaster();

  /** Select a handle and set the drag plane screen-parallel through it. */
  beginDrag(handle: number, handleWorld: Vector3, camera: Camera): void {
    this.selectedHandle = handle;
    const normal = camera.getWorldDirection(new Vector3());
    this.dragPlane.setFromNormalAndCoplanarPoint(normal, handleWorld);
  }

  endDrag(): void {
    this.selectedHandle = null;
  }

  /** Unproject a pointer position (normalized device coords) onto the drag
   * plane; null when nothing is selected or the ray misses (degenerate view).
   */
  dragTarget(pointer: Vector2, camera: Camera): Vector3 | null {
    if (this.selectedHandle === null) return null;
    this.raycaster.setFromCamera(pointer, camera);
    return this.raycaster.ray.intersectPlane(this.dragPlane, new Vector3());
  }

  /** Gate outgoing handle updates to at most MAX_SEND_HZ per second. */
  maySend(nowMs: number): boolean {
    if (nowMs - this.lastSendMs < 1000 / MAX_SEND_HZ) return false;
    this.lastSendMs = nowMs;
    return true;
  }

  nextRevision(): number {
    this.pendingRevision += 1;
    return this.pendingRevision;
  }

  /** True when the frame should be rendered. Frames at or below the last
   * rendered revision are stale (superseded under latest-wins) and dropped,
   * which makes rendering monotonic in revision.
   */
  acceptFrame(revision: number): boolean {
    if (revision <= this.ackedRevision) return false;
    this.ackedRevision = revision;
    return true;
  }
}
