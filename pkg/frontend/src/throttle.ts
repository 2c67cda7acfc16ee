/**
 * Latest-wins command throttle for continuous controls (the finger slider).
 *
 * At most `maxPerSecond` emissions; intermediate values during a drag are
 * coalesced and the newest one flushes when the window re-opens, so the
 * gripper always settles on the final slider position.  The clock is
 * injected for testability.
 */

export class CommandThrottle<T> {
  private lastEmit = -Infinity;
  private queued: T | null = null;

  constructor(
    private emit: (value: T) => void,
    private maxPerSecond = 10,
    private now: () => number = () => performance.now(),
  ) {}

  private get interval(): number {
    return 1000 / this.maxPerSecond;
  }

  /** Offer a new value; emits immediately if the rate window allows. */
  offer(value: T): void {
    const t = this.now();
    if (t - this.lastEmit >= this.interval) {
      this.lastEmit = t;
      this.queued = null;
      this.emit(value);
    } else {
      this.queued = value;
    }
  }

  /** Pump from a timer; flushes the newest coalesced value when allowed. */
  tick(): void {
    if (this.queued === null) return;
    const t = this.now();
    if (t - this.lastEmit >= this.interval) {
      this.lastEmit = t;
      const value = this.queued;
      this.queued = null;
      this.emit(value);
    }
  }

  get pendingValue(): T | null {
    return this.queued;
  }
}
