// Concurrent fetches per view are allowed; stale responses are discarded
// by sequence number so a slow earlier response can never overwrite the
// result of a later request.

export class RequestGate {
  private seq = 0;

  next(): number {
    this.seq += 1;
    return this.seq;
  }

  isCurrent(seq: number): boolean {
    return seq === this.seq;
  }
}
