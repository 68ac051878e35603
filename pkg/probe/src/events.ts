/** Event schema shared with the trace consumer. */

export type FileOp = 'open' | 'read';

export interface ProbeEvent {
    /** Nanoseconds since boot (kernel monotonic clock). */
    tsNs: bigint;
    pid: number;
    op: FileOp;
    /** Absolute path of the accessed file. */
    path: string;
}

/**
 * One JSON line per event. tsNs is written as a bare integer (not via
 * JSON.stringify, which cannot emit bigint): consumers with arbitrary-
 * precision integers parse it losslessly.
 */
export function formatEventLine(event: ProbeEvent): string {
    return (
        `{"ts_ns":${event.tsNs.toString()},` +
        `"pid":${event.pid},` +
        `"op":"${event.op}",` +
        `"path":${JSON.stringify(event.path)}}`
    );
}
