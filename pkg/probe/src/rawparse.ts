/** Parsing of the tracing program's raw output lines. */

export interface OpenRecord {
    kind: 'open';
    tsNs: bigint;
    pid: number;
    /** Return value of the syscall: fd on success, negative errno on failure. */
    fd: number;
    rawPath: string;
}

export interface FdRecord {
    kind: 'read' | 'close';
    tsNs: bigint;
    pid: number;
    fd: number;
}

export type RawRecord = OpenRecord | FdRecord;

/**
 * Parse one raw line; returns null for anything that is not a record
 * (bpftrace banners, map dumps, truncated lines).
 */
export function parseRawLine(line: string): RawRecord | null {
    if (!line) return null;
    const kind = line.slice(0, line.indexOf('\t'));
    try {
        if (kind === 'OPEN') {
            const parts = line.split('\t');
            if (parts.length < 5) return null;
            const [, ts, pid, fd] = parts;
            const rawPath = parts.slice(4).join('\t');
            return {
                kind: 'open',
                tsNs: BigInt(ts),
                pid: parseDecimal(pid),
                fd: parseDecimal(fd, true),
                rawPath,
            };
        }
        if (kind === 'READ' || kind === 'CLOSE') {
            const parts = line.split('\t');
            if (parts.length !== 4) return null;
            const [, ts, pid, fd] = parts;
            return {
                kind: kind === 'READ' ? 'read' : 'close',
                tsNs: BigInt(ts),
                pid: parseDecimal(pid),
                fd: parseDecimal(fd, true),
            };
        }
    } catch {
        return null;
    }
    return null;
}

function parseDecimal(text: string, allowNegative = false): number {
    if (!(allowNegative ? /^-?\d+$/ : /^\d+$/).test(text)) {
        throw new Error(`not a decimal: ${text}`);
    }
    return parseInt(text, 10);
}
