/** Raw record stream -> filtered probe events. */

import * as path from 'path';

import { ProbeEvent } from './events';
import { FdTable, resolvePath } from './fdtable';
import { parseRawLine } from './rawparse';

export interface PipelineStats {
    emitted: number;
    opens: number;
    reads: number;
    /** Reads on fds opened before attach (no path known). */
    unknownFd: number;
    /** Events on paths outside the watched prefix. */
    filtered: number;
    /** Lines that are not records (banners, noise). */
    ignoredLines: number;
}

export interface PipelineOptions {
    /** Absolute path prefix to keep (the store's docs directory or above). */
    pathPrefix: string;
    /** Working directory of the traced process at attach time. */
    targetCwd: string;
}

export class EventPipeline {
    private readonly fds = new FdTable();
    private readonly prefix: string;
    private readonly cwd: string;
    readonly stats: PipelineStats = {
        emitted: 0,
        opens: 0,
        reads: 0,
        unknownFd: 0,
        filtered: 0,
        ignoredLines: 0,
    };

    constructor(options: PipelineOptions) {
        if (!path.isAbsolute(options.pathPrefix)) {
            throw new Error(`path prefix must be absolute, got ${options.pathPrefix}`);
        }
        this.prefix = path.normalize(options.pathPrefix);
        this.cwd = options.targetCwd;
    }

    private underPrefix(candidate: string): boolean {
        return candidate === this.prefix || candidate.startsWith(this.prefix + path.sep);
    }

    /** Consume one raw line; returns the event to emit, if any. */
    consume(line: string): ProbeEvent | null {
        const record = parseRawLine(line);
        if (record === null) {
            if (line.trim().length > 0) this.stats.ignoredLines += 1;
            return null;
        }
        if (record.kind === 'open') {
            if (record.fd < 0) return null; // failed open: no file access happened
            this.stats.opens += 1;
            const resolved = resolvePath(this.cwd, record.rawPath);
            this.fds.open(record.fd, resolved);
            if (!this.underPrefix(resolved)) {
                this.stats.filtered += 1;
                return null;
            }
            this.stats.emitted += 1;
            return { tsNs: record.tsNs, pid: record.pid, op: 'open', path: resolved };
        }
        if (record.kind === 'close') {
            this.fds.close(record.fd);
            return null;
        }
        // read
        this.stats.reads += 1;
        const known = this.fds.lookup(record.fd);
        if (known === undefined) {
            this.stats.unknownFd += 1;
            return null;
        }
        if (!this.underPrefix(known)) {
            this.stats.filtered += 1;
            return null;
        }
        this.stats.emitted += 1;
        return { tsNs: record.tsNs, pid: record.pid, op: 'read', path: known };
    }
}
