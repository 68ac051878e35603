/** Argument handling for the probe executable. */

export interface ProbeConfig {
    pid: number;
    prefix: string;
    out: string;
    /** Override for tests and non-standard installs. */
    bpftracePath: string;
}

export class UsageError extends Error {}

export const USAGE =
    'usage: probe --pid <pid> --prefix <absolute path> --out <file or pipe> [--bpftrace <executable>]';

export function parseArgs(argv: string[]): ProbeConfig {
    const values = new Map<string, string>();
    for (let i = 0; i < argv.length; i += 2) {
        const flag = argv[i];
        if (!flag.startsWith('--')) throw new UsageError(`unexpected argument: ${flag}`);
        const value = argv[i + 1];
        if (value === undefined) throw new UsageError(`missing value for ${flag}`);
        values.set(flag.slice(2), value);
    }
    for (const required of ['pid', 'prefix', 'out']) {
        if (!values.has(required)) throw new UsageError(`missing --${required}`);
    }
    const pid = Number(values.get('pid'));
    if (!Number.isInteger(pid) || pid <= 0) {
        throw new UsageError(`--pid must be a positive integer, got ${values.get('pid')}`);
    }
    const prefix = values.get('prefix')!;
    if (!prefix.startsWith('/')) {
        throw new UsageError(`--prefix must be an absolute path, got ${prefix}`);
    }
    const known = new Set(['pid', 'prefix', 'out', 'bpftrace']);
    for (const flag of values.keys()) {
        if (!known.has(flag)) throw new UsageError(`unknown flag --${flag}`);
    }
    return {
        pid,
        prefix,
        out: values.get('out')!,
        bpftracePath: values.get('bpftrace') ?? 'bpftrace',
    };
}
