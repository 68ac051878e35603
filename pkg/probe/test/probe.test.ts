import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { afterEach, beforeEach, describe, expect, it } from 'vitest';

import { runProbe } from '../src/probe';
import { EventPipeline } from '../src/pipeline';

let workDir: string;

beforeEach(() => {
    workDir = fs.mkdtempSync(path.join(os.tmpdir(), 'probe-test-'));
});

afterEach(() => {
    fs.rmSync(workDir, { recursive: true, force: true });
});

/** Stub tracer: prints recorded raw lines like the real program would. */
function writeStubTracer(lines: string[]): string {
    const script = path.join(workDir, 'fake-bpftrace.sh');
    const body = [
        '#!/bin/sh',
        'echo "Attaching 5 probes..." >&2',
        // %b expands the \t escapes into real tabs.
        ...lines.map((l) => `printf '%b\\n' '${l.replace(/\t/g, '\\t')}'`),
        'sleep 0.1',
    ].join('\n');
    fs.writeFileSync(script, body + '\n', { mode: 0o755 });
    return script;
}

describe('runProbe with a stub tracer', () => {
    it('streams filtered events in the consumer schema', async () => {
        const prefix = path.join(workDir, 'store', 'docs');
        const pid = process.pid; // the probe reads /proc/<pid>/cwd; use our own
        const stub = writeStubTracer([
            `OPEN\t1000\t${pid}\t3\t${prefix}/doc1`,
            `READ\t1001\t${pid}\t3`,
            `CLOSE\t1002\t${pid}\t3`,
            `OPEN\t1003\t${pid}\t4\t/etc/hosts`,
            `READ\t1004\t${pid}\t4`,
            `OPEN\t1005\t${pid}\t5\t${prefix}/doc2`,
        ]);
        const out = path.join(workDir, 'feed.jsonl');
        const result = await runProbe(
            { pid, prefix, out, bpftracePath: stub },
            () => undefined
        );
        expect(result.exitCode).toBe(0);
        const rows = fs
            .readFileSync(out, 'utf-8')
            .trim()
            .split('\n')
            .map((line) => JSON.parse(line));
        expect(rows).toEqual([
            { ts_ns: 1000, pid, op: 'open', path: `${prefix}/doc1` },
            { ts_ns: 1001, pid, op: 'read', path: `${prefix}/doc1` },
            { ts_ns: 1005, pid, op: 'open', path: `${prefix}/doc2` },
        ]);
        expect(result.stats.filtered).toBe(2);
    });

    it('fails with a diagnostic when the tracer is missing', async () => {
        const messages: string[] = [];
        const result = await runProbe(
            {
                pid: process.pid,
                prefix: '/srv/docs',
                out: path.join(workDir, 'feed.jsonl'),
                bpftracePath: path.join(workDir, 'no-such-tracer'),
            },
            (m) => messages.push(m)
        );
        expect(result.exitCode).not.toBe(0);
        expect(messages.join('\n')).toMatch(/failed to start/);
    });

    it('propagates tracer failure exit codes (verifier rejection etc.)', async () => {
        const script = path.join(workDir, 'failing-tracer.sh');
        fs.writeFileSync(script, '#!/bin/sh\necho "verifier rejected program" >&2\nexit 7\n', {
            mode: 0o755,
        });
        const messages: string[] = [];
        const result = await runProbe(
            {
                pid: process.pid,
                prefix: '/srv/docs',
                out: path.join(workDir, 'feed.jsonl'),
                bpftracePath: script,
            },
            (m) => messages.push(m)
        );
        expect(result.exitCode).toBe(7);
        expect(messages.join('\n')).toMatch(/verifier rejected/);
    });

    it('rejects dead target pids', async () => {
        await expect(
            runProbe(
                { pid: 2 ** 22 - 3, prefix: '/p', out: '/dev/null', bpftracePath: 'true' },
                () => undefined
            )
        ).rejects.toThrow(/working directory/);
    });
});

describe('query observation equivalence', () => {
    it('a simulated query run replayed through the pipeline yields the exact file set', () => {
        // Raw lines for one query touching doc1/doc3/doc7, as the kernel
        // tracer would report the server's open+read pattern.
        const prefix = '/srv/store/docs';
        const pipeline = new EventPipeline({ pathPrefix: prefix, targetCwd: '/srv' });
        const lines = [
            `OPEN\t10\t1\t3\t${prefix}/doc1`,
            `READ\t11\t1\t3`,
            `CLOSE\t12\t1\t3`,
            `OPEN\t13\t1\t3\t${prefix}/doc3`,
            `READ\t14\t1\t3`,
            `CLOSE\t15\t1\t3`,
            `OPEN\t16\t1\t3\t${prefix}/doc7`,
            `READ\t17\t1\t3`,
            `READ\t18\t1\t3`,
            `CLOSE\t19\t1\t3`,
        ];
        const files = new Set<string>();
        for (const line of lines) {
            const event = pipeline.consume(line);
            if (event !== null) files.add(event.path.slice(prefix.length + 1));
        }
        expect([...files].sort()).toEqual(['doc1', 'doc3', 'doc7']);
        expect(pipeline.stats.emitted).toBe(7); // 3 opens + 4 reads
    });
});

const canTraceKernel = (() => {
    if (process.platform !== 'linux' || process.getuid?.() !== 0) return false;
    try {
        execFileSync('bpftrace', ['--version'], { stdio: 'ignore' });
        return true;
    } catch {
        return false;
    }
})();

describe.skipIf(!canTraceKernel)('runProbe against the live kernel', () => {
    it('captures opens of a child process', async () => {
        const docs = path.join(workDir, 'docs');
        fs.mkdirSync(docs);
        fs.writeFileSync(path.join(docs, 'doc1'), 'payload');
        const { spawn } = await import('child_process');
        const target = spawn(
            'sh',
            ['-c', `sleep 1; cat ${docs}/doc1 > /dev/null; sleep 1`],
            { stdio: 'ignore' }
        );
        const out = path.join(workDir, 'feed.jsonl');
        const probe = runProbe({
            pid: target.pid!,
            prefix: docs,
            out,
            bpftracePath: 'bpftrace',
        });
        await new Promise((r) => target.on('exit', r));
        process.kill(process.pid, 'SIGINT'); // detach the probe
        const result = await probe;
        expect(result.exitCode).toBe(0);
        const rows = fs.readFileSync(out, 'utf-8').trim().split('\n').filter(Boolean);
        expect(rows.some((r) => JSON.parse(r).path.endsWith('/doc1'))).toBe(true);
    }, 30_000);
});
