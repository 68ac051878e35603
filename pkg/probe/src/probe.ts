/** Probe runtime: spawn the kernel tracer and stream filtered events. */

import { spawn } from 'child_process';
import * as fs from 'fs';
import * as readline from 'readline';

import { ProbeConfig } from './cli';
import { formatEventLine } from './events';
import { EventPipeline, PipelineStats } from './pipeline';
import { buildProgram } from './program';

export interface ProbeResult {
    exitCode: number;
    stats: PipelineStats;
}

function readTargetCwd(pid: number): string {
    try {
        return fs.readlinkSync(`/proc/${pid}/cwd`);
    } catch (err) {
        throw new Error(
            `cannot read working directory of pid ${pid} (is it alive?): ${String(err)}`
        );
    }
}

/**
 * Attach to the target process and stream events until the tracer exits or
 * the probe is interrupted. Attach failures (missing tracer, verifier
 * rejection, insufficient privileges) surface as a nonzero exit code with
 * the tracer's diagnostics on stderr.
 */
export async function runProbe(
    config: ProbeConfig,
    log: (message: string) => void = (m) => process.stderr.write(m + '\n')
): Promise<ProbeResult> {
    const targetCwd = readTargetCwd(config.pid);
    const pipeline = new EventPipeline({ pathPrefix: config.prefix, targetCwd });
    const program = buildProgram(config.pid);
    const out = fs.createWriteStream(config.out, { flags: 'a' });

    const child = spawn(config.bpftracePath, ['-e', program], {
        stdio: ['ignore', 'pipe', 'pipe'],
    });

    return new Promise<ProbeResult>((resolve) => {
        let spawnFailed = false;

        child.on('error', (err) => {
            spawnFailed = true;
            log(`failed to start ${config.bpftracePath}: ${err.message}`);
            out.end(() => resolve({ exitCode: 1, stats: pipeline.stats }));
        });

        readline
            .createInterface({ input: child.stdout!, crlfDelay: Infinity })
            .on('line', (line) => {
                const event = pipeline.consume(line);
                if (event !== null) out.write(formatEventLine(event) + '\n');
            });

        readline
            .createInterface({ input: child.stderr!, crlfDelay: Infinity })
            .on('line', (line) => log(`tracer: ${line}`));

        const stop = () => child.kill('SIGINT');
        process.once('SIGINT', stop);
        process.once('SIGTERM', stop);

        // 'close' (not 'exit') fires after the child's stdio has drained, so
        // every line has passed through the pipeline and every diagnostic is
        // logged before the result is finalized.
        child.on('close', (code, signal) => {
            if (spawnFailed) return;
            process.removeListener('SIGINT', stop);
            process.removeListener('SIGTERM', stop);
            const s = pipeline.stats;
            log(
                `probe done: ${s.emitted} events emitted ` +
                    `(${s.opens} opens, ${s.reads} reads, ${s.unknownFd} unknown fds, ` +
                    `${s.filtered} outside prefix)`
            );
            // SIGINT-driven shutdown is a clean detach, not a failure.
            const interrupted = signal === 'SIGINT' || signal === 'SIGTERM';
            const exitCode = interrupted ? 0 : code ?? 1;
            if (exitCode !== 0) {
                log(`tracer failed (exit ${exitCode}); see diagnostics above`);
            }
            out.end(() => resolve({ exitCode, stats: pipeline.stats }));
        });
    });
}
