#!/usr/bin/env node
import { parseArgs, UsageError, USAGE } from './cli';
import { runProbe } from './probe';

async function main(): Promise<number> {
    let config;
    try {
        config = parseArgs(process.argv.slice(2));
    } catch (err) {
        if (err instanceof UsageError) {
            process.stderr.write(`${err.message}\n${USAGE}\n`);
            return 2;
        }
        throw err;
    }
    try {
        const result = await runProbe(config);
        return result.exitCode;
    } catch (err) {
        process.stderr.write(`probe error: ${err instanceof Error ? err.message : String(err)}\n`);
        return 1;
    }
}

main().then((code) => {
    process.exitCode = code;
});
